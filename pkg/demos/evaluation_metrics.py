"""Evaluation metrics: pixel error, corner error, contour ODS/OIS.

Refines a small synthetic batch and evaluates it against ground truth, then
scores the raw coarse maps with the contour F-measures at sweeping
thresholds. Output: demos/out/evaluation_metrics.png
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from roomlayout import (
    contour_fscore, corner_error, extract_corners, layout_to_contour,
    layout_to_labeling, pixel_error,
)
from roomlayout import synth
from roomlayout.pipeline import refine

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

scenes = [
    synth.make_scene(seed=60 + i, blur_sigma=2.0, noise_amp=0.15, occlusion_fraction=0.5)
    for i in range(6)
]

pes, ces = [], []
for scene in scenes:
    result = refine(scene.image, scene.pmap, scene.heatmap)
    pred = result.best.layout
    pes.append(pixel_error(layout_to_labeling(pred, 404, 404), scene.labeling))
    ces.append(corner_error(
        extract_corners(pred, 404, 404), scene.corners, (404, 404)
    ))
print(f"mean pixel error  {100 * np.mean(pes):.2f}%")
print(f"mean corner error {100 * np.mean(ces):.2f}%")

# contour quality of the raw coarse maps against the true 1-px contours
gts = [layout_to_contour(s.model, 404, 404, line_width=1) for s in scenes]
score = contour_fscore([s.pmap for s in scenes], gts)
print(f"coarse-map contours: ODS {score.ods:.3f}, OIS {score.ois:.3f}")

fs = [
    2 * p * r / (p + r) if (p + r) > 0 else 0.0
    for p, r in zip(score.precision, score.recall)
]
fig, axes = plt.subplots(1, 2, figsize=(11, 4.2))
axes[0].bar(range(len(pes)), [100 * v for v in pes], label="pixel error %")
axes[0].bar(range(len(ces)), [100 * v for v in ces], alpha=0.6, label="corner error %")
axes[0].set_xlabel("scene"), axes[0].legend()
axes[0].set_title("per-scene refinement errors")
axes[1].plot(score.thresholds, score.precision, label="precision")
axes[1].plot(score.thresholds, score.recall, label="recall")
axes[1].plot(score.thresholds, fs, label="F", lw=2)
axes[1].axhline(score.ods, ls="--", color="gray", lw=1)
axes[1].set_xlabel("threshold"), axes[1].legend()
axes[1].set_title(f"coarse-map contour quality (ODS {score.ods:.3f} / OIS {score.ois:.3f})")
fig.tight_layout()
fig.savefig(OUT / "evaluation_metrics.png", dpi=110)
print("wrote", OUT / "evaluation_metrics.png")
