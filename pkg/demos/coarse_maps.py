"""Coarse maps: synthesis, binarization, and the guidance mask.

Synthesizes a contour probability map and surface heatmap for a random room
(the stand-in for a trained network's output), then shows how thresholding
plus dilation produces the mask that guides line selection.
Output: demos/out/coarse_maps.png
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from roomlayout import argmax_surfaces, binarize_and_dilate
from roomlayout import synth

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

scene = synth.make_scene(
    seed=12, blur_sigma=2.0, noise_amp=0.15, occlusion_fraction=0.6
)
print("occlusion rectangles:", scene.occlusions)

mask = binarize_and_dilate(scene.pmap, threshold=0.5, radius=4)
surfaces = argmax_surfaces(scene.heatmap)
agreement = float(np.mean(surfaces.labels == scene.labeling.labels))
print(f"argmax of heatmap agrees with ground truth on {100 * agreement:.2f}% of pixels")

fig, axes = plt.subplots(1, 4, figsize=(16, 4.2))
axes[0].imshow(scene.image)
axes[0].set_title("rendered scene (floor boundary occluded)")
axes[1].imshow(scene.pmap.values, cmap="magma")
axes[1].set_title("contour probability map P")
axes[2].imshow(mask.mask, cmap="gray")
axes[2].set_title("mask: P >= 0.5 dilated by 4 px")
axes[3].imshow(surfaces.labels, cmap="tab10", vmin=0, vmax=9)
axes[3].set_title("argmax of the surface heatmap")
for ax in axes:
    ax.set_xticks([]), ax.set_yticks([])
fig.tight_layout()
fig.savefig(OUT / "coarse_maps.png", dpi=110)
print("wrote", OUT / "coarse_maps.png")
