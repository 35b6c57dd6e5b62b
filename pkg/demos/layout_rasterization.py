"""Rasterizing a box layout: surface labels, contours, corners.

Builds a layout from four boundary lines and a vanishing point, rasterizes
it into per-pixel surface labels and a contour stroke, and marks the named
corners. Output: demos/out/layout_rasterization.png
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from roomlayout import (
    LayoutModel, Point2, extract_corners, layout_to_contour, layout_to_labeling,
    line_through,
)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

W = H = 404

# a room seen slightly from the left: the far horizontal vanishing point sits
# way off to the right, the vertical one far below
far_vp = Point2(3200.0, 230.0)
vertical_vp = Point2(190.0, 5200.0)
model = LayoutModel(
    v=Point2(210.0, 190.0),
    l1=line_through(Point2(202.0, 96.0), far_vp),
    l2=line_through(Point2(202.0, 300.0), far_vp),
    l3=line_through(Point2(95.0, 202.0), vertical_vp),
    l4=line_through(Point2(318.0, 202.0), vertical_vp),
)
print("topology:", model.topology)

labeling = layout_to_labeling(model, W, H)
thin = layout_to_contour(model, W, H, line_width=1)
thick = layout_to_contour(model, W, H, line_width=7)
corners = extract_corners(model, W, H)

print(f"contour pixels: {thin.count()} at width 1, {thick.count()} at width 7")
for c in corners:
    if c.id.startswith("p"):
        x, y = c.point.xy()
        print(f"  {c.id} = ({x:6.1f}, {y:6.1f})  in_bounds={c.in_bounds}")

fig, axes = plt.subplots(1, 3, figsize=(13, 4.4))
axes[0].imshow(labeling.labels, cmap="tab10", vmin=0, vmax=9)
axes[0].set_title("surface labels")
axes[1].imshow(thick.mask, cmap="gray")
axes[1].set_title("contour, width 7")
axes[2].imshow(labeling.labels, cmap="tab10", vmin=0, vmax=9, alpha=0.4)
for c in corners:
    if c.point.is_ideal:
        continue
    x, y = c.point.xy()
    marker = "o" if c.id.startswith("p") else "x"
    axes[2].plot(x, y, marker, color="black", ms=6)
    axes[2].annotate(c.id, (x + 4, y - 4), fontsize=8)
vx, vy = model.v.xy()
axes[2].plot(vx, vy, "*", color="red", ms=12)
axes[2].set_title("corners and vanishing point")
for ax in axes:
    ax.set_xticks([]), ax.set_yticks([])
fig.tight_layout()
fig.savefig(OUT / "layout_rasterization.png", dpi=110)
print("wrote", OUT / "layout_rasterization.png")
