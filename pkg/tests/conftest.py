import numpy as np
import pytest

from roomlayout.geometry import LayoutModel, Point2, line_through, structural_issues


def random_room(rng, width, height, drop_prob=0.0):
    """Random valid layout model; each line drops independently with drop_prob."""
    for _ in range(64):
        vx = rng.uniform(0.3, 0.7) * (width - 1)
        vy = rng.uniform(0.3, 0.7) * (height - 1)
        y_top = rng.uniform(0.06 * height, vy - 0.1 * height)
        y_bot = rng.uniform(vy + 0.1 * height, 0.95 * height)
        x_left = rng.uniform(0.05 * width, vx - 0.1 * width)
        x_right = rng.uniform(vx + 0.1 * width, 0.96 * width)
        vph = Point2(
            rng.choice((-1.0, 1.0)) * rng.uniform(4, 12) * width,
            vy + rng.uniform(-0.5, 0.5) * height,
        )
        vpv = Point2(
            vx + rng.uniform(-0.5, 0.5) * width,
            rng.choice((-1.0, 1.0)) * rng.uniform(6, 20) * height,
        )
        xc, yc = (width - 1) / 2.0, (height - 1) / 2.0
        keep = rng.random(4) >= drop_prob
        model = LayoutModel(
            v=Point2(vx, vy),
            l1=line_through(Point2(xc, y_top), vph) if keep[0] else None,
            l2=line_through(Point2(xc, y_bot), vph) if keep[1] else None,
            l3=line_through(Point2(x_left, yc), vpv) if keep[2] else None,
            l4=line_through(Point2(x_right, yc), vpv) if keep[3] else None,
        )
        if model.present() and not structural_issues(model, width, height):
            return model
    raise RuntimeError("could not sample a valid room")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
