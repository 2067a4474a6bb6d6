"""Random small scenes shared by the EM property tests."""

import math


from lagmix import BarSpec, ImageDomain, LineParams, render_scene
from lagmix.em import init_params


def random_scene(rng):
    """A clean bar scene up to 128x128 with 1-3 bars, plus its truth state."""
    wid = int(rng.integers(48, 129))
    hgt = int(rng.integers(48, 129))
    dom = ImageDomain(wid, hgt)
    m = int(rng.integers(1, 4))
    bars = []
    for _ in range(m):
        theta = rng.uniform(-math.pi / 2, math.pi / 2)
        # Anchor the line on an interior point so the bar is visible.
        x0 = rng.uniform(0.25 * wid, 0.75 * wid)
        y0 = rng.uniform(0.25 * hgt, 0.75 * hgt)
        rho = x0 * math.cos(theta) + y0 * math.sin(theta)
        width = rng.uniform(4.0, 14.0)
        bars.append(BarSpec(LineParams(rho, theta), width))
    img, truth = render_scene(dom, bars)
    return img, truth


def random_start(h, m, rng):
    """A random-angle equal-proportion starting state."""
    thetas = rng.uniform(-math.pi / 2, math.pi / 2, size=m).tolist()
    return init_params(h, thetas, [1.0 / m] * m)
