"""Linear anchored Gaussian density, domain normalization and the sigma/width law.

A line is written in Hesse normal form ``x*cos(theta) + y*sin(theta) = rho``
with pixel coordinates 1-based (x in [1, W], y in [1, H]) so that discrete
sums over the grid match the model's normalization exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT_2PI = math.sqrt(2.0 * math.pi)
SQRT3 = math.sqrt(3.0)

#: Below half a pixel the discrete cross-profile degenerates; scales are
#: clamped here and the clamp is flagged by the caller.
SIGMA_FLOOR = 0.5


class LagmixError(Exception):
    """Base class for all package errors."""


class EmptyImageError(LagmixError):
    """Raised when an image carries no positive gray mass."""


@dataclass(frozen=True)
class ImageDomain:
    """Rectangular pixel domain, W columns by H rows."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("domain must be at least 1x1")

    @property
    def diag(self) -> float:
        return math.hypot(self.width, self.height)

    def grids(self) -> tuple[np.ndarray, np.ndarray]:
        """1-based coordinate grids X, Y of shape (H, W)."""
        x = np.arange(1, self.width + 1, dtype=float)
        y = np.arange(1, self.height + 1, dtype=float)
        return np.meshgrid(x, y)


@dataclass(frozen=True)
class LineParams:
    """Centerline in Hesse normal form; theta is the normal angle."""

    rho: float
    theta: float

    def canonical(self) -> "LineParams":
        """Unique representative with theta in (-pi/2, pi/2].

        (rho, theta) and (-rho, theta +/- pi) denote the same line; folding
        theta flips the sign of rho once per half-turn.
        """
        rho, theta = self.rho, self.theta
        while theta > math.pi / 2:
            theta -= math.pi
            rho = -rho
        while theta <= -math.pi / 2:
            theta += math.pi
            rho = -rho
        return LineParams(rho, theta)

    def signed_distance(self, x, y):
        return x * math.cos(self.theta) + y * math.sin(self.theta) - self.rho


@dataclass(frozen=True)
class ComponentParams:
    """One mixture component: a line, a cross-profile scale and a weight."""

    line: LineParams
    sigma: float
    pi: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not (0 < self.pi <= 1):
            raise ValueError("pi must be in (0, 1]")

    @property
    def width(self) -> float:
        """Thickness of the bar modelled by this component."""
        return width_from_sigma(self.sigma)


def lagd_unnormalized(x, y, c: ComponentParams):
    """Density of Eq-form (1/(sqrt(2 pi) sigma)) exp(-d^2 / (2 sigma^2)).

    ``x`` and ``y`` may be scalars or arrays; ``d`` is the signed distance
    to the centerline.
    """
    d = c.line.signed_distance(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return np.exp(-(d * d) / (2.0 * c.sigma**2)) / (SQRT_2PI * c.sigma)


def log_lagd_unnormalized(x, y, c: ComponentParams):
    d = c.line.signed_distance(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return -(d * d) / (2.0 * c.sigma**2) - math.log(SQRT_2PI * c.sigma)


def domain_volume(c: ComponentParams, d: ImageDomain) -> float:
    """Discrete volume under the unnormalized density over the pixel grid."""
    X, Y = d.grids()
    return float(lagd_unnormalized(X, Y, c).sum())


def lagd_pdf(x, y, c: ComponentParams, d: ImageDomain, vol: float):
    """Domain-normalized density; sums to 1 over the grid by construction."""
    if not vol > 0:
        raise ValueError("volume must be positive")
    return lagd_unnormalized(x, y, c) / vol


def width_from_sigma(sigma: float) -> float:
    """Bar thickness from the fitted scale, w = 2*sqrt(3)*sigma."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return 2.0 * SQRT3 * sigma


def sigma_from_width(width: float) -> float:
    """Inverse of :func:`width_from_sigma`, sigma = w / (2*sqrt(3))."""
    if not width > 0:
        raise ValueError("width must be positive")
    return width / (2.0 * SQRT3)


def perpendicular_profile_mean(c: ComponentParams, axis_origin: tuple[float, float]) -> float:
    """Mean of the 1-D cross profile measured along an axis through ``axis_origin``.

    The origin must lie on one of the coordinate axes: (a, 0) gives
    rho - a*cos(theta), (0, b) gives rho - b*sin(theta), and the plane
    origin gives rho itself.
    """
    a, b = axis_origin
    rho, theta = c.line.rho, c.line.theta
    if b == 0:
        return rho - a * math.cos(theta)
    if a == 0:
        return rho - b * math.sin(theta)
    raise ValueError("axis origin must lie on the x-axis or the y-axis")


def line_difference(l1: LineParams, l2: LineParams) -> tuple[float, float]:
    """Angular and radial discrepancy between two undirected lines.

    Returns (d_theta, d_rho) where d_theta is the circle metric on line
    orientations (<= pi/2) and d_rho is measured in the representation that
    realizes that angular distance.
    """
    c1, c2 = l1.canonical(), l2.canonical()
    dt_direct = abs(c1.theta - c2.theta)
    dt_flip = math.pi - dt_direct
    if dt_direct <= dt_flip:
        return dt_direct, abs(c1.rho - c2.rho)
    return dt_flip, abs(c1.rho + c2.rho)
