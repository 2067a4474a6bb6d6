"""Structure counting and initial parameters from multiscale Hessian analysis.

A bright bar produces a strongly negative Hessian eigenvalue across its
axis; the matching eigenvector is the bar's normal, which is exactly the
angle parameter of the centerline in Hesse normal form.  Pooling the
strongest ridge pixels over several smoothing scales gives an orientation
histogram whose peaks count the distinct directions present.  Parallel
structures share a peak and are separated afterwards by clustering the
pixel projections onto the common normal axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .model import ImageDomain, LagmixError, LineParams, ComponentParams
from .em import MixtureState


class HessianError(LagmixError):
    """No usable ridge structure found in the image."""


@dataclass(frozen=True)
class HessianConfig:
    """Knobs for ridge detection; the defaults are implementation choices
    validated on the synthetic fixtures."""

    scales: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0)
    strength_quantile: float = 0.90
    bin_width_deg: float = 2.0
    min_peak_separation_deg: float = 10.0
    #: A peak is kept while its mass is at least this fraction of the
    #: strongest peak's mass.
    min_peak_fraction: float = 0.10
    #: Structures whose strength share falls below this fraction are dropped
    #: as clutter.
    min_structure_fraction: float = 0.05
    #: Gap threshold for splitting parallel structures, as a multiple of the
    #: median per-pixel scale estimate.
    gap_factor: float = 3.0
    #: Two parallel groups are re-merged (edges or fragments of one structure)
    #: when the image between them is at least this fraction as bright as the
    #: dimmer of the two group centerlines.
    merge_brightness: float = 0.5
    #: "bright" detects ridges brighter than their surroundings, "dark" the
    #: opposite polarity.
    polarity: str = "bright"

    def __post_init__(self):
        if self.polarity not in ("bright", "dark"):
            raise ValueError("polarity must be 'bright' or 'dark'")
        if not self.scales:
            raise ValueError("at least one scale is required")


@dataclass(frozen=True)
class StructureSeed:
    """One detected structure with initial parameters for the mixture fit."""

    line: LineParams
    sigma: float
    pi: float
    strength: float


def ridge_measures(
    img: np.ndarray, config: HessianConfig = HessianConfig()
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel ridge strength, normal angle (radians) and best scale.

    The strength is the scale-normalized magnitude of the negative Hessian
    eigenvalue (sign flipped for dark polarity), maximized over scales; the
    angle is that of the corresponding eigenvector, i.e. the candidate
    centerline normal.
    """
    img = np.asarray(img, dtype=float)
    sign = 1.0 if config.polarity == "bright" else -1.0
    best_r = np.zeros(img.shape)
    best_theta = np.zeros(img.shape)
    best_scale = np.full(img.shape, config.scales[0], dtype=float)
    for s in config.scales:
        ixx = ndimage.gaussian_filter(img, s, order=(0, 2))
        iyy = ndimage.gaussian_filter(img, s, order=(2, 0))
        ixy = ndimage.gaussian_filter(img, s, order=(1, 1))
        half_tr = 0.5 * (ixx + iyy)
        root = np.hypot(0.5 * (ixx - iyy), ixy)
        lam2 = half_tr - sign * root  # eigenvalue curving down across a ridge
        strength = np.maximum(-sign * lam2, 0.0) * s * s
        # Eigenvector of lam2 gives the across-ridge (normal) direction.
        vx = ixy
        vy = lam2 - ixx
        theta = np.arctan2(vy, vx)
        better = strength > best_r
        best_r = np.where(better, strength, best_r)
        best_theta = np.where(better, theta, best_theta)
        best_scale = np.where(better, s, best_scale)
    return best_r, best_theta, best_scale


def _axial_deg(theta: np.ndarray) -> np.ndarray:
    """Fold normal angles to the axial range (-90, 90] in degrees."""
    deg = np.degrees(theta)
    deg = np.mod(deg + 90.0, 180.0) - 90.0
    return np.where(deg == -90.0, 90.0, deg)


def orientation_histogram(
    angles_deg: np.ndarray, weights: np.ndarray, bin_width: float
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted histogram over (-90, 90] with the given bin width."""
    n_bins = int(round(180.0 / bin_width))
    hist, edges = np.histogram(
        angles_deg, bins=n_bins, range=(-90.0, 90.0), weights=weights
    )
    centers = 0.5 * (edges[:-1] + edges[1:])
    return hist, centers


def find_orientation_peaks(
    hist: np.ndarray, centers: np.ndarray, config: HessianConfig
) -> list[float]:
    """Dominant histogram directions, separated circularly by the configured
    minimum angle, strongest first."""
    order = np.argsort(hist)[::-1]
    peaks: list[float] = []
    strongest = hist[order[0]]
    if strongest <= 0:
        return peaks
    for idx in order:
        if hist[idx] < config.min_peak_fraction * strongest:
            break
        ang = centers[idx]
        sep = min(
            (abs(ang - p) if abs(ang - p) <= 90.0 else 180.0 - abs(ang - p))
            for p in peaks
        ) if peaks else math.inf
        if sep >= config.min_peak_separation_deg:
            peaks.append(float(ang))
    return peaks


def _axial_mean_deg(angles_deg: np.ndarray, weights: np.ndarray) -> float:
    """Weighted mean of axial (period-180) angles via angle doubling."""
    doubled = np.radians(angles_deg) * 2.0
    c = float(np.sum(weights * np.cos(doubled)))
    s = float(np.sum(weights * np.sin(doubled)))
    mean = 0.5 * math.atan2(s, c)
    deg = math.degrees(mean)
    if deg <= -90.0:
        deg += 180.0
    elif deg > 90.0:
        deg -= 180.0
    return deg


def split_parallel(
    proj: np.ndarray,
    weights: np.ndarray,
    scales: np.ndarray,
    config: HessianConfig,
) -> list[np.ndarray]:
    """Index groups of one orientation's pixels, split at projection gaps.

    Parallel structures share a direction but occupy disjoint intervals on
    the normal axis; a gap wider than ``gap_factor`` times the median scale
    estimate separates two structures.
    """
    order = np.argsort(proj)
    sorted_proj = proj[order]
    threshold = config.gap_factor * float(np.median(scales))
    groups: list[list[int]] = [[int(order[0])]]
    for k in range(1, sorted_proj.size):
        if sorted_proj[k] - sorted_proj[k - 1] > threshold:
            groups.append([])
        groups[-1].append(int(order[k]))
    return [np.array(g, dtype=int) for g in groups]


def estimate_structures(
    img: np.ndarray, config: HessianConfig = HessianConfig()
) -> list[StructureSeed]:
    """Detected structures with initial (theta, rho, sigma, pi) estimates.

    The structure count M is simply the length of the returned list.
    """
    img = np.asarray(img, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise HessianError("expected a non-empty 2-D image")
    span = float(np.ptp(img))
    if span == 0.0:
        raise HessianError("image has no intensity variation")
    strength, theta, scale = ridge_measures(img, config)

    # Responses at the level of floating-point noise on the image's dynamic
    # range are not structure.
    floor = 1e-9 * span
    positive = strength[strength > floor]
    if positive.size == 0:
        raise HessianError("no ridge response in image")
    cutoff = float(np.quantile(positive, config.strength_quantile))
    mask = strength >= cutoff
    H, W = img.shape
    yy, xx = np.nonzero(mask)
    w = strength[mask]
    ang = _axial_deg(theta[mask])
    sc = scale[mask]
    x = xx.astype(float) + 1.0  # 1-based pixel coordinates
    y = yy.astype(float) + 1.0

    hist, centers = orientation_histogram(ang, w, config.bin_width_deg)
    peaks = find_orientation_peaks(hist, centers, config)
    if not peaks:
        raise HessianError("no orientation peak found")

    domain = ImageDomain(W, H)
    Xg, Yg = domain.grids()
    half_sep = config.min_peak_separation_deg / 2.0
    seeds: list[StructureSeed] = []
    for peak in peaks:
        diff = np.abs(ang - peak)
        diff = np.minimum(diff, 180.0 - diff)
        sel = diff <= half_sep
        if not sel.any():
            continue
        theta_deg = _axial_mean_deg(ang[sel], w[sel])
        th = math.radians(theta_deg)
        proj = x[sel] * math.cos(th) + y[sel] * math.sin(th)
        proj_full = Xg * math.cos(th) + Yg * math.sin(th)

        def strip_mean(rho: float) -> float:
            strip = np.abs(proj_full - rho) <= 1.5
            return float(img[strip].mean()) if strip.any() else 0.0

        groups = split_parallel(proj, w[sel], sc[sel], config)
        groups.sort(key=lambda g: float(proj[g].mean()))
        merged = [groups[0]]
        for grp in groups[1:]:
            prev = merged[-1]
            rho_prev = float((w[sel][prev] * proj[prev]).sum() / w[sel][prev].sum())
            rho_next = float((w[sel][grp] * proj[grp]).sum() / w[sel][grp].sum())
            floor = config.merge_brightness * min(strip_mean(rho_prev), strip_mean(rho_next))
            if strip_mean(0.5 * (rho_prev + rho_next)) >= floor:
                merged[-1] = np.concatenate([prev, grp])
            else:
                merged.append(grp)

        for grp in merged:
            gw = w[sel][grp]
            gp = proj[grp]
            total = float(gw.sum())
            rho = float((gw * gp).sum() / total)
            med_scale = float(np.median(sc[sel][grp]))
            # A wide bar answers at its two edges; the projection spread plus
            # the smoothing margin then measures its width directly.
            span = float(gp.max() - gp.min())
            sigma = max(med_scale, (span + 2.0 * med_scale) / (2.0 * math.sqrt(3.0)))
            seeds.append(
                StructureSeed(
                    line=LineParams(rho, th).canonical(),
                    sigma=max(sigma, 1.0),
                    pi=0.0,
                    strength=total,
                )
            )
    if not seeds:
        raise HessianError("no structure seed survived selection")
    grand = sum(s.strength for s in seeds)
    seeds = [s for s in seeds if s.strength >= config.min_structure_fraction * grand]
    grand = sum(s.strength for s in seeds)
    seeds = [
        StructureSeed(s.line, s.sigma, s.strength / grand, s.strength)
        for s in seeds
    ]
    seeds.sort(key=lambda s: -s.strength)
    return seeds


def init_from_hessian(
    img: np.ndarray, config: HessianConfig = HessianConfig()
) -> MixtureState:
    """Mixture starting point assembled from the detected structures."""
    seeds = estimate_structures(img, config)
    comps = tuple(
        ComponentParams(s.line, s.sigma, s.pi) for s in seeds
    )
    return MixtureState(components=comps)
