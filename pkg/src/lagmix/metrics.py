"""Error measures between a ground-truth mixture and an estimate.

Components are matched by a minimum-cost assignment on centerline
discrepancy before absolute errors, RMSEs and relative width errors are
computed.  Orientation errors use the circle metric on undirected lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .em import MixtureState
from .model import line_difference


@dataclass(frozen=True)
class ErrorReport:
    """Per-component absolute errors and per-parameter RMSEs.

    ``matching`` maps each truth index to the matched estimate index;
    unmatched indices (when the two mixtures differ in size) are listed
    separately.  ``d_theta`` is in degrees.
    """

    matching: tuple[tuple[int, int], ...]
    unmatched_truth: tuple[int, ...]
    unmatched_est: tuple[int, ...]
    d_pi: tuple[float, ...]
    d_theta: tuple[float, ...]
    d_rho: tuple[float, ...]
    d_sigma: tuple[float, ...]
    d_w: tuple[float, ...]
    rel_w: tuple[float, ...]
    rmse_pi: float
    rmse_theta: float
    rmse_rho: float
    rmse_sigma: float
    rmse_w: float

    def to_dict(self) -> dict:
        return {
            "matching": [list(p) for p in self.matching],
            "unmatched_truth": list(self.unmatched_truth),
            "unmatched_est": list(self.unmatched_est),
            "d_pi": list(self.d_pi),
            "d_theta_deg": list(self.d_theta),
            "d_rho": list(self.d_rho),
            "d_sigma": list(self.d_sigma),
            "d_w": list(self.d_w),
            "rel_w": list(self.rel_w),
            "rmse_pi": self.rmse_pi,
            "rmse_theta_deg": self.rmse_theta,
            "rmse_rho": self.rmse_rho,
            "rmse_sigma": self.rmse_sigma,
            "rmse_w": self.rmse_w,
        }


def _rmse(values: tuple[float, ...]) -> float:
    if not values:
        return 0.0
    return math.sqrt(sum(v * v for v in values) / len(values))


def match_components(
    truth: MixtureState, est: MixtureState, diag: float = 1.0
) -> list[tuple[int, int]]:
    """Minimum-total-cost pairing of truth and estimated components.

    The cost of a pair is the centerline discrepancy |d_rho| + diag * d_theta
    (radians), so ``diag`` should be the image diagonal to weight angle and
    offset comparably.  When the mixtures differ in size the matching is
    partial (one pair per component of the smaller side).
    """
    cost = np.zeros((len(truth.components), len(est.components)))
    for i, t in enumerate(truth.components):
        for j, e in enumerate(est.components):
            dth, drho = line_difference(t.line, e.line)
            cost[i, j] = drho + diag * dth
    rows, cols = linear_sum_assignment(cost)
    return sorted(zip(rows.tolist(), cols.tolist()))


def compute_errors(
    truth: MixtureState, est: MixtureState, matching: list[tuple[int, int]]
) -> ErrorReport:
    """Absolute errors, width RelAE and per-parameter RMSE over the matching."""
    d_pi, d_theta, d_rho, d_sigma, d_w, rel_w = [], [], [], [], [], []
    for i, j in matching:
        t, e = truth.components[i], est.components[j]
        dth, drho = line_difference(t.line, e.line)
        d_theta.append(math.degrees(dth))
        d_rho.append(drho)
        d_pi.append(abs(t.pi - e.pi))
        d_sigma.append(abs(t.sigma - e.sigma))
        d_w.append(abs(t.width - e.width))
        rel_w.append(abs(t.width - e.width) / t.width)
    matched_t = {i for i, _ in matching}
    matched_e = {j for _, j in matching}
    return ErrorReport(
        matching=tuple(tuple(p) for p in matching),
        unmatched_truth=tuple(
            i for i in range(len(truth.components)) if i not in matched_t
        ),
        unmatched_est=tuple(
            j for j in range(len(est.components)) if j not in matched_e
        ),
        d_pi=tuple(d_pi),
        d_theta=tuple(d_theta),
        d_rho=tuple(d_rho),
        d_sigma=tuple(d_sigma),
        d_w=tuple(d_w),
        rel_w=tuple(rel_w),
        rmse_pi=_rmse(tuple(d_pi)),
        rmse_theta=_rmse(tuple(d_theta)),
        rmse_rho=_rmse(tuple(d_rho)),
        rmse_sigma=_rmse(tuple(d_sigma)),
        rmse_w=_rmse(tuple(d_w)),
    )


def evaluate(truth: MixtureState, est: MixtureState, diag: float = 1.0) -> ErrorReport:
    """Match then score in one call."""
    return compute_errors(truth, est, match_components(truth, est, diag))
