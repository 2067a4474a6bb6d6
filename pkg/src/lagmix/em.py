"""EM estimation of a mixture of linear anchored Gaussians.

The image's gray mass is treated as i.i.d. draws from the mixture, so the
log-likelihood is an intensity-weighted sum over pixels.  The E-step forms
per-pixel posteriors in the log domain; the M-step uses closed forms for the
proportion, radius and scale, and reduces the angle update to the real roots
of a quartic in u = tan(theta), keeping the root that maximizes the expected
complete-data log-likelihood.

Volume normalizers are recomputed from the current parameters every
iteration.  Inside the M-step the normalizer is held fixed, matching how the
closed forms are derived; the reported Q always uses exact normalizers.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, asdict

import numpy as np

from .model import (
    SIGMA_FLOOR,
    SQRT_2PI,
    ComponentParams,
    EmptyImageError,
    ImageDomain,
    LagmixError,
    LineParams,
    log_lagd_unnormalized,
)
from .quartic import DegeneratePolynomialError, QuarticCoeffs, solve_real_roots

#: Components whose proportion falls below this are frozen, not updated.
PI_FLOOR = 1e-6
#: Relative tolerance on the angle stationarity residual.
RES_TOL = 1e-5
#: All quartic roots beyond this magnitude mean the optimum is effectively a
#: vertical normal, which tan(theta) cannot represent.
U_VERTICAL = 1e8


class NumericError(LagmixError):
    """Non-finite intermediate during likelihood evaluation."""


@dataclass(frozen=True)
class NormalizedImage:
    """Image normalized to a pdf over the grid, plus its total gray mass."""

    h: np.ndarray
    n_v: float

    @property
    def domain(self) -> ImageDomain:
        hgt, wid = self.h.shape
        return ImageDomain(wid, hgt)


@dataclass(frozen=True)
class MomentSet:
    """Responsibility-weighted raw image moments for one component."""

    m_x: float
    m_y: float
    m_xy: float
    m_x2: float
    m_y2: float


@dataclass(frozen=True)
class MixtureState:
    components: tuple[ComponentParams, ...]
    iteration: int = 0
    q_value: float = math.nan
    q_history: tuple[float, ...] = ()

    @property
    def m(self) -> int:
        return len(self.components)


@dataclass
class DetectionReport:
    components: list[dict]
    iterations: int
    converged: bool
    runtime_s: float
    q_history: list[float]
    flags: dict[str, int]
    n_v: float
    delta_q_raw: float
    delta_q_norm: float

    def to_dict(self) -> dict:
        return asdict(self)


def _component_dict(c: ComponentParams) -> dict:
    return {
        "pi": c.pi,
        "rho": c.line.rho,
        "theta_rad": c.line.theta,
        "theta_deg": math.degrees(c.line.theta),
        "sigma": c.sigma,
        "width": c.width,
    }


def normalize_image(img: np.ndarray) -> NormalizedImage:
    """Divide the image by its total gray mass so it sums to 1."""
    img = np.asarray(img, dtype=float)
    total = float(img.sum())
    if not total > 0:
        raise EmptyImageError("empty-image: no positive gray mass")
    return NormalizedImage(h=img / total, n_v=total)


def _log_densities(X, Y, components) -> tuple[np.ndarray, np.ndarray]:
    """Log of the domain-normalized densities, shape (M, H, W), and log-volumes."""
    logg = np.empty((len(components),) + X.shape)
    logv = np.empty(len(components))
    for m, c in enumerate(components):
        lu = log_lagd_unnormalized(X, Y, c)
        mx = lu.max()
        logv[m] = mx + math.log(np.exp(lu - mx).sum())
        logg[m] = lu - logv[m]
    return logg, logv


def e_step(h: NormalizedImage, state: MixtureState) -> np.ndarray:
    """Posterior responsibilities z of shape (M, H, W); rows sum to 1."""
    X, Y = h.domain.grids()
    logg, _ = _log_densities(X, Y, state.components)
    z, _ = _responsibilities(logg, state.components)
    return z


def _responsibilities(logg, components) -> tuple[np.ndarray, int]:
    logpi = np.array([math.log(c.pi) for c in components])
    a = logg + logpi[:, None, None]
    amax = a.max(axis=0)
    bad = ~np.isfinite(amax)
    n_bad = int(bad.sum())
    if n_bad:
        a = np.where(bad[None], 0.0, a)
        amax = np.where(bad, 0.0, amax)
    ez = np.exp(a - amax[None])
    # Summing sorted values keeps responsibilities bitwise invariant under
    # component relabeling.
    z = ez / np.sort(ez, axis=0).sum(axis=0)[None]
    return z, n_bad


def init_params(
    h: NormalizedImage,
    theta0,
    pi0,
    rho0=None,
) -> MixtureState:
    """Initial mixture state from starting angles and proportions.

    rho and sigma are seeded from the gray-mass centroid and spread of the
    projection onto each starting normal; an explicit ``rho0`` (one value per
    component, None entries filled in) overrides the centroid.
    """
    theta0 = list(theta0)
    pi0 = list(pi0)
    if len(theta0) == 0 or len(theta0) != len(pi0):
        raise ValueError("theta0 and pi0 must be non-empty and equal length")
    if abs(sum(pi0) - 1.0) > 1e-9:
        raise ValueError("initial proportions must sum to 1")
    X, Y = h.domain.grids()
    comps = []
    for m, (th, p) in enumerate(zip(theta0, pi0)):
        proj = X * math.cos(th) + Y * math.sin(th)
        rho = float((h.h * proj).sum())
        if rho0 is not None and rho0[m] is not None:
            rho = float(rho0[m])
        sig = math.sqrt(float((h.h * (proj - rho) ** 2).sum()))
        comps.append(ComponentParams(LineParams(rho, th), max(sig, SIGMA_FLOOR), p))
    return MixtureState(components=tuple(comps))


def m_step_pi(h: NormalizedImage, z: np.ndarray) -> np.ndarray:
    """New proportions, the responsibility-weighted share of gray mass."""
    return np.einsum("mij,ij->m", z, h.h)


def m_step_rho(h: NormalizedImage, z_m: np.ndarray, theta_m: float, pi_m: float) -> float:
    """Responsibility-weighted centroid of the projection onto the normal."""
    if pi_m < PI_FLOOR:
        raise LagmixError("collapsed-component")
    X, Y = h.domain.grids()
    proj = X * math.cos(theta_m) + Y * math.sin(theta_m)
    return float((z_m * h.h * proj).sum() / pi_m)


def m_step_sigma(
    h: NormalizedImage, z_m: np.ndarray, theta_m: float, rho_m: float, pi_m: float
) -> tuple[float, bool]:
    """Weighted RMS signed distance to the line; returns (sigma, clamped)."""
    if pi_m < PI_FLOOR:
        raise LagmixError("collapsed-component")
    X, Y = h.domain.grids()
    d = X * math.cos(theta_m) + Y * math.sin(theta_m) - rho_m
    s2 = float((z_m * h.h * d * d).sum() / pi_m)
    sig = math.sqrt(max(s2, 0.0))
    if sig < SIGMA_FLOOR:
        return SIGMA_FLOOR, True
    return sig, False


def compute_moments(h: NormalizedImage, z_m: np.ndarray) -> MomentSet:
    """The five weighted sums feeding the quartic coefficients."""
    X, Y = h.domain.grids()
    w = z_m * h.h
    return MomentSet(
        m_x=float((w * X).sum()),
        m_y=float((w * Y).sum()),
        m_xy=float((w * X * Y).sum()),
        m_x2=float((w * X * X).sum()),
        m_y2=float((w * Y * Y).sum()),
    )


def quartic_coeffs(mom: MomentSet, rho: float) -> QuarticCoeffs:
    """Coefficients of the angle-update polynomial in u = tan(theta)."""
    r2 = rho * rho
    dxy = mom.m_x2 - mom.m_y2
    return QuarticCoeffs(
        a=mom.m_xy**2 - r2 * mom.m_x**2,
        b=2.0 * mom.m_xy * dxy + 2.0 * r2 * mom.m_x * mom.m_y,
        c=dxy**2 - 2.0 * mom.m_xy**2 - r2 * (mom.m_x**2 + mom.m_y**2),
        d=2.0 * r2 * mom.m_x * mom.m_y - 2.0 * mom.m_xy * dxy,
        e=mom.m_xy**2 - r2 * mom.m_y**2,
    )


def _sigma_sq_from_moments(mom: MomentSet, rho: float, s: float, theta: float) -> float:
    c, sn = math.cos(theta), math.sin(theta)
    s2 = (
        c * c * mom.m_x2
        + sn * sn * mom.m_y2
        + 2.0 * c * sn * mom.m_xy
        - 2.0 * rho * (c * mom.m_x + sn * mom.m_y)
    ) / s + rho * rho
    return max(s2, 0.0)


def theta_residual(mom: MomentSet, rho: float, theta: float) -> float:
    """Stationarity residual of the angle equation (zero at a stationary angle)."""
    c, sn = math.cos(theta), math.sin(theta)
    return (
        sn * c * (mom.m_y2 - mom.m_x2)
        + (c * c - sn * sn) * mom.m_xy
        + rho * (sn * mom.m_x - c * mom.m_y)
    )


def _moment_scale(mom: MomentSet, rho: float) -> float:
    return max(
        abs(mom.m_x2),
        abs(mom.m_y2),
        abs(mom.m_xy),
        abs(rho * mom.m_x),
        abs(rho * mom.m_y),
        1e-300,
    )


def candidate_q(s: float, sigma: float, s2: float, log_v: float) -> float:
    """Partial expected log-likelihood of one component, up to shared terms.

    ``s`` is the component's gray mass, ``s2`` the weighted squared distance
    sum, ``log_v`` the (held-fixed) log volume normalizer.  The log(pi) term
    is shared across candidates and omitted.
    """
    return -s * (log_v + math.log(SQRT_2PI * sigma)) - s2 / (2.0 * sigma * sigma)


def theta_candidates(mom: MomentSet, rho: float, theta_prev: float) -> tuple[list[float], Counter]:
    """Candidate angles from the quartic's real roots.

    u = tan(theta) identifies theta with theta + pi, but with rho held fixed
    those are different lines; the quartic depends on rho only through its
    square, so each root covers both branches and both are candidates.  Roots
    failing the stationarity residual are dropped when any root passes it.
    """
    flags: Counter = Counter()
    try:
        roots = solve_real_roots(quartic_coeffs(mom, rho))
    except DegeneratePolynomialError:
        roots = []
    if not roots:
        flags["theta-stationary-fallback"] += 1
        return [theta_prev], flags

    scale = _moment_scale(mom, rho)
    branches = [th for u in roots for th in (math.atan(u), math.atan(u) + math.pi)]
    passing = [
        th for th in branches if abs(theta_residual(mom, rho, th)) <= RES_TOL * scale
    ]
    if passing:
        cands = passing
    else:
        cands = branches
        flags["theta-residual-high"] += 1
    if all(abs(u) > U_VERTICAL for u in roots):
        cands.extend([math.pi / 2, -math.pi / 2])
        flags["theta-vertical-candidate"] += 1
    return cands, flags


def sigma_candidate(
    mom: MomentSet, rho: float, s: float, theta: float, sigma_prev: float | None
) -> tuple[float, Counter]:
    """Closed-form scale for one candidate angle, floored and stabilized.

    A non-positive second moment (possible only for signed inputs) keeps
    ``sigma_prev`` when given, so a noise fluctuation cannot collapse a
    component into a needle.
    """
    flags: Counter = Counter()
    raw = _sigma_sq_from_moments(mom, rho, s, theta)
    if raw <= 0.0 and sigma_prev is not None:
        flags["sigma-degenerate-hold"] += 1
        return sigma_prev, flags
    if raw < SIGMA_FLOOR**2:
        flags["sigma-clamped"] += 1
        return SIGMA_FLOOR, flags
    return math.sqrt(raw), flags


def m_step_theta(
    mom: MomentSet,
    rho: float,
    s: float,
    theta_prev: float,
    log_v: float,
    sigma_prev: float | None = None,
) -> tuple[float, float, Counter]:
    """Angle and scale chosen among quartic roots by partial-Q maximization.

    Returns (theta, sigma, flags).  The volume normalizer is held at
    ``log_v`` for all candidates, matching how the closed forms are derived;
    with no usable real root the previous angle is kept and sigma
    re-estimated for it.
    """
    cand_thetas, flags = theta_candidates(mom, rho, theta_prev)
    best = None
    for th in cand_thetas:
        sig, fl = sigma_candidate(mom, rho, s, th, sigma_prev)
        s2 = max(_sigma_sq_from_moments(mom, rho, s, th), 0.0) * s
        q = candidate_q(s, sig, s2, log_v)
        key = (q, -abs(th))
        if best is None or key > best[0]:
            best = (key, th, sig, fl)
    _, theta, sigma, fl = best
    flags += fl
    return theta, sigma, flags


def q_function(h: NormalizedImage, z: np.ndarray, state: MixtureState) -> float:
    """Expected complete-data log-likelihood with exact volume normalizers."""
    X, Y = h.domain.grids()
    logg, _ = _log_densities(X, Y, state.components)
    logpi = np.array([math.log(c.pi) for c in state.components])
    per_comp = np.einsum("mij,ij->m", z * (logg + logpi[:, None, None]), h.h)
    # Order-insensitive sum across components (permutation equivariance).
    q = h.n_v * float(np.sort(per_comp).sum())
    if not math.isfinite(q):
        raise NumericError("non-finite Q value")
    return q


def em_objective(h: NormalizedImage, z: np.ndarray, state: MixtureState) -> float:
    """Q plus the responsibility entropy: the lower bound EM ascends.

    Alternating the E-step (which maximizes this bound over z) and an M-step
    that never lowers any component's contribution makes the sequence
    non-decreasing; Q alone can dip when the refreshed responsibilities gain
    entropy.  The entropy term is parameter-free, so gradients of Q and of
    this objective with respect to the parameters coincide.
    """
    q = q_function(h, z, state)
    ent = -np.where(z > 0.0, z * np.log(np.where(z > 0.0, z, 1.0)), 0.0)
    return q + h.n_v * float((np.sort(ent, axis=0).sum(axis=0) * h.h).sum())


def q_gradients(h: NormalizedImage, z: np.ndarray, state: MixtureState):
    """Analytic dQ/drho and dQ/dsigma per component, volume terms included."""
    X, Y = h.domain.grids()
    out = []
    for m, c in enumerate(state.components):
        d = c.line.signed_distance(X, Y)
        g = np.exp(-(d * d) / (2.0 * c.sigma**2))
        v, vd, vd2 = float(g.sum()), float((g * d).sum()), float((g * d * d).sum())
        w = z[m] * h.h
        s = float(w.sum())
        wd = float((w * d).sum())
        wd2 = float((w * d * d).sum())
        dq_rho = h.n_v * (wd / c.sigma**2 - s * vd / (c.sigma**2 * v))
        dq_sig = h.n_v * (wd2 / c.sigma**3 - s * vd2 / (c.sigma**3 * v))
        out.append((dq_rho, dq_sig))
    return out


def _contribution(w, s, X, Y, rho, theta, sigma) -> float:
    """This component's exact share of Q (up to the shared log-pi term)."""
    d = X * math.cos(theta) + Y * math.sin(theta) - rho
    lu = -(d * d) / (2.0 * sigma * sigma) - math.log(SQRT_2PI * sigma)
    mx = lu.max()
    logv = mx + math.log(np.exp(lu - mx).sum())
    return float((w * lu).sum()) - s * logv


def _iterate(
    h: NormalizedImage, components, X, Y, force_release: bool = False
) -> tuple[np.ndarray, tuple, Counter]:
    """One full E+M pass; returns (responsibilities, new components, flags).

    The closed-form updates hold the volume normalizer fixed, which is only
    accurate near the previous line.  Candidates are therefore re-scored with
    their exact normalizers, and the previous parameters stay in the running,
    so an update can never lower the component's own Q contribution.

    With ``force_release`` the hold is suspended and the best closed-form
    candidate is accepted even when it scores marginally worse.  The driver
    uses this to probe would-be fixed points: a state where every update is
    held can be a fixed point of the guarded iteration without being a
    stationary point of the objective (symmetric configurations where all
    candidate moves look slightly worse under their exact normalizers).
    """
    flags: Counter = Counter()
    logg, _ = _log_densities(X, Y, components)
    z, n_under = _responsibilities(logg, components)
    if n_under:
        flags["underflow-uniform-pixels"] += n_under

    hh = h.h
    new_comps = []
    for m, comp in enumerate(components):
        w = z[m] * hh
        s = float(w.sum())
        if s < PI_FLOOR:
            flags["collapsed-component"] += 1
            new_comps.append(comp)
            continue
        th_old = comp.line.theta
        proj = X * math.cos(th_old) + Y * math.sin(th_old)
        rho = float((w * proj).sum() / s)
        mom = MomentSet(
            m_x=float((w * X).sum()),
            m_y=float((w * Y).sum()),
            m_xy=float((w * X * Y).sum()),
            m_x2=float((w * X * X).sum()),
            m_y2=float((w * Y * Y).sum()),
        )
        cand_thetas, fl = theta_candidates(mom, rho, th_old)
        flags += fl
        best = None
        for th in cand_thetas:
            sig, sfl = sigma_candidate(mom, rho, s, th, comp.sigma)
            q = _contribution(w, s, X, Y, rho, th, sig)
            key = (q, -abs(th))
            if best is None or key > best[0]:
                best = (key, rho, th, sig, sfl)
        q_prev = _contribution(
            w, s, X, Y, comp.line.rho, comp.line.theta, comp.sigma
        )
        s = min(s, 1.0)  # guard against roundoff above a full unit of mass
        if q_prev > best[0][0] and not force_release:
            flags["m-step-hold"] += 1
            new_comps.append(ComponentParams(comp.line, comp.sigma, s))
        else:
            if q_prev > best[0][0]:
                flags["m-step-release"] += 1
            _, rho_b, th_b, sig_b, sfl = best
            flags += sfl
            new_comps.append(ComponentParams(LineParams(rho_b, th_b), sig_b, s))
    return z, tuple(new_comps), flags


def canonical_components(comps: tuple) -> tuple:
    """The same components with every line in its canonical representation."""
    return tuple(ComponentParams(c.line.canonical(), c.sigma, c.pi) for c in comps)


def param_delta(a: tuple, b: tuple) -> float:
    """Largest absolute change in any parameter between two component tuples."""
    delta = 0.0
    for ca, cb in zip(a, b):
        delta = max(
            delta,
            abs(ca.pi - cb.pi),
            abs(ca.line.rho - cb.line.rho),
            abs(ca.line.theta - cb.line.theta),
            abs(ca.sigma - cb.sigma),
        )
    return delta


#: Safeguard stop for data without an ascent guarantee (signed intensities):
#: iteration halts once no parameter moves by more than this.
PARAM_DELTA_TOL = 1e-9

#: Maximum number of released (unguarded) iterations spent probing a stalled
#: state before rolling back and accepting it as converged.
PROBE_BUDGET = 100

#: This many consecutive iterations with at least one held update count as a
#: stall even before the Q delta falls under ``eps`` (the proportions can keep
#: drifting slowly while every line is frozen).
HOLD_STREAK_LIMIT = 8


def run_em(
    h: NormalizedImage,
    init: MixtureState,
    eps: float = 1e-6,
    max_iter: int = 1000,
) -> tuple[MixtureState, DetectionReport]:
    """Fixed-data EM until the normalized Q delta falls below ``eps``.

    A stall while updates are being held can be a fixed point of the guarded
    iteration that is not a stationary point of the objective (symmetric
    configurations where every closed-form candidate scores marginally worse
    under its exact normalizer).  Such states are probed off the record with
    the hold released: the run resumes only from a probe state that strictly
    improves on the stalled one, otherwise the probe is rolled back and the
    stall accepted as converged.  ``q_history`` therefore records only the
    accepted trajectory; probe work is counted in the ``probe-iterations``
    flag.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    X, Y = h.domain.grids()
    t0 = time.perf_counter()
    state = init
    flags: Counter = Counter()
    history: list[float] = []
    converged = False
    dq_raw = dq_norm = math.nan
    best_q = -math.inf
    best_state = init
    hold_streak = 0
    it = 0
    while it < max_iter:
        prev_comps = state.components
        z, comps, fl = _iterate(h, state.components, X, Y)
        it += 1
        flags += fl
        state = MixtureState(comps, iteration=it)
        q = em_objective(h, z, state)
        history.append(q)
        if q > best_q:
            best_q = q
            best_state = state
        held = bool(fl.get("m-step-hold", 0))
        hold_streak = hold_streak + 1 if held else 0
        if len(history) < 2:
            continue
        dq_raw = abs(history[-1] - history[-2])
        dq_norm = dq_raw / h.n_v
        dq_stop = dq_norm < eps
        pd_stop = param_delta(prev_comps, comps) < PARAM_DELTA_TOL
        if not (dq_stop or pd_stop or hold_streak >= HOLD_STREAK_LIMIT):
            continue
        if not held:
            converged = True
            if pd_stop and not dq_stop:
                flags["param-delta-stop"] += 1
            break
        # Stalled with held updates: probe with the hold released.
        anchor_state = state
        anchor_q = q
        flags["release-probe"] += 1
        pstate = state
        pq = -math.inf
        escaped = False
        budget = min(PROBE_BUDGET, max_iter - it)
        for _ in range(budget):
            prev_p = pstate.components
            pz, pcomps, pfl = _iterate(
                h, pstate.components, X, Y, force_release=True
            )
            it += 1
            flags["probe-iterations"] += 1
            pstate = MixtureState(pcomps, iteration=it)
            pq = em_objective(h, pz, pstate)
            if pq > anchor_q + eps * h.n_v:
                escaped = True
                break
            if param_delta(prev_p, pcomps) < PARAM_DELTA_TOL:
                break
        if escaped:
            flags["release-probe-escaped"] += 1
            state = pstate
            history.append(pq)
            if pq > best_q:
                best_q = pq
                best_state = pstate
            hold_streak = 0
        else:
            flags["release-probe-discarded"] += 1
            state = anchor_state
            converged = True
            break
    if not converged:
        flags["not-converged"] += 1
    # EM's ascent guarantee only holds for nonnegative gray mass.  On signed
    # inputs the Q sequence can degrade; return the best iterate visited when
    # the loss exceeds the convergence resolution.
    final_q = history[-1]
    if best_q > final_q + eps * h.n_v:
        state = best_state
        final_q = best_q
        flags["best-q-rollback"] += 1
    state = MixtureState(
        canonical_components(state.components), state.iteration, final_q, tuple(history)
    )
    report = DetectionReport(
        components=[_component_dict(c) for c in state.components],
        iterations=state.iteration,
        converged=converged,
        runtime_s=time.perf_counter() - t0,
        q_history=history,
        flags=dict(flags),
        n_v=h.n_v,
        delta_q_raw=dq_raw,
        delta_q_norm=dq_norm,
    )
    return state, report
