"""Real-root extraction for the degree-4 polynomial of the angle update.

The polynomial a*u^4 + b*u^3 + c*u^2 + d*u + e is solved through the
eigenvalues of its companion matrix, after demoting near-zero leading
coefficients so a numerically degenerate quartic is treated as the cubic,
quadratic or linear equation it actually is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LagmixError

#: A root is accepted as real when |imag| < TOL_IMAG * (1 + |real|).
TOL_IMAG = 1e-9
#: Roots closer than TOL_DUP * (1 + |root|) are merged.
TOL_DUP = 1e-7
#: Leading coefficients below this fraction of the largest coefficient are
#: treated as zero.
TOL_LEAD = 1e-12
#: Eigenvalues this close to the real axis are polished and kept if the
#: residual vanishes; multiple real roots surface as conjugate pairs with
#: imaginary parts around sqrt(machine epsilon).
TOL_NEAR_REAL = 1e-4
#: Relative residual bound for accepting a polished near-real root.
TOL_RESIDUAL = 1e-10


class DegeneratePolynomialError(LagmixError):
    """All coefficients are (numerically) zero; no root information."""


@dataclass(frozen=True)
class QuarticCoeffs:
    a: float
    b: float
    c: float
    d: float
    e: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.e], dtype=float)

    def evaluate(self, u):
        return np.polyval(self.as_array(), u)


def _companion_eigenvalues(coeffs: np.ndarray) -> np.ndarray:
    """Roots of a polynomial (highest degree first) via its companion matrix."""
    monic = coeffs[1:] / coeffs[0]
    n = monic.size
    comp = np.zeros((n, n))
    comp[1:, :-1] = np.eye(n - 1)
    comp[0, :] = -monic
    return np.linalg.eigvals(comp)


def solve_real_roots(q: QuarticCoeffs) -> list[float]:
    """All real roots of the quartic, deduplicated and sorted ascending."""
    coeffs = q.as_array()
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("coefficients must be finite")
    scale = np.max(np.abs(coeffs))
    if scale == 0.0:
        raise DegeneratePolynomialError("all-zero polynomial")

    # Demote spurious quartics (e.g. a ~ 0 from cancellation) before solving.
    nz = np.abs(coeffs) > TOL_LEAD * scale
    first = int(np.argmax(nz))
    coeffs = coeffs[first:]
    if coeffs.size == 1:
        return []  # nonzero constant, no roots

    roots = _companion_eigenvalues(coeffs)
    scale = np.max(np.abs(coeffs))
    deriv = np.polyder(coeffs)

    real_roots = []
    for z in roots:
        if abs(z.imag) < TOL_IMAG * (1.0 + abs(z.real)):
            real_roots.append(float(z.real))
        elif abs(z.imag) < TOL_NEAR_REAL * (1.0 + abs(z.real)):
            u = float(z.real)
            for _ in range(3):
                dp = np.polyval(deriv, u)
                if dp == 0.0:
                    break
                u -= np.polyval(coeffs, u) / dp
            bound = TOL_RESIDUAL * scale * (1.0 + abs(u)) ** (coeffs.size - 1)
            if abs(np.polyval(coeffs, u)) <= bound:
                real_roots.append(u)
    real_roots.sort()

    deduped: list[float] = []
    for r in real_roots:
        if deduped and abs(r - deduped[-1]) <= TOL_DUP * (1.0 + abs(r)):
            continue
        deduped.append(r)
    return deduped
