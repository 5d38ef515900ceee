"""Semi-infinite energy quadrature and Fermi-Dirac special functions.

Every moment, flux and production integral in the package reduces to a 1D
integral over energy on [lower, +inf).  This module wraps adaptive
Gauss-Kronrod quadrature (QUADPACK) behind a tolerance spec, adds the
domain splitting needed for degenerate (sharp Fermi edge) integrands, and
provides overflow-safe Fermi factors built from logistic sigmoids, so that
raw exp() is never evaluated on large arguments.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

from scipy import integrate
from scipy.special import expit, gammaln

from .constants import KB
from .errors import DomainError, QuadratureConvergenceError

__all__ = [
    "QuadratureSpec",
    "DEFAULT_SPEC",
    "IntegralResult",
    "integrate_semi_infinite",
    "fermi_integral",
    "bose_occupation",
    "fermi_occupancy",
    "fermi_blocking",
    "fermi_window",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and limits for the semi-infinite integrals.

    rel_tol / abs_tol bound the accepted error estimate; max_subdivisions
    caps adaptive refinement per segment; truncation_margin is how many
    decay lengths past the Fermi window a finite-segment split may extend.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 200
    truncation_margin: float = 30.0

    def __post_init__(self):
        if not self.rel_tol > 0.0:
            raise DomainError("rel_tol must be positive")
        if self.max_subdivisions < 8:
            raise DomainError("max_subdivisions must be at least 8")


DEFAULT_SPEC = QuadratureSpec()


class IntegralResult(NamedTuple):
    value: float
    error: float


def integrate_semi_infinite(
    f: Callable[[float], float],
    lower: float = 0.0,
    spec: QuadratureSpec = DEFAULT_SPEC,
    breakpoints: Sequence[float] = (),
) -> IntegralResult:
    """Integrate f over [lower, +inf) to the spec tolerances.

    `breakpoints` are interior abscissae (e.g. a Fermi edge) where the
    integrand has a localized feature; the domain is split there before
    adaptive refinement so narrow spikes are never missed.  Returns the
    value together with the accumulated error estimate; raises
    QuadratureConvergenceError (carrying the partial result) if the
    estimate cannot be brought below tolerance.
    """
    pts = sorted(p for p in breakpoints if p > lower and math.isfinite(p))
    edges = [lower, *pts, math.inf]

    total = 0.0
    err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            out = integrate.quad(
                f, a, b,
                epsabs=spec.abs_tol,
                epsrel=spec.rel_tol,
                limit=spec.max_subdivisions,
                full_output=1,
            )
            total += out[0]
            err += out[1]
            failed = len(out) > 3  # QUADPACK appended a non-convergence message
            if failed and out[1] > 10.0 * max(spec.abs_tol, spec.rel_tol * abs(total)):
                raise QuadratureConvergenceError(
                    f"quadrature did not converge on [{a}, {b}]: {out[3]}",
                    value=total, error=err,
                )
    # a total below its own accumulated error bound is indistinguishable
    # from zero (pointwise-cancelling integrand); callers supply an abs_tol
    # floor when such results are expected
    if (abs(total) > err
            and err > 100.0 * max(spec.abs_tol, spec.rel_tol * abs(total))):
        raise QuadratureConvergenceError(
            "accumulated quadrature error estimate above tolerance",
            value=total, error=err,
        )
    return IntegralResult(total, err)


# ---------------------------------------------------------------------------
# Overflow-safe Fermi factors.  expit(x) = 1/(1+e^-x) saturates gracefully,
# so none of these ever evaluate a raw exponential of a large argument.
# ---------------------------------------------------------------------------

def fermi_occupancy(xi):
    """w = 1/(e^xi + 1)."""
    return expit(-xi)


def fermi_blocking(xi):
    """1 - w = e^xi/(e^xi + 1)."""
    return expit(xi)


def fermi_window(xi):
    """e^xi/(e^xi+1)^2 = w(1-w): the sharply peaked Fermi-edge factor."""
    return expit(xi) * expit(-xi)


def bose_occupation(hbar_omega: float, T_L: float) -> float:
    """Bose-Einstein occupation 1/(e^{hbar_omega/kB T_L} - 1).

    hbar_omega in J (> 0), T_L in K (> 0).  The elastic hbar_omega -> 0
    limit is handled by the collision module, not here.
    """
    if not hbar_omega > 0.0:
        raise DomainError("bose_occupation requires hbar_omega > 0")
    if not T_L > 0.0:
        raise DomainError("bose_occupation requires T_L > 0")
    return 1.0 / math.expm1(hbar_omega / (KB * T_L))


def fermi_integral(k: float, eta: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Complete Fermi-Dirac integral F_k(eta), k > -1.

    F_k(eta) = 1/Gamma(k+1) * int_0^inf chi^k / (1 + e^(chi - eta)) dchi.

    Strictly increasing in eta, with F_k -> e^eta as eta -> -inf and
    F_k -> eta^(k+1)/Gamma(k+2) as eta -> +inf.
    """
    if k <= -1.0:
        raise DomainError("fermi_integral requires order k > -1")
    if not math.isfinite(eta):
        raise DomainError("fermi_integral requires finite eta")
    if eta < -700.0:
        return math.exp(eta)  # underflow-safe Maxwell-Boltzmann tail

    norm = math.exp(-gammaln(k + 1.0))
    breaks = (eta,) if eta > 0.0 else ()
    val, _ = integrate_semi_infinite(
        lambda chi: (chi ** k) * expit(eta - chi) if chi > 0.0 else 0.0,
        0.0, spec, breakpoints=breaks,
    )
    return norm * val
