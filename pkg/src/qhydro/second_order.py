"""hbar^2-order corrections to the maximum-entropy closure.

The second-order occupation splits into a local part driven by the
second-order multiplier combination xi2 = eta0^(2) + eta1^(2) eps + eta2^(2).v
and a gradient part Psi built from first and second spatial derivatives of
the zeroth-order multipliers:

    w2 = -e^xi0/(e^xi0+1)^2 * (xi2_local)  +  Psi(eta^(0), grad eta^(0)).

With spatial variation restricted to one axis (taken as component 0 of
both x and p space), all x-p mixed derivatives of xi0 follow analytically
from the band model and Psi reduces, for each energy, to a quadratic form
in the direction cosine n1:  Psi = a(eps) + b(eps) n1^2.  Its density and
energy moments then collapse to 1D energy integrals through <n1^2> = 1/d,
and its velocity moment vanishes exactly by parity (Psi is even in p while
v is odd), so the momentum right-hand side is a structural zero here.

The moments of w2 give a linear system for the second-order multipliers
whose 2x2 block is the same matrix as the zeroth-order constraint Jacobian
(same integrals, opposite sign convention) and whose drift block is the
positive scalar coefficient of the zeroth-order momentum constraint.

Scaling convention: second-order moments and multipliers are stored
"hbar^2-inclusive" (they already carry the physical hbar^2 and the
dimensionless hbar_scale^2 of the model), so zeroth- and second-order
quantities share units and add directly.  psi_moments applies the factor
(hbar * hbar_scale)^2 itself; w2_pointwise is the raw pointwise formula
and applies no scaling.
"""

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .closure import (Multipliers, MomentVector, Order, band_integral,
                      j_coefficient, jacobian_2x2)
from .constants import HBAR
from .errors import ConditioningError, DomainError, GridAccuracyWarning
from .quadrature import DEFAULT_SPEC, fermi_window

__all__ = [
    "Boundary", "MultiplierField1D", "SecondOrderRHS", "Xi0Jet",
    "w2_pointwise", "psi_moments", "psi_gradv_scalars",
    "invert_second_order", "second_order_moments",
]


class Boundary(enum.Enum):
    PERIODIC = "periodic"
    ONE_SIDED = "one-sided"


@dataclass
class SecondOrderRHS:
    """Moments of the gradient part Psi against weights (1, eps, v)."""

    psi_n: float
    psi_W: float
    psi_J: np.ndarray

    def __post_init__(self):
        self.psi_J = np.atleast_1d(np.asarray(self.psi_J, dtype=float))

    @classmethod
    def zero(cls, dim):
        return cls(0.0, 0.0, np.zeros(dim))


@dataclass
class Xi0Jet:
    """Value and x-derivatives of the multiplier fields at one point.

    eta1 and its derivatives are in the dimensionless (kB*T_ref) scaling;
    d1_* are 1/m, d2_* are 1/m^2.  All p-derivatives of xi0 are formed
    analytically from the band model, never by finite differences in p.
    """

    eta0: float
    eta1: float
    d1_eta0: float = 0.0
    d1_eta1: float = 0.0
    d2_eta0: float = 0.0
    d2_eta1: float = 0.0


@dataclass
class MultiplierField1D:
    """Zeroth-order multiplier fields sampled on a uniform 1D grid."""

    x: np.ndarray
    eta0: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray                      # shape (N, d)
    boundary: Boundary = Boundary.ONE_SIDED

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.eta0 = np.asarray(self.eta0, dtype=float)
        self.eta1 = np.asarray(self.eta1, dtype=float)
        self.eta2 = np.atleast_2d(np.asarray(self.eta2, dtype=float))
        n = self.x.size
        if n < 5:
            raise DomainError("grid needs at least 5 points (stencil width)")
        if self.eta0.size != n or self.eta1.size != n or self.eta2.shape[0] != n:
            raise DomainError("field arrays must match the grid length")
        h = np.diff(self.x)
        if np.any(h <= 0.0):
            raise DomainError("grid must be strictly increasing")
        if np.max(np.abs(h - h[0])) > 1e-12 * abs(h[0]):
            raise DomainError("grid must be uniform to 1e-12")

    @property
    def spacing(self):
        return float(self.x[1] - self.x[0])

    @classmethod
    def from_csv(cls, path, boundary=Boundary.ONE_SIDED):
        """Load columns x, eta0, eta1, eta2_* from a CSV file ('#' comments)."""
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        if data.shape[1] < 4:
            raise DomainError("field CSV needs columns x, eta0, eta1, eta2_...")
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3:], boundary)

    def jet(self, i):
        """Xi0Jet at grid index i via 4th-order finite differences."""
        d1_0, d2_0 = _fd_derivs(self.eta0, self.spacing, i, self.boundary)
        d1_1, d2_1 = _fd_derivs(self.eta1, self.spacing, i, self.boundary)
        return Xi0Jet(float(self.eta0[i]), float(self.eta1[i]), d1_0, d1_1, d2_0, d2_1)


# ---------------------------------------------------------------------------
# finite-difference stencils (5-point: 4th-order interior, one-sided edges)
# ---------------------------------------------------------------------------

# integer numerators with a single division by 12h (resp. 12h^2): constant
# and linear fields then differentiate to exact floating-point zeros
_C1_CENTER = np.array([1.0, -8.0, 0.0, 8.0, -1.0])                 # offsets -2..2
_C2_CENTER = np.array([-1.0, 16.0, -30.0, 16.0, -1.0])
_C1_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0])             # offsets 0..4
_C2_EDGE0 = np.array([35.0, -104.0, 114.0, -56.0, 11.0])
_C1_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0])               # offsets -1..3
_C2_EDGE1 = np.array([11.0, -20.0, 6.0, 4.0, -1.0])


def _stencil(f, i, boundary):
    n = f.size
    if boundary is Boundary.PERIODIC:
        vals = f[(np.arange(-2, 3) + i) % n]
        return vals, _C1_CENTER, _C2_CENTER
    if 2 <= i <= n - 3:
        return f[i - 2:i + 3], _C1_CENTER, _C2_CENTER
    if i == 0:
        return f[0:5], _C1_EDGE0, _C2_EDGE0
    if i == 1:
        return f[0:5], _C1_EDGE1, _C2_EDGE1
    if i == n - 1:
        return f[n - 5:n][::-1], -_C1_EDGE0, _C2_EDGE0
    return f[n - 5:n][::-1], -_C1_EDGE1, _C2_EDGE1  # i == n - 2


def _fd_derivs(f, h, i, boundary):
    vals, c1, c2 = _stencil(f, i, boundary)
    return float(c1 @ vals) / (12.0 * h), float(c2 @ vals) / (12.0 * h ** 2)


def _fd_error_estimate(f, h, i, boundary):
    """Relative disagreement between the 5-point and 3-point second derivative."""
    n = f.size
    if boundary is Boundary.PERIODIC:
        lo, mid, hi = f[(i - 1) % n], f[i], f[(i + 1) % n]
    else:
        j = min(max(i, 1), n - 2)
        lo, mid, hi = f[j - 1], f[j], f[j + 1]
    d2_low = (lo - 2.0 * mid + hi) / h ** 2
    d2 = _fd_derivs(f, h, i, boundary)[1]
    num = abs(d2 - d2_low)
    vals = _stencil(f, i, boundary)[0]
    roundoff = 1e-10 * float(np.max(np.abs(vals)) + 1e-300) / h ** 2
    if num <= roundoff:
        return 0.0
    return num / max(abs(d2), abs(d2_low), roundoff)


# ---------------------------------------------------------------------------
# the pointwise second-order occupation
# ---------------------------------------------------------------------------

def _t1(xi):
    """e^xi (1-e^xi) / (8 (e^xi+1)^3), evaluated without large exponentials."""
    return -math.tanh(0.5 * xi) * fermi_window(xi) / 8.0


def _t2(xi):
    """e^xi (e^(2xi) - 4 e^xi + 1) / (24 (e^xi+1)^4), overflow-safe."""
    if abs(xi) > 500.0:
        return math.exp(-abs(xi)) / 24.0
    s = fermi_window(xi)
    return s * s * (2.0 * math.cosh(xi) - 4.0) / 24.0


def _psi_point(model, jet, eps, d2eps_dp1, v1_sq, xi_prime=None):
    """Psi at fixed energy and fixed angular content (d2eps_dp1, v1^2)."""
    E0 = model.energy_scale
    u = eps / E0
    xi = jet.eta0 + jet.eta1 * u
    eta1_si = jet.eta1 / E0
    d1_eta1_si = jet.d1_eta1 / E0
    xi_x = jet.d1_eta0 + jet.d1_eta1 * u
    xi_xx = jet.d2_eta0 + jet.d2_eta1 * u
    # contracted groups of the w2 bracket for 1D spatial variation
    grp_a = xi_xx * eta1_si * d2eps_dp1 - d1_eta1_si ** 2 * v1_sq
    grp_b = (xi_xx * eta1_si ** 2 * v1_sq
             - 2.0 * d1_eta1_si * eta1_si * v1_sq * xi_x
             + eta1_si * d2eps_dp1 * xi_x ** 2)
    return _t1(xi) * grp_a + _t2(xi) * grp_b


def w2_pointwise(model, jet, xi0_second, p):
    """Raw w2 value at one phase-space point (1D spatial variation, axis 0).

    `jet` supplies xi0^(0) and its x-derivatives; `xi0_second` is the local
    value of xi0^(2).  When every spatial derivative vanishes this reduces
    exactly to -e^xi0/(e^xi0+1)^2 * xi0_second.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    eps = model.energy(p)
    pn = float(np.linalg.norm(p))
    c_r = model.dvdp_radial(eps)
    c_t = model.dvdp_transverse(eps)
    if pn == 0.0:
        n1_sq = 0.0
        v1_sq = 0.0
        d2eps = c_r  # radial and transverse limits coincide at the band bottom
    else:
        n1_sq = (p[0] / pn) ** 2
        v1_sq = model.speed_of_energy(eps) ** 2 * n1_sq
        d2eps = c_r * n1_sq + c_t * (1.0 - n1_sq)
    xi = jet.eta0 + jet.eta1 * eps / model.energy_scale
    local = -fermi_window(xi) * xi0_second
    return local + _psi_point(model, jet, eps, d2eps, v1_sq)


# ---------------------------------------------------------------------------
# moments of the gradient part
# ---------------------------------------------------------------------------

def _ab_factors(model, jet, eps):
    """Coefficients of Psi = a(eps) + b(eps) n1^2 at one energy."""
    E0 = model.energy_scale
    u = eps / E0
    xi = jet.eta0 + jet.eta1 * u
    eta1_si = jet.eta1 / E0
    d1_eta1_si = jet.d1_eta1 / E0
    xi_x = jet.d1_eta0 + jet.d1_eta1 * u
    xi_xx = jet.d2_eta0 + jet.d2_eta1 * u
    c_r = model.dvdp_radial(eps)
    c_t = model.dvdp_transverse(eps)
    v_sq = model.speed_of_energy(eps) ** 2
    t1 = _t1(xi)
    t2 = _t2(xi)
    a = t1 * xi_xx * eta1_si * c_t + t2 * eta1_si * c_t * xi_x ** 2
    b = (t1 * (xi_xx * eta1_si * (c_r - c_t) - d1_eta1_si ** 2 * v_sq)
         + t2 * (xi_xx * eta1_si ** 2 * v_sq
                 - 2.0 * d1_eta1_si * eta1_si * v_sq * xi_x
                 + eta1_si * (c_r - c_t) * xi_x ** 2))
    return a, b


def psi_moments(model, field, x_index, spec=DEFAULT_SPEC, fd_tol=1e-3):
    """Moments of Psi against (1, eps, v) at one grid point, hbar^2-inclusive.

    The velocity moment is an exact zero by parity.  A GridAccuracyWarning
    is attached when the stencil self-estimate exceeds `fd_tol`.
    """
    jet = field.jet(x_index)
    err = max(_fd_error_estimate(field.eta0, field.spacing, x_index, field.boundary),
              _fd_error_estimate(field.eta1, field.spacing, x_index, field.boundary))
    if err > fd_tol and max(abs(jet.d2_eta0), abs(jet.d2_eta1)) > 0.0:
        warnings.warn(f"finite-difference self-estimate {err:.2e} above {fd_tol:.0e}; "
                      "grid may be too coarse", GridAccuracyWarning, stacklevel=2)
    return psi_moments_from_jet(model, jet, spec)


def psi_moments_from_jet(model, jet, spec=DEFAULT_SPEC):
    d = model.dim
    scale = (HBAR * model.hbar_scale) ** 2
    if scale == 0.0:
        return SecondOrderRHS(0.0, 0.0, np.zeros(d))
    y = model.degeneracy_y

    def w_n(eps):
        a, b = _ab_factors(model, jet, eps)
        return a + b / d

    def w_W(eps):
        a, b = _ab_factors(model, jet, eps)
        return (a + b / d) * eps

    val_n, _ = band_integral(model, w_n, jet.eta0, jet.eta1, window=False, spec=spec,
                             unit_stat=True)
    val_W, _ = band_integral(model, w_W, jet.eta0, jet.eta1, window=False, spec=spec,
                             unit_stat=True)
    return SecondOrderRHS(scale * y * val_n, scale * y * val_W, np.zeros(d))


def psi_gradv_scalars(model, jet, spec=DEFAULT_SPEC):
    """Diagonal of y int Psi grad_p v dp (hbar^2-inclusive): (t_par, t_perp).

    t_par is the component along the spatial axis; the d-1 transverse
    components equal t_perp.  Needed for the gradient contribution to the
    second-order mobility.
    """
    d = model.dim
    scale = (HBAR * model.hbar_scale) ** 2
    if scale == 0.0:
        return 0.0, 0.0
    y = model.degeneracy_y
    if d == 3:
        m2, m4, m22 = 1.0 / 3.0, 1.0 / 5.0, 1.0 / 15.0
    else:
        m2, m4, m22 = 1.0 / 2.0, 3.0 / 8.0, 1.0 / 8.0

    def make_weight(par):
        def w(eps):
            a, b = _ab_factors(model, jet, eps)
            c_r = model.dvdp_radial(eps)
            c_t = model.dvdp_transverse(eps)
            iso = a * (c_r * m2 + c_t * (1.0 - m2))
            if par:
                return iso + b * (c_r * m4 + c_t * (m2 - m4))
            return iso + b * (c_r * m22 + c_t * (m2 - m22))
        return w

    t_par, _ = band_integral(model, make_weight(True), jet.eta0, jet.eta1,
                             window=False, spec=spec, unit_stat=True)
    t_perp, _ = band_integral(model, make_weight(False), jet.eta0, jet.eta1,
                              window=False, spec=spec, unit_stat=True)
    return scale * y * t_par, scale * y * t_perp


# ---------------------------------------------------------------------------
# linear solve for the second-order multipliers
# ---------------------------------------------------------------------------

def invert_second_order(model, mult0, target2, rhs=None, spec=DEFAULT_SPEC):
    """Solve the linear constraint system for (eta0^(2), eta1^(2), eta2^(2)).

    The 2x2 block shares its matrix with the zeroth-order constraint
    Jacobian; the drift block is the (positive) scalar of the zeroth-order
    momentum constraint.  `rhs` carries the Psi moments (zero in the
    homogeneous case).
    """
    if mult0.order is not Order.ZEROTH:
        raise DomainError("invert_second_order needs converged zeroth-order multipliers")
    if target2.order is not Order.SECOND:
        raise DomainError("target2 must be a second-order moment vector")
    d = model.dim
    if rhs is None:
        rhs = SecondOrderRHS.zero(d)
    E0 = model.energy_scale
    mat = -jacobian_2x2(model, mult0, spec)  # = [[I0, I1], [I1, I2]], SPD
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] ** 2
    if not np.all(np.isfinite(mat)) or det <= 1e-14 * mat[0, 0] * mat[1, 1]:
        raise ConditioningError("second-order 2x2 system is numerically singular")
    b = np.array([-target2.n + rhs.psi_n, (-target2.W + rhs.psi_W) / E0])
    eta0_2, eta1_2 = np.linalg.solve(mat, b)
    kappa, _ = j_coefficient(model, mult0, spec)
    if kappa <= 0.0:
        raise ConditioningError("drift coefficient vanished")
    eta2_2 = (-np.asarray(target2.J, dtype=float) + rhs.psi_J) / kappa
    return Multipliers(float(eta0_2), float(eta1_2), eta2_2, Order.SECOND)


def second_order_moments(model, mult0, mult2, rhs=None, spec=DEFAULT_SPEC):
    """Forward map: second-order multipliers (+ Psi moments) -> (n2, W2, J2)."""
    if mult2.order is not Order.SECOND:
        raise DomainError("mult2 must be second order")
    d = model.dim
    if rhs is None:
        rhs = SecondOrderRHS.zero(d)
    E0 = model.energy_scale
    mat = -jacobian_2x2(model, mult0, spec)
    n2 = -(mat[0, 0] * mult2.eta0 + mat[0, 1] * mult2.eta1) + rhs.psi_n
    W2 = -E0 * (mat[1, 0] * mult2.eta0 + mat[1, 1] * mult2.eta1) + rhs.psi_W
    kappa, _ = j_coefficient(model, mult0, spec)
    J2 = -kappa * mult2.eta2 + rhs.psi_J
    return MomentVector(n2, W2, J2, Order.SECOND)
