"""Semiclassical (zeroth-order) maximum-entropy closure.

The occupation ansatz is a Fermi function of xi = eta0 + eta1*eps + eta2.v,
expanded to first order in the drift anisotropy (eta2 small):

    w0 = 1/(e^xi0 + 1) - e^xi0/(e^xi0+1)^2 * (eta2 . v),   xi0 = eta0 + eta1*eps.

The density/energy constraints then depend on (eta0, eta1) alone and form a
2x2 nonlinear system with an everywhere negative-definite Jacobian, while
the momentum constraint is exactly linear in eta2 with a scalar (isotropic)
coefficient.  Inversion is therefore damped Newton on (eta0, eta1) followed
by one scalar division for eta2.

Conventions
-----------
* eta0 is dimensionless; eta1 is dimensionless (the SI energy multiplier
  times kB*T_ref, so eta1 = 1 is lattice equilibrium); eta2 is in s/m.
* MomentVector is SI: n [1/m^d], W [J/m^d], J [1/(m^(d-1) s)].
* jacobian_2x2 returns d(n, W/E0)/d(eta0, eta1) with E0 = kB*T_ref, which
  makes the matrix symmetric (shared mixed integral) and negative definite.
"""

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .errors import (CompatibilityWarning, DomainError, NonConvergenceError,
                     UnrealizableMomentsError)
from .quadrature import (DEFAULT_SPEC, QuadratureSpec, fermi_integral,
                         fermi_occupancy, fermi_window, integrate_semi_infinite)

__all__ = [
    "Order", "Multipliers", "MomentVector", "ClosureFluxes", "InversionResult",
    "constraints_forward", "closure_fluxes", "invert_constraints",
    "newton_invert", "jacobian_2x2", "j_coefficient", "window_moments",
    "compatibility_bound", "check_compatibility", "occupation_expanded",
]

class Order(enum.Enum):
    ZEROTH = 0
    SECOND = 2

@dataclass
class Multipliers:
    """Lagrange multiplier set (eta0, eta1, eta2) at a fixed expansion order."""

    eta0: float
    eta1: float
    eta2: np.ndarray
    order: Order = Order.ZEROTH

    def __post_init__(self):
        self.eta2 = np.atleast_1d(np.asarray(self.eta2, dtype=float))
        if self.order is Order.ZEROTH and not self.eta1 > 0.0:
            raise DomainError("zeroth-order multipliers need eta1 > 0")

    @classmethod
    def isotropic(cls, eta0, eta1, dim):
        return cls(eta0, eta1, np.zeros(dim))

@dataclass
class MomentVector:
    """(n, W, J) in SI units; `quad_error` carries worst-case quadrature bounds."""

    n: float
    W: float
    J: np.ndarray
    order: Order = Order.ZEROTH
    quad_error: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.J = np.atleast_1d(np.asarray(self.J, dtype=float))
        if self.order is Order.ZEROTH:
            if not (self.n > 0.0 and self.W > 0.0):
                raise DomainError("zeroth-order moments need n > 0 and W > 0")
        if not np.all(np.isfinite(self.J)):
            raise DomainError("momentum density must be finite")

@dataclass
class ClosureFluxes:
    """Energy flux S, pressure tensor P and velocity-gradient tensor G.

    All include the phase-space prefactor y:  S = y int eps v w dp,
    P = y int v x v w dp,  G = y int w grad_p v dp.  P and G are isotropic
    (scalar times identity) within the small-anisotropy expansion.
    """

    S: np.ndarray
    P: np.ndarray
    G: np.ndarray

@dataclass
class InversionResult:
    multipliers: Multipliers
    iterations: int
    residual: float
    converged: bool
    quad_error: tuple = (0.0, 0.0)

# ---------------------------------------------------------------------------
# 1D reduced energy integrals
# ---------------------------------------------------------------------------

def _edge_breaks(model, eta0, eta1, shifts=(0.0,), margin=30.0):
    """Dimensionless-energy breakpoints where xi0 (possibly shifted) crosses 0,
    plus a far-tail split `margin` decay lengths past the last edge so the
    semi-infinite remainder carries a negligible share of the integral."""
    u_min = model.band_min / model.energy_scale
    breaks = []
    if eta1 > 0.0:
        for s in shifts:
            u_star = -eta0 / eta1 - s
            if u_star > u_min:
                breaks.append(u_star)
        breaks.append(max([u_min, *breaks]) + margin / eta1)
    return breaks

def band_integral(model, weight, eta0, eta1, window, spec=DEFAULT_SPEC,
                  unit_stat=False):
    """Integral of weight(eps)*stat(xi0)*dos(eps) over the band.

    `window=False` uses the occupancy 1/(e^xi+1); `window=True` uses the
    Fermi-edge factor e^xi/(e^xi+1)^2; `unit_stat=True` drops the
    statistics factor (for weights that already contain it) while keeping
    the Fermi-edge domain split.  Returns (value, error_bound).
    """
    E0 = model.energy_scale
    u_min = model.band_min / E0
    if unit_stat:
        stat = lambda xi: 1.0
    else:
        stat = fermi_window if window else fermi_occupancy

    def f(u):
        eps = u * E0
        return weight(eps) * stat(eta0 + eta1 * u) * model.dos_weight(eps)

    # integrand scale is set by dos_weight (can be ~1e-55 SI); control the
    # error purely relatively so abs_tol never short-circuits refinement
    rel_spec = QuadratureSpec(rel_tol=spec.rel_tol, abs_tol=0.0,
                              max_subdivisions=spec.max_subdivisions,
                              truncation_margin=spec.truncation_margin)
    breaks = _edge_breaks(model, eta0, eta1, margin=spec.truncation_margin)
    val, err = integrate_semi_infinite(f, u_min, rel_spec, breakpoints=breaks)
    return val * E0, err * E0

def window_moments(model, mult, orders=(0, 1, 2), spec=DEFAULT_SPEC):
    """I_k = y int (eps/E0)^k e^xi0/(e^xi0+1)^2 dos(eps) deps, k in `orders`.

    These are the building blocks shared by the constraint Jacobian and the
    second-order linear systems (the "same integrals" property).
    """
    E0 = model.energy_scale
    y = model.degeneracy_y
    out = []
    for k in orders:
        val, err = band_integral(model, lambda eps, k=k: (eps / E0) ** k,
                                 mult.eta0, mult.eta1, window=True, spec=spec)
        out.append((y * val, y * err))
    return out

def j_coefficient(model, mult, spec=DEFAULT_SPEC):
    """kappa >= 0 such that J = -kappa * eta2 (and y int w' v x v dp = kappa I).

    kappa = (y/d) int |v|^2 e^xi0/(e^xi0+1)^2 dos(eps) deps.
    """
    y = model.degeneracy_y
    d = model.dim
    val, err = band_integral(model, lambda eps: model.speed_of_energy(eps) ** 2,
                             mult.eta0, mult.eta1, window=True, spec=spec)
    return y * val / d, y * err / d

def _s_coefficient(model, mult, spec=DEFAULT_SPEC):
    """sigma >= 0 such that S = -sigma * eta2."""
    y = model.degeneracy_y
    d = model.dim
    val, err = band_integral(model, lambda eps: eps * model.speed_of_energy(eps) ** 2,
                             mult.eta0, mult.eta1, window=True, spec=spec)
    return y * val / d, y * err / d

def _density_energy(model, mult, spec=DEFAULT_SPEC):
    y = model.degeneracy_y
    n, n_err = band_integral(model, lambda eps: 1.0, mult.eta0, mult.eta1,
                             window=False, spec=spec)
    W, W_err = band_integral(model, lambda eps: eps, mult.eta0, mult.eta1,
                             window=False, spec=spec)
    return y * n, y * W, y * n_err, y * W_err

def grad_v_scalar(model, mult, spec=DEFAULT_SPEC):
    """g such that y int w0 grad_p v dp = g I.

    For a parabolic band grad_p v = I/m* exactly, so g = n/m* with no
    additional quadrature (keeps the parabolic mobility identity exact).
    """
    y = model.degeneracy_y
    if not model.is_graphene and model.alpha == 0.0:
        n, _, n_err, _ = _density_energy(model, mult, spec)
        return n / model.m_star, n_err / model.m_star
    val, err = band_integral(model, model.grad_v_iso, mult.eta0, mult.eta1,
                             window=False, spec=spec)
    return y * val, y * err

def constraints_forward(model, mult, spec=DEFAULT_SPEC):
    """Moments (n, W, J) of the expanded MEP state for given multipliers.

    J is exactly linear in eta2 (negative-definite scalar coefficient), so
    J = 0 whenever eta2 = 0 and doubling eta2 doubles J identically.
    """
    if mult.order is not Order.ZEROTH:
        raise DomainError("constraints_forward expects zeroth-order multipliers")
    if not mult.eta1 > 0.0:
        raise DomainError("eta1 must be positive")
    check_compatibility(model, mult, warn=True)
    n, W, n_err, W_err = _density_energy(model, mult, spec)
    kappa, k_err = j_coefficient(model, mult, spec)
    J = -kappa * mult.eta2
    return MomentVector(n, W, J, Order.ZEROTH,
                        quad_error=(n_err, W_err, k_err * float(np.linalg.norm(mult.eta2))))

def closure_fluxes(model, mult, spec=DEFAULT_SPEC):
    """Energy flux, pressure tensor and velocity-gradient tensor of the state."""
    if mult.order is not Order.ZEROTH:
        raise DomainError("closure_fluxes expects zeroth-order multipliers")
    d = model.dim
    y = model.degeneracy_y
    sig, _ = _s_coefficient(model, mult, spec)
    S = -sig * mult.eta2
    p_scal, _ = band_integral(model, lambda eps: model.speed_of_energy(eps) ** 2,
                              mult.eta0, mult.eta1, window=False, spec=spec)
    g_scal, _ = grad_v_scalar(model, mult, spec)
    P = (y * p_scal / d) * np.eye(d)
    G = g_scal * np.eye(d)
    return ClosureFluxes(S=S, P=P, G=G)

def jacobian_2x2(model, mult, spec=DEFAULT_SPEC):
    """Analytic Jacobian d(n, W/E0)/d(eta0, eta1): symmetric, negative definite."""
    (i0, _), (i1, _), (i2, _) = window_moments(model, mult, (0, 1, 2), spec)
    return -np.array([[i0, i1], [i1, i2]])

# ---------------------------------------------------------------------------
# Compatibility bound on the drift multiplier
# ---------------------------------------------------------------------------

def compatibility_bound(model, mult):
    """Drift-multiplier bound (e^xi0+1)/(v_inf e^xi0) at the band minimum.

    Keeping |eta2| below this keeps the expanded occupation within [0, 1]
    near the band bottom; the uniform (all-energy) sufficient bound is the
    tighter 1/v_inf.  Parabolic bands are unbounded in v, so the bound is
    +inf there (the expansion argument needs a finite speed bound).
    """
    v_inf = model.speed_bound()
    if not math.isfinite(v_inf):
        return math.inf
    xi_min = mult.eta0 + mult.eta1 * model.band_min / model.energy_scale
    if xi_min < -700.0:
        return math.inf
    return (1.0 + math.exp(-xi_min)) / v_inf

def occupation_expanded(model, mult, p):
    """The drift-expanded occupation w0 = 1/(e^xi0+1) - w'(xi0) eta2.v at p.

    Stays within [0, 1] whenever eta2 respects the compatibility bound.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    xi = mult.eta0 + mult.eta1 * model.energy(p) / model.energy_scale
    v = model.group_velocity(p)
    return float(fermi_occupancy(xi) - fermi_window(xi) * (mult.eta2 @ v))

def check_compatibility(model, mult, warn=False):
    ok = float(np.linalg.norm(mult.eta2)) <= compatibility_bound(model, mult)
    if warn and not ok:
        warnings.warn("eta2 exceeds the compatibility bound; the expanded "
                      "occupation may leave [0, 1]", CompatibilityWarning,
                      stacklevel=2)
    return ok

# ---------------------------------------------------------------------------
# Inversion: moments -> multipliers
# ---------------------------------------------------------------------------

def _seed_guess(model, n_target, W_target):
    """Closed-form seed for (eta0, eta1) from the alpha=0 / c=0 specializations.

    Uses the exact Fermi-integral forms of the parabolic (3D) or gapless
    cone (2D) constraints, solved as a 1D root problem in eta0, so the seed
    is accurate from the Maxwell-Boltzmann limit deep into degeneracy.
    Band nonparabolicity (alpha) or a gap (c) only shifts the seed, which
    the Newton iteration then absorbs.
    """
    E0 = model.energy_scale
    m_hat = W_target / (n_target * E0)
    fseed = QuadratureSpec(rel_tol=1e-9, abs_tol=1e-30, max_subdivisions=200)

    if model.is_graphene:
        # cone shifted by the gap: with u0 = band_min/E0 and the band-edge
        # degeneracy nu = -eta0 - eta1*u0,
        #   n = C [F_1(nu)/eta1^2 + u0 F_0(nu)/eta1]
        #   W - u0*E0*n = C E0 [2 F_2(nu)/eta1^3 + u0 F_1(nu)/eta1^2]
        C = 2.0 * math.pi * model.degeneracy_y * E0 ** 2 / model.v_fermi ** 2
        u0 = model.band_min / E0
        m_th = m_hat - u0  # thermal part of the mean energy, > 0 by realizability

        def eta1_of(nu):
            f0 = fermi_integral(0.0, nu, fseed)
            f1 = fermi_integral(1.0, nu, fseed)
            f2 = fermi_integral(2.0, nu, fseed)
            if u0 == 0.0:
                return 2.0 * f2 / (m_th * f1)
            # u0 m_th F0 x^2 + (m_th - u0) F1 x - 2 F2 = 0, positive root
            a, b, c = u0 * m_th * f0, (m_th - u0) * f1, -2.0 * f2
            return (-b + math.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)

        def n_resid(nu):
            e1 = eta1_of(nu)
            f0 = fermi_integral(0.0, nu, fseed)
            f1 = fermi_integral(1.0, nu, fseed)
            n_model = C * (f1 / e1 ** 2 + u0 * f0 / e1)
            return -math.log(n_model / n_target)

        # n increases with the edge degeneracy nu; root-find in nu
        lo, hi = -40.0, 60.0
        try:
            if n_resid(hi) >= 0.0:
                nu = hi
            elif n_resid(lo) <= 0.0:
                nu = lo
            else:
                nu = brentq(n_resid, lo, hi, xtol=1e-3)
            eta1 = eta1_of(nu)
            eta0 = -nu - eta1 * u0
        except (ValueError, OverflowError):
            eta0, eta1 = 0.0, 1.0
        eta1 = min(max(eta1, 1e-4), 1e5)
        return eta0, eta1
    # parabolic specialization of the Kane band, in kT units:
    # n = y* Gamma(3/2) (E0/eta1)^(3/2) F_1/2(-eta0)
    y_star = 4.0 * math.pi * model.degeneracy_y * model.m_star ** 1.5 * math.sqrt(2.0)
    C = y_star * E0 ** 1.5 * math.gamma(1.5)

    def eta1_of(eta0):
        r = (fermi_integral(1.5, -eta0, fseed) / fermi_integral(0.5, -eta0, fseed))
        return 1.5 * r / m_hat

    def n_resid(eta0):
        e1 = eta1_of(eta0)
        return math.log(C * fermi_integral(0.5, -eta0, fseed) / e1 ** 1.5 / n_target)

    # n_resid is monotone decreasing in eta0; bracket and bisect.
    lo, hi = -60.0, 40.0
    try:
        if n_resid(lo) <= 0.0:
            eta0 = lo
        elif n_resid(hi) >= 0.0:
            eta0 = hi
        else:
            eta0 = brentq(n_resid, lo, hi, xtol=1e-3)
        eta1 = eta1_of(eta0)
    except (ValueError, OverflowError):
        eta0, eta1 = 0.0, 1.0
    eta1 = min(max(eta1, 1e-4), 1e5)
    return eta0, eta1

def _degenerate_mean_floor(model, n):
    """Smallest mean energy [J] any occupation <= 1 can carry at density n.

    The minimizer is the filled Fermi sphere: n = y Omega_d p_F^d / d, so
    the floor is the dos-weighted mean energy below p_F.  This is the
    sharp lower boundary of the realizable (n, W) region.
    """
    d = model.dim
    omega = 4.0 * math.pi if d == 3 else 2.0 * math.pi
    p_f = (n * d / (model.degeneracy_y * omega)) ** (1.0 / d)
    num, _ = integrate.quad(
        lambda p: model.energy_of_p_norm(p) * p ** (d - 1), 0.0, p_f,
        epsabs=0.0, epsrel=1e-9)
    return num * d / p_f ** d

def _realizability_check(model, target):
    if not (target.n > 0.0 and target.W > 0.0):
        raise UnrealizableMomentsError("need n > 0 and W > 0")
    mean = target.W / target.n
    if mean <= model.band_min * (1.0 + 1e-12):
        raise UnrealizableMomentsError(
            f"mean energy {mean:.3e} J at or below the band minimum "
            f"{model.band_min:.3e} J; no maximum-entropy state exists")
    floor = _degenerate_mean_floor(model, target.n)
    if mean <= floor * (1.0 - 1e-9):
        raise UnrealizableMomentsError(
            f"mean energy {mean:.3e} J below the Pauli floor {floor:.3e} J "
            f"at density {target.n:.3e}; no occupation <= 1 can carry it")

def newton_invert(model, target, guess=None, spec=DEFAULT_SPEC,
                  max_iter=60, rel_tol=1e-8, step_tol=1e-10):
    """Damped Newton inversion of the (n, W) constraints, then linear eta2.

    Residuals are log-ratios (componentwise relative errors after
    nondimensionalization); convergence requires both max|residual| <
    rel_tol and a Newton step below step_tol, so quadrature noise cannot
    masquerade as convergence.
    """
    if target.order is not Order.ZEROTH:
        raise DomainError("newton_invert expects zeroth-order target moments")
    _realizability_check(model, target)
    E0 = model.energy_scale
    W_hat_t = target.W / E0
    # quadrature noise must sit well below both convergence thresholds
    quad_floor = max(min(1e-2 * rel_tol, 0.5 * step_tol, spec.rel_tol), 1e-13)
    if spec.rel_tol > quad_floor:
        spec = QuadratureSpec(rel_tol=quad_floor, abs_tol=spec.abs_tol,
                              max_subdivisions=spec.max_subdivisions,
                              truncation_margin=spec.truncation_margin)

    if guess is not None:
        x = np.array([guess.eta0, guess.eta1], dtype=float)
    else:
        x = np.array(_seed_guess(model, target.n, target.W), dtype=float)

    def residual(x):
        m = Multipliers.isotropic(x[0], x[1], model.dim)
        n, W, n_err, W_err = _density_energy(model, m, spec)
        r = np.array([math.log(n / target.n), math.log((W / E0) / W_hat_t)])
        return r, m, (n_err, W_err)

    r, mult, q_err = residual(x)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        jac = jacobian_2x2(model, mult, spec)
        n_cur = target.n * math.exp(r[0])
        W_hat_cur = W_hat_t * math.exp(r[1])
        jac_log = jac / np.array([[n_cur], [W_hat_cur]])
        try:
            step = np.linalg.solve(jac_log, -r)
        except np.linalg.LinAlgError:
            raise NonConvergenceError("singular Jacobian during Newton",
                                      last=mult, residual=float(np.max(np.abs(r))),
                                      iterations=iterations)
        step_norm = float(np.linalg.norm(step)) / (1.0 + float(np.linalg.norm(x)))
        if np.max(np.abs(r)) < rel_tol and step_norm < step_tol:
            converged = True
            break
        lam = 1.0
        # keep eta1 positive
        if x[1] + step[1] <= 0.0:
            lam = min(lam, 0.5 * x[1] / abs(step[1]))
        # trust region: a nearly singular (degenerate-regime) Jacobian can
        # propose astronomical steps along its soft mode
        cap = 5.0 * (1.0 + float(np.linalg.norm(x)))
        if float(np.linalg.norm(step)) > cap:
            lam = min(lam, cap / float(np.linalg.norm(step)))
        best = None
        for _ in range(9):  # full step + up to 8 halvings
            x_try = x + lam * step
            if x_try[1] > 0.0:
                r_try, m_try, q_try = residual(x_try)
                if np.max(np.abs(r_try)) < np.max(np.abs(r)):
                    best = (x_try, r_try, m_try, q_try)
                    break
            lam *= 0.5
        if best is None:
            break
        x, r, mult, q_err = best

    res = float(np.max(np.abs(r)))
    if not converged:
        mult_fail = Multipliers.isotropic(x[0], x[1], model.dim)
        raise NonConvergenceError(
            f"Newton did not converge after {iterations} iterations "
            f"(residual {res:.3e})", last=mult_fail, residual=res,
            iterations=iterations)

    kappa, _ = j_coefficient(model, mult, spec)
    eta2 = -np.asarray(target.J, dtype=float) / kappa
    final = Multipliers(x[0], x[1], eta2, Order.ZEROTH)
    return InversionResult(final, iterations, res, True, q_err)

def invert_constraints(model, target, guess=None, spec=DEFAULT_SPEC, max_iter=60):
    """Multipliers reproducing `target` to 1e-8 relative per component."""
    return newton_invert(model, target, guess, spec, max_iter).multipliers
