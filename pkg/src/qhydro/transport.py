"""Homogeneous-bulk dynamics and quantum-corrected mobilities.

With every spatial gradient zero and a constant field E = -grad(Phi), the
moment balance laws close to the ODE system

    dn/dt = 0
    dW/dt = -q E.J + C_W
    dJ/dt = -q G E - J/tau

with q the (positive) elementary charge, G = y int w0 grad_p v dp the
velocity-gradient closure and the momentum production modelled in
relaxation-time form.  Electrons drift against the field, so the steady
state is J = -tau q G E and the zeroth-order mobility tensor

    mu0 = -(tau q / n0) G

is negative with this sign convention (reported signed; the CLI also
emits |mu|).  The hbar^2 correction is

    mu2 = -(n2/n0) mu0 - (tau q / n0) * y int w2 grad_p v dp,

which makes the reconstruction J2 = (n0 mu2 + n2 mu0) E exact by
construction.  Second-order inputs are hbar^2-inclusive (see
second_order), so mu_total = mu0 + mu2 and every second-order output is
bitwise zero when hbar_scale = 0.

The relaxation trajectory advances (W, J) with an adaptive embedded
Dormand-Prince 5(4) pair; multipliers are re-inverted from the moments at
every stage (warm-started), and a step is rejected and halved if the
inversion fails inside it.
"""

import math
from dataclasses import dataclass

import numpy as np

from .closure import (MomentVector, Multipliers, Order, band_integral,
                      grad_v_scalar, newton_invert)
from .collisions import production, relaxation_time
from .constants import Q_E
from .errors import DomainError, NonConvergenceError, QhydroError
from .quadrature import DEFAULT_SPEC
from .second_order import psi_gradv_scalars

__all__ = ["BulkState", "MobilityResult", "Trajectory",
           "mobility_zeroth", "mobility_second", "relax_to_steady"]


@dataclass
class BulkState:
    """Moments, field and time of one homogeneous-bulk snapshot."""

    moments0: MomentVector
    moments2: MomentVector
    field_E: np.ndarray
    time: float
    multipliers: Multipliers = None
    tau: float = math.nan

    def __post_init__(self):
        self.field_E = np.atleast_1d(np.asarray(self.field_E, dtype=float))


@dataclass
class MobilityResult:
    """Zeroth- and second-order mobility tensors plus the density split."""

    mu0: np.ndarray
    mu2: np.ndarray
    n0: float
    n2: float

    @property
    def total(self):
        return self.mu0 + self.mu2


@dataclass
class Trajectory:
    states: list
    reached_steady: bool

    @property
    def terminal(self):
        return self.states[-1]


def mobility_zeroth(model, mult0, tau, spec=DEFAULT_SPEC):
    """mu0 = -(tau q / n0) y int w0 grad_p v dp; collapses to -tau q/m* I
    for a parabolic band."""
    if not tau >= 0.0:
        raise DomainError("tau must be nonnegative")
    d = model.dim
    y = model.degeneracy_y
    n0, _ = band_integral(model, lambda eps: 1.0, mult0.eta0, mult0.eta1,
                          window=False, spec=spec)
    n0 *= y
    g, _ = grad_v_scalar(model, mult0, spec)
    mu0 = -(tau * Q_E / n0) * g * np.eye(d)
    return MobilityResult(mu0=mu0, mu2=np.zeros((d, d)), n0=n0, n2=0.0)


def _w2_gradv_scalar(model, mult0, mult2, spec):
    """y int w2_local grad_p v dp = -y int w' (eta0_2 + eta1_2 eps/E0) grad_v."""
    E0 = model.energy_scale

    def weight(eps):
        return (mult2.eta0 + mult2.eta1 * eps / E0) * model.grad_v_iso(eps)

    val, _ = band_integral(model, weight, mult0.eta0, mult0.eta1,
                           window=True, spec=spec)
    return -model.degeneracy_y * val


def mobility_second(model, mult0, mult2, n0, n2, tau, field_jet=None,
                    spec=DEFAULT_SPEC):
    """Second-order mobility from the solved hbar^2 multipliers.

    The drift part of w2 is odd and drops from the isotropic integral; a
    1D multiplier-field jet adds the gradient (Psi) contribution, which is
    axially anisotropic (distinct along/transverse diagonal entries).
    """
    if mult2.order is not Order.SECOND:
        raise DomainError("mobility_second needs second-order multipliers")
    d = model.dim
    mu0 = mobility_zeroth(model, mult0, tau, spec).mu0
    g2 = _w2_gradv_scalar(model, mult0, mult2, spec) * np.eye(d)
    if field_jet is not None:
        t_par, t_perp = psi_gradv_scalars(model, field_jet, spec)
        g2 = g2 + np.diag([t_par] + [t_perp] * (d - 1))
    mu2 = -(n2 / n0) * mu0 - (tau * Q_E / n0) * g2
    return MobilityResult(mu0=mu0, mu2=mu2, n0=n0, n2=n2)


# ---------------------------------------------------------------------------
# relaxation to steady state
# ---------------------------------------------------------------------------

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


class _BulkRHS:
    """Moment-space right-hand side with warm-started multiplier inversion."""

    def __init__(self, model, channels, n, field_E, spec, momentum_kernel):
        self.model = model
        self.channels = channels
        self.n = n
        self.E = np.asarray(field_E, dtype=float)
        self.spec = spec
        self.momentum_kernel = momentum_kernel
        self.guess = None
        self.last_aux = None

    def __call__(self, y):
        model = self.model
        W = y[0]
        J = y[1:]
        target = MomentVector(self.n, W, J, Order.ZEROTH)
        # warm-started Newton converges in a couple of iterations; fail fast
        # on wild trial stages so the step controller can shrink h
        res = newton_invert(model, target, guess=self.guess, spec=self.spec,
                            max_iter=12, rel_tol=1e-10, step_tol=1e-9)
        mult = res.multipliers
        self.guess = Multipliers.isotropic(mult.eta0, mult.eta1, model.dim)
        C_W = 0.0
        for ch in self.channels:
            C_W += production(model, mult, ch, self.spec, self.momentum_kernel,
                              skip_momentum=True).C_W
        # the momentum equation is inert at zero drift and zero field; keep
        # the last tau for rate scaling instead of re-evaluating it
        momentum_active = (self.last_aux is None
                           or float(np.linalg.norm(J)) > 0.0
                           or float(np.linalg.norm(self.E)) > 0.0)
        if momentum_active:
            tau = relaxation_time(model, mult, self.channels, self.spec,
                                  self.momentum_kernel)
            g, _ = grad_v_scalar(model, mult, self.spec)
        else:
            tau, g = self.last_aux[1], self.last_aux[2]
        dW = -Q_E * float(self.E @ J) + C_W
        dJ = -Q_E * g * self.E - J / tau
        self.last_aux = (mult, tau, g)
        return np.concatenate(([dW], dJ))


def relax_to_steady(model, channels, initial, dt, t_max, spec=DEFAULT_SPEC,
                    steady_tol=1e-8, rel_tol=1e-6, max_steps=20000,
                    momentum_kernel="standard"):
    """Integrate the homogeneous moment ODEs until (near) steady state.

    Terminates when the fractional change per relaxation time drops below
    `steady_tol`, or at t_max (flagged via Trajectory.reached_steady).
    `rel_tol` controls only path accuracy; the terminal state is the fixed
    point of the dynamics and does not depend on it.  Density is constant
    along the trajectory by construction.
    """
    if not (dt > 0.0 and t_max > 0.0):
        raise DomainError("need dt > 0 and t_max > 0")
    m0 = initial.moments0
    rhs = _BulkRHS(model, channels, m0.n, initial.field_E, spec, momentum_kernel)
    y = np.concatenate(([m0.W], np.asarray(m0.J, dtype=float)))
    t = 0.0
    h = dt

    k1 = rhs(y)
    mult, tau, g = rhs.last_aux
    J_ref = max(float(np.linalg.norm(y[1:])),
                tau * Q_E * g * float(np.linalg.norm(rhs.E)),
                m0.n * 1e-6)
    states = [BulkState(m0, initial.moments2, rhs.E, 0.0, mult, tau)]

    def rates_small(f, tau_now, W_now):
        rW = abs(f[0]) * tau_now / abs(W_now)
        rJ = float(np.linalg.norm(f[1:])) * tau_now / J_ref
        return max(rW, rJ) < steady_tol

    reached = rates_small(k1, tau, y[0])
    steps = 0
    while not reached and t < t_max and steps < max_steps:
        if t + h > t_max:
            h = t_max - t
        ks = [k1]
        try:
            for i in range(1, 7):
                yi = y + h * sum(a * k for a, k in zip(_DP_A[i], ks))
                if not 0.2 * y[0] < yi[0] < 5.0 * y[0]:
                    raise NonConvergenceError("trial stage left the trust region")
                ks.append(rhs(yi))
        except (NonConvergenceError, QhydroError):
            h *= 0.5
            if h < 1e-12 * dt:
                raise NonConvergenceError(
                    "step size collapsed during relaxation",
                    last=states[-1])
            continue
        ks = np.array(ks)
        y5 = y + h * (_DP_B5 @ ks)
        y4 = y + h * (_DP_B4 @ ks)
        err = np.abs(y5 - y4)
        scale = np.concatenate(([abs(y[0])], np.full(model.dim, J_ref)))
        e_norm = float(np.max(err / (rel_tol * scale)))
        if e_norm <= 1.0 or h <= 1e-9 * dt:
            t += h
            y = y5
            steps += 1
            k1 = ks[6]            # FSAL: stage 7 was evaluated at y5
            mult, tau, g = rhs.last_aux
            states.append(BulkState(
                MomentVector(m0.n, y[0], y[1:].copy(), Order.ZEROTH),
                initial.moments2, rhs.E, t, mult, tau))
            reached = rates_small(k1, tau, y[0])
        h *= min(5.0, max(0.2, 0.9 * (e_norm + 1e-16) ** -0.2))
    return Trajectory(states, reached)
