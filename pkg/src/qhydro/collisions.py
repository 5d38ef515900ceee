"""Electron-phonon production terms evaluated on the maximum-entropy state.

Moments of the phonon collision operator (density, energy, momentum
production) for four channels: silicon optical (Kane/parabolic band,
constant overlap factor), and graphene acoustic / Gamma-optical /
K-phonon.  Density production is a structural zero for every channel
(charge conservation in the unipolar case).

Pauli-blocking kernels are evaluated as sigmoid compositions, never as raw
exponentials, so deep-degenerate states (eta0 << 0) stay overflow-free:

    f_i(e1, e2) = w(e1) (1 - w(e2))
    F_1(e1, e2) = w(e1) w'(e2)
    F_2(e1, e2) = (1 - w(e1)) w(e2)^2 - w(e1)

with w the Fermi occupancy of xi = eta0 + eta1*eps.  For every inelastic
channel the energy bracket obeys the detailed-balance identity
f_i(eps, eps+hw) = e^(eta1*hw) f_i(eps+hw, eps), so the energy production
vanishes identically at lattice-equilibrium multipliers (eta1*kB*T_ref =
1/T_L in SI terms).

The collision measure carries 1/(2 pi hbar)^d; the channel prefactors
absorb the (2 pi)^d part, and the remaining 1/hbar^d is kept explicit so
SI evaluation is dimensionally consistent.

Momentum production is exactly linear in eta2; each operation returns
C_J = (scalar coefficient) * eta2.  The acoustic coefficient is negative
everywhere; for the inelastic channels the default "standard" F_2 kernel
gives a coefficient whose sign depends on the state (degenerate + strongly
inelastic regimes flip it), while the "golden-rule" kernel variant is
positive everywhere.  The relaxation time is therefore formed from
magnitudes, 1/tau = sum_ch |lambda_ch| / kappa with J = -kappa eta2, so
channel rates add (Matthiessen) and tau > 0 under either kernel.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .closure import Order, j_coefficient
from .constants import HBAR, KB

from .errors import DomainError, UndefinedRelaxationError
from .quadrature import (DEFAULT_SPEC, QuadratureSpec, bose_occupation,
                         fermi_window, integrate_semi_infinite)

__all__ = [
    "ChannelKind", "PhononChannel", "ProductionVector",
    "silicon_optical_production", "graphene_acoustic_production",
    "graphene_optical_production", "graphene_k_production",
    "production", "momentum_production_coefficient", "relaxation_time",
]


class ChannelKind(enum.Enum):
    SILICON_OPTICAL = "silicon-optical"
    GRAPHENE_ACOUSTIC = "graphene-acoustic"
    GRAPHENE_OPTICAL = "graphene-optical"
    GRAPHENE_K = "graphene-k"


@dataclass(frozen=True)
class PhononChannel:
    """One scattering channel: coupling constant, phonon energy, bath data.

    `coupling` is Lambda [J^2 m s / kg] for silicon, A_ac [J^2 m^2 / kg]
    for graphene acoustic, and the squared deformation field D^2 [J^2/m^2]
    for the graphene optical/K channels.  sigma is the graphene areal mass
    density [kg/m^2]; omega = hbar_omega / hbar.
    """

    kind: ChannelKind
    coupling: float
    hbar_omega: float           # J; 0 for the elastic acoustic channel
    T_L: float                  # K
    sigma: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not self.coupling > 0.0:
            raise DomainError("channel coupling must be positive")
        if self.hbar_omega < 0.0 or not self.T_L > 0.0:
            raise DomainError("need hbar_omega >= 0 and T_L > 0")

    @classmethod
    def silicon_optical(cls, dtk, rho, hbar_omega, z_if=1.0, T_L=300.0):
        """From the optical coupling constant DtK [J/m], mass density rho
        [kg/m^3], phonon energy [J] and final-valley degeneracy."""
        omega = hbar_omega / HBAR
        coupling = z_if * math.pi * dtk ** 2 / (rho * omega)
        return cls(ChannelKind.SILICON_OPTICAL, coupling, hbar_omega, T_L, 0.0, omega)

    @classmethod
    def graphene_acoustic(cls, d_ac, v_ac, sigma, T_L=300.0):
        """From the acoustic deformation potential D_ac [J], sound speed
        v_ac [m/s] and areal density sigma [kg/m^2] (elastic channel)."""
        coupling = 2.0 * math.pi * d_ac ** 2 * KB * T_L / (sigma * HBAR * v_ac ** 2)
        return cls(ChannelKind.GRAPHENE_ACOUSTIC, coupling, 0.0, T_L, sigma, 0.0)

    @classmethod
    def graphene_optical(cls, d_sq, sigma, hbar_omega, T_L=300.0):
        return cls(ChannelKind.GRAPHENE_OPTICAL, d_sq, hbar_omega, T_L,
                   sigma, hbar_omega / HBAR)

    @classmethod
    def graphene_k(cls, d_sq, sigma, hbar_omega, T_L=300.0):
        return cls(ChannelKind.GRAPHENE_K, d_sq, hbar_omega, T_L,
                   sigma, hbar_omega / HBAR)


@dataclass
class ProductionVector:
    """Collision-operator moments: C_n is identically zero (charge conservation).

    C_W_scale is the emission-plus-absorption magnitude of the energy
    production (the natural normalization for detailed-balance residuals).
    """

    C_n: float
    C_W: float
    C_J: np.ndarray
    C_W_scale: float = 0.0

    def __post_init__(self):
        self.C_J = np.atleast_1d(np.asarray(self.C_J, dtype=float))


# ---------------------------------------------------------------------------
# stable kernel factors; all xi arguments are eta0 + eta1 * eps/E0
# ---------------------------------------------------------------------------

def _fi(xi_a, xi_b):
    """f_i: occupancy at a times Pauli blocking at b."""
    return expit(-xi_a) * expit(xi_b)


def _f1(xi_a, xi_b):
    return expit(-xi_a) * fermi_window(xi_b)


def _f2(xi_a, xi_b):
    # the bare 1/e^(xi_a) term combines with the leading blocking
    # factor into the occupancy expit(-xi_a)
    return expit(xi_a) * expit(-xi_b) ** 2 - expit(-xi_a)


def _prod_integral(model, fn_u, mult, omega_hat, spec, abs_scale=0.0):
    """Integrate fn_u(u) du over the band with Fermi-edge breakpoints.

    `abs_scale` sets an absolute-error floor rel_tol*abs_scale for
    integrands that cancel pointwise (detailed balance), where a pure
    relative target is unreachable.
    """
    E0 = model.energy_scale
    u_min = model.band_min / E0
    rel = QuadratureSpec(rel_tol=spec.rel_tol, abs_tol=spec.rel_tol * abs_scale,
                         max_subdivisions=spec.max_subdivisions,
                         truncation_margin=spec.truncation_margin)
    breaks = []
    if mult.eta1 > 0.0:
        for shift in (0.0, omega_hat, -omega_hat):
            u_star = -mult.eta0 / mult.eta1 - shift
            if u_star > u_min:
                breaks.append(u_star)
        # far-tail split: everything beyond is exponentially negligible
        breaks.append(max([u_min, *breaks]) + spec.truncation_margin / mult.eta1)
    val, err = integrate_semi_infinite(fn_u, u_min, rel, breakpoints=breaks)
    return val, err


def _balanced_integral(model, f_signed, f_abs, mult, omega_hat, spec):
    """Signed integral of a gain-minus-loss kernel plus its magnitude scale.

    The magnitude integral only anchors the error floor and the
    detailed-balance normalization, so a loose tolerance suffices.
    """
    loose = QuadratureSpec(rel_tol=1e-6, abs_tol=0.0,
                           max_subdivisions=spec.max_subdivisions,
                           truncation_margin=spec.truncation_margin)
    scale, _ = _prod_integral(model, f_abs, mult, omega_hat, loose)
    val, _ = _prod_integral(model, f_signed, mult, omega_hat, spec, abs_scale=scale)
    return val, scale


def _require(model, mult, graphene, what):
    if mult.order is not Order.ZEROTH:
        raise DomainError(f"{what} needs zeroth-order multipliers")
    if graphene and not model.is_graphene:
        raise DomainError(f"{what} needs a graphene model")
    if not graphene and model.is_graphene:
        raise DomainError(f"{what} needs a Kane or parabolic model")


# ---------------------------------------------------------------------------
# silicon optical phonons
# ---------------------------------------------------------------------------

def silicon_optical_production(model, mult, ch, spec=DEFAULT_SPEC,
                               momentum_kernel="standard", skip_momentum=False):
    """Moments of the optical collision term in the Einstein approximation.

    C_n = 0 exactly; C_W and C_J are single 1D energy integrals
    with kernels f_i, F_1, F_2 and the energy-dependent speed E(eps).

    `momentum_kernel` selects the Pauli-blocking combination of the
    momentum moment: "standard" keeps the F_2 form with its bare 1/e^xi
    term, whose orientation becomes state-dependent in degenerate inelastic
    regimes; "golden-rule" uses the gain/loss kernel derived directly from
    the transition rate, which opposes the drift everywhere.  Both agree on
    the elastic limit orientation.
    """
    _require(model, mult, graphene=False, what="silicon_optical_production")
    if not ch.hbar_omega > 0.0:
        raise DomainError("optical channel needs hbar_omega > 0")
    E0 = model.energy_scale
    a = model.alpha
    hw = ch.hbar_omega
    w_hat = hw / E0
    beta = hw / (KB * ch.T_L)
    e_beta = math.exp(beta)
    nb = bose_occupation(hw, ch.T_L)
    eta0, eta1 = mult.eta0, mult.eta1
    y = model.degeneracy_y
    m = model.m_star

    def dospair(u):
        eps = u * E0
        epst = eps + hw
        return ((1.0 + 2.0 * a * eps) * (1.0 + 2.0 * a * epst)
                * math.sqrt(eps * epst * (1.0 + a * eps) * (1.0 + a * epst)))

    def f_w(u, combine=lambda a, b: a - b):
        xi = eta0 + eta1 * u
        xit = eta0 + eta1 * (u + w_hat)
        return dospair(u) * combine(_fi(xi, xit), _fi(xit, xi) * e_beta)

    def f_v(u, combine=lambda a, b: a - b):
        eps = u * E0
        xi = eta0 + eta1 * u
        xit = eta0 + eta1 * (u + w_hat)
        ee = model.speed_of_energy(eps)
        eet = model.speed_of_energy(eps + hw)
        bracket = (combine(eet * _f1(xi, xit), ee * _f2(xi, xit))
                   + e_beta * combine(ee * _f1(xit, xi), eet * _f2(xit, xi)))
        return dospair(u) * bracket

    plus = lambda a, b: abs(a) + abs(b)
    int_w, scale_w = _balanced_integral(model, f_w, lambda u: f_w(u, plus),
                                        mult, w_hat, spec)
    pref_w = 4.0 * y * ch.coupling * hw * m ** 3 * nb / (math.pi * HBAR ** 3)
    C_W = pref_w * int_w * E0
    if skip_momentum:
        lam = 0.0
    elif momentum_kernel == "golden-rule":
        lam = _golden_rule_coefficient(model, mult, ch.coupling, hw, nb, e_beta, spec)
    else:
        int_v, _ = _balanced_integral(model, f_v, lambda u: f_v(u, plus),
                                      mult, w_hat, spec)
        pref_v = y * ch.coupling * m ** 3 * nb / (3.0 * math.pi ** 2 * HBAR ** 3)
        lam = pref_v * int_v * E0
    return ProductionVector(0.0, C_W, lam * mult.eta2, abs(pref_w) * scale_w * E0)


def _golden_rule_coefficient(model, mult, coupling, hw, nb, e_beta, spec):
    """Momentum-production coefficient from the raw gain/loss transition kernel.

    lambda = y G / ((2 pi hbar)^d d) * int E^2 w' inner D(eps) deps with
    inner the emission/absorption occupancy sum; positive for every state,
    so C_J = lambda eta2 always opposes the drift (J = -kappa eta2).
    """
    E0 = model.energy_scale
    w_hat = hw / E0
    eta0, eta1 = mult.eta0, mult.eta1
    band_lo = model.band_min

    def occ(eps):
        return expit(-(eta0 + eta1 * eps / E0))

    def inner(eps):
        up = eps + hw
        acc = e_beta * model.dos_weight(up) * occ(up)
        acc += model.dos_weight(up) * (1.0 - occ(up))
        lo = eps - hw
        if lo >= band_lo:
            acc += e_beta * model.dos_weight(lo) * (1.0 - occ(lo))
            acc += model.dos_weight(lo) * occ(lo)
        return acc

    def f(u):
        eps = u * E0
        ee = model.speed_of_energy(eps)
        return (ee * ee * fermi_window(eta0 + eta1 * u)
                * inner(eps) * model.dos_weight(eps))

    val, _ = _prod_integral(model, f, mult, w_hat, spec)
    d = model.dim
    norm = model.degeneracy_y * coupling * nb / ((2.0 * math.pi * HBAR) ** d * d)
    return norm * val * E0


def _silicon_elastic_coefficient(model, mult, lambda_nb, spec=DEFAULT_SPEC):
    """Closed-form hbar_omega -> 0 limit of the optical C_J coefficient.

    `lambda_nb` is the fixed effective coupling Lambda*N_B.  The bracket
    collapses to 2 E(eps) w0(xi) since F_1 - F_2 at equal energies is the
    occupancy."""
    E0 = model.energy_scale
    a = model.alpha
    eta0, eta1 = mult.eta0, mult.eta1

    def f(u):
        eps = u * E0
        g = (1.0 + 2.0 * a * eps) ** 2 * eps * (1.0 + a * eps)
        return g * 2.0 * model.speed_of_energy(eps) * expit(-(eta0 + eta1 * u))

    val, _ = _prod_integral(model, f, mult, 0.0, spec)
    return (model.degeneracy_y * lambda_nb * model.m_star ** 3
            / (3.0 * math.pi ** 2 * HBAR ** 3)) * val * E0


# ---------------------------------------------------------------------------
# graphene phonons
# ---------------------------------------------------------------------------

def graphene_acoustic_production(model, mult, ch, spec=DEFAULT_SPEC):
    """Elastic acoustic channel: C_n = C_W = 0, momentum production only."""
    _require(model, mult, graphene=True, what="graphene_acoustic_production")
    E0 = model.energy_scale
    vf = model.v_fermi
    c = model.half_gap_c
    eta0, eta1 = mult.eta0, mult.eta1

    def f(u):
        eps = u * E0
        radical = math.sqrt(max((eps / vf) ** 2 - c ** 2, 0.0))
        return eps * radical * fermi_window(eta0 + eta1 * u)

    val, _ = _prod_integral(model, f, mult, 0.0, spec)
    lam = -(model.degeneracy_y * ch.coupling
            / (4.0 * math.pi * vf ** 2 * HBAR ** 2)) * val * E0
    return ProductionVector(0.0, 0.0, lam * mult.eta2)


def _graphene_inelastic(model, mult, ch, pref_w, pref_v, spec,
                        momentum_kernel="standard", skip_momentum=False):
    """Shared Gamma/K kernel; the two channels differ only in prefactors."""
    E0 = model.energy_scale
    vf = model.v_fermi
    c = model.half_gap_c
    hw = ch.hbar_omega
    w_hat = hw / E0
    beta = hw / (KB * ch.T_L)
    e_beta = math.exp(beta)
    eta0, eta1 = mult.eta0, mult.eta1

    def g_kernel(eps_a, eps_b):
        # G(a, b) = (a/b) (b^2 - v_F^2 c^2)
        return (eps_a / eps_b) * (eps_b ** 2 - (vf * c) ** 2)

    def f_w(u, combine=lambda a, b: a - b):
        eps = u * E0
        xi = eta0 + eta1 * u
        xit = eta0 + eta1 * (u + w_hat)
        return eps * (eps + hw) * combine(_fi(xi, xit), e_beta * _fi(xit, xi))

    def f_v(u, combine=lambda a, b: a - b):
        eps = u * E0
        epst = eps + hw
        xi = eta0 + eta1 * u
        xit = eta0 + eta1 * (u + w_hat)
        term_emit = e_beta * combine(_f1(xit, xi) * g_kernel(epst, eps),
                                     _f2(xit, xi) * g_kernel(eps, epst))
        term_abs = combine(_f1(xi, xit) * g_kernel(eps, epst),
                           _f2(xi, xit) * g_kernel(epst, eps))
        return term_emit + term_abs

    plus = lambda a, b: abs(a) + abs(b)
    int_w, scale_w = _balanced_integral(model, f_w, lambda u: f_w(u, plus),
                                        mult, w_hat, spec)
    C_W = pref_w * int_w * E0
    if skip_momentum:
        lam = 0.0
    elif momentum_kernel == "golden-rule":
        nb = bose_occupation(hw, ch.T_L)
        coupling_eff = math.pi * ch.coupling / (ch.sigma * ch.omega)
        lam = _golden_rule_coefficient(model, mult, coupling_eff, hw, nb, e_beta, spec)
    else:
        int_v, _ = _balanced_integral(model, f_v, lambda u: f_v(u, plus),
                                      mult, w_hat, spec)
        lam = pref_v * int_v * E0
    return ProductionVector(0.0, C_W, lam * mult.eta2, abs(pref_w) * scale_w * E0)


def graphene_optical_production(model, mult, ch, spec=DEFAULT_SPEC,
                                momentum_kernel="standard", skip_momentum=False):
    """Gamma-point optical phonons (common LO/TO energy)."""
    _require(model, mult, graphene=True, what="graphene_optical_production")
    if not ch.hbar_omega > 0.0:
        raise DomainError("optical channel needs hbar_omega > 0")
    y = model.degeneracy_y
    vf = model.v_fermi
    nb = bose_occupation(ch.hbar_omega, ch.T_L)
    pref_w = (2.0 * y * ch.coupling * nb * ch.hbar_omega
              / (ch.sigma * ch.omega * vf ** 4 * HBAR ** 2))
    pref_v = (y * ch.coupling * nb
              / (4.0 * ch.sigma * ch.omega * math.pi * vf ** 2 * HBAR ** 2))
    return _graphene_inelastic(model, mult, ch, pref_w, pref_v, spec,
                               momentum_kernel, skip_momentum)


def graphene_k_production(model, mult, ch, spec=DEFAULT_SPEC,
                          momentum_kernel="standard", skip_momentum=False):
    """K-point optical phonons: same kernels as the Gamma channel with the
    energy-line prefactor D^2_K/2 in place of 2 D^2_Gamma."""
    _require(model, mult, graphene=True, what="graphene_k_production")
    if not ch.hbar_omega > 0.0:
        raise DomainError("K channel needs hbar_omega > 0")
    y = model.degeneracy_y
    vf = model.v_fermi
    nb = bose_occupation(ch.hbar_omega, ch.T_L)
    pref_w = (y * ch.coupling * nb * ch.hbar_omega
              / (2.0 * ch.sigma * ch.omega * vf ** 4 * HBAR ** 2))
    pref_v = (y * ch.coupling * nb
              / (4.0 * ch.sigma * ch.omega * math.pi * vf ** 2 * HBAR ** 2))
    return _graphene_inelastic(model, mult, ch, pref_w, pref_v, spec,
                               momentum_kernel, skip_momentum)


def production(model, mult, ch, spec=DEFAULT_SPEC, momentum_kernel="standard",
               skip_momentum=False):
    """Dispatch to the channel-specific production operation."""
    if ch.kind is ChannelKind.SILICON_OPTICAL:
        return silicon_optical_production(model, mult, ch, spec, momentum_kernel,
                                          skip_momentum)
    if ch.kind is ChannelKind.GRAPHENE_ACOUSTIC:
        return graphene_acoustic_production(model, mult, ch, spec)
    if ch.kind is ChannelKind.GRAPHENE_OPTICAL:
        return graphene_optical_production(model, mult, ch, spec, momentum_kernel,
                                           skip_momentum)
    return graphene_k_production(model, mult, ch, spec, momentum_kernel,
                                 skip_momentum)


def momentum_production_coefficient(model, mult, ch, spec=DEFAULT_SPEC,
                                    momentum_kernel="standard"):
    """Signed scalar lambda_ch with C_J = lambda_ch * eta2."""
    probe = type(mult)(mult.eta0, mult.eta1, np.ones(model.dim), mult.order)
    out = production(model, probe, ch, spec, momentum_kernel)
    return float(out.C_J[0])


def relaxation_time(model, mult, channels, spec=DEFAULT_SPEC,
                    momentum_kernel="standard"):
    """Momentum relaxation time tau > 0 from -J/tau = sum_ch C_J.

    Both J and every C_J are scalar multiples of eta2, so tau is a ratio of
    scalar coefficients and independent of the drift direction; channel
    rates add as magnitudes (Matthiessen)."""
    if not channels:
        raise UndefinedRelaxationError("no channels supplied")
    kappa, _ = j_coefficient(model, mult, spec)
    total = 0.0
    for ch in channels:
        total += abs(momentum_production_coefficient(model, mult, ch, spec,
                                                     momentum_kernel))
    if total == 0.0:
        raise UndefinedRelaxationError("total momentum production vanished")
    return kappa / total
