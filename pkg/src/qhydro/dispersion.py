"""Energy-band models and derived kinematic quantities.

Three isotropic bands are supported:

* Kane:      eps(1 + alpha*eps) = p^2/(2 m*), bounded group velocity
             v_inf = 1/sqrt(2 m* alpha);
* parabolic: the alpha = 0 special case (bit-identical code path);
* graphene:  eps = v_F sqrt(|p|^2 + c^2) in 2D, where c >= 0 is a
             momentum-gap parameter (eps >= v_F c; c = 0 is the gapless
             Dirac cone).

Because every band is isotropic, all momentum-space integrals used
downstream reduce to 1D energy integrals through the angularly integrated
density-of-states weight `dos_weight` plus the unit-sphere identities
<n_i n_j> = delta_ij / d and <odd powers of n> = 0.  The graphene weight is
obtained from the polar change of variables d p = 2 pi p dp with
p dp = eps deps / v_F^2, giving dos_weight = 2 pi eps / v_F^2 on
[v_F c, inf); this reproduces the closure integrals (the pi prefactors and
(eps^2 - v_F^2 c^2) kernels) used in the graphene moment relations.

Energies are nondimensionalized by kB*T_ref internally (the multiplier
conjugate to energy is then dimensionless); the public API takes and
returns SI.  The dimensionless knob `hbar_scale` multiplies all
second-order (hbar^2) corrections downstream; setting it to 0 recovers the
semiclassical model while the physical hbar inside the phase-space
prefactor y = g_s g_v/(2 pi hbar)^d is untouched.
"""

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import HBAR, KB
from .errors import DomainError

__all__ = ["BandKind", "DispersionModel"]


class BandKind(enum.Enum):
    KANE = "kane"
    PARABOLIC = "parabolic"
    GRAPHENE = "graphene"


@dataclass(frozen=True)
class DispersionModel:
    """A band model plus the phase-space and scaling data derived from it.

    Parameters are SI: m_star [kg], alpha [1/J], v_fermi [m/s],
    half_gap_c [kg m/s], T_ref [K] (nondimensionalization temperature,
    normally the lattice temperature).
    """

    kind: BandKind
    dim: int
    degeneracy_y: float          # g_s g_v / (2 pi hbar)^d  [1/(J s)^d]
    m_star: float = 0.0
    alpha: float = 0.0
    v_fermi: float = 0.0
    half_gap_c: float = 0.0
    T_ref: float = 300.0
    hbar_scale: float = 1.0

    # -- constructors -------------------------------------------------------

    @classmethod
    def kane(cls, m_star, alpha, g_spin=2.0, g_valley=6.0, T_ref=300.0, hbar_scale=1.0):
        if m_star <= 0.0 or alpha < 0.0:
            raise DomainError("Kane band needs m_star > 0 and alpha >= 0")
        y = g_spin * g_valley / (2.0 * math.pi * HBAR) ** 3
        kind = BandKind.PARABOLIC if alpha == 0.0 else BandKind.KANE
        return cls(kind=kind, dim=3, degeneracy_y=y, m_star=m_star, alpha=alpha,
                   T_ref=T_ref, hbar_scale=hbar_scale)

    @classmethod
    def parabolic(cls, m_star, g_spin=2.0, g_valley=6.0, T_ref=300.0, hbar_scale=1.0):
        return cls.kane(m_star, 0.0, g_spin, g_valley, T_ref, hbar_scale)

    @classmethod
    def graphene(cls, v_fermi, half_gap_c=0.0, g_spin=2.0, g_valley=2.0,
                 T_ref=300.0, hbar_scale=1.0):
        if v_fermi <= 0.0 or half_gap_c < 0.0:
            raise DomainError("graphene band needs v_fermi > 0 and half_gap_c >= 0")
        y = g_spin * g_valley / (2.0 * math.pi * HBAR) ** 2
        return cls(kind=BandKind.GRAPHENE, dim=2, degeneracy_y=y, v_fermi=v_fermi,
                   half_gap_c=half_gap_c, T_ref=T_ref, hbar_scale=hbar_scale)

    def with_hbar_scale(self, hbar_scale):
        return replace(self, hbar_scale=hbar_scale)

    # -- scaling helpers -----------------------------------------------------

    @property
    def energy_scale(self):
        """kB*T_ref [J]; energies are measured in this unit internally."""
        return KB * self.T_ref

    @property
    def band_min(self):
        """Lowest band energy [J]: 0 (Kane/parabolic) or v_F*c (graphene)."""
        if self.kind is BandKind.GRAPHENE:
            return self.v_fermi * self.half_gap_c
        return 0.0

    @property
    def is_graphene(self):
        return self.kind is BandKind.GRAPHENE

    # -- kinematics ----------------------------------------------------------

    def energy(self, p):
        """Band energy eps(p) [J] for a momentum d-vector (isotropic in |p|)."""
        p = np.asarray(p, dtype=float)
        if not np.all(np.isfinite(p)):
            raise DomainError("momentum must be finite")
        return self.energy_of_p_norm(float(np.linalg.norm(p)))

    def energy_of_p_norm(self, p_norm):
        if self.is_graphene:
            return self.v_fermi * math.hypot(p_norm, self.half_gap_c)
        k = p_norm * p_norm / (2.0 * self.m_star)
        # stable quadratic root: exact parabolic limit at alpha = 0
        return 2.0 * k / (1.0 + math.sqrt(1.0 + 4.0 * self.alpha * k))

    def group_velocity(self, p):
        """Group velocity v = grad_p eps [m/s]; parallel to p, |v| <= v_inf."""
        p = np.asarray(p, dtype=float)
        if not np.all(np.isfinite(p)):
            raise DomainError("momentum must be finite")
        pn = float(np.linalg.norm(p))
        if pn == 0.0:
            return np.zeros_like(p)
        if self.is_graphene:
            return self.v_fermi / math.hypot(pn, self.half_gap_c) * p
        eps = self.energy_of_p_norm(pn)
        return p / (self.m_star * (1.0 + 2.0 * self.alpha * eps))

    def speed_bound(self):
        """v_inf = 1/sqrt(2 m* alpha), v_F for graphene, inf for parabolic."""
        if self.is_graphene:
            return self.v_fermi
        if self.alpha == 0.0:
            return math.inf
        return 1.0 / math.sqrt(2.0 * self.m_star * self.alpha)

    # -- energy-space kernels (all take eps in J) -----------------------------

    def dos_weight(self, eps):
        """Angularly integrated momentum measure per unit energy.

        Kane:     4 pi (m*)^(3/2) (1+2 a eps) sqrt(2 eps (1+a eps));
        graphene: 2 pi eps / v_F^2 on eps >= v_F c.
        """
        if eps < self.band_min - 1e-30:
            raise DomainError("energy below band minimum")
        eps = max(eps, self.band_min)
        if self.is_graphene:
            return 2.0 * math.pi * eps / self.v_fermi ** 2
        a = self.alpha
        return (4.0 * math.pi * self.m_star ** 1.5
                * (1.0 + 2.0 * a * eps)
                * math.sqrt(2.0 * eps * (1.0 + a * eps)))

    def p_of_energy(self, eps):
        """|p|(eps) [kg m/s] on the band."""
        eps = max(eps, self.band_min)
        if self.is_graphene:
            arg = (eps / self.v_fermi) ** 2 - self.half_gap_c ** 2
            return math.sqrt(max(arg, 0.0))
        return math.sqrt(2.0 * self.m_star * eps * (1.0 + self.alpha * eps))

    def speed_of_energy(self, eps):
        """|v|(eps) [m/s]."""
        eps = max(eps, self.band_min)
        if self.is_graphene:
            return self.v_fermi ** 2 * self.p_of_energy(eps) / eps
        a = self.alpha
        return math.sqrt(2.0 * eps * (1.0 + a * eps) / self.m_star) / (1.0 + 2.0 * a * eps)

    def dvdp_radial(self, eps):
        """d^2 eps / dp^2 along the radial direction."""
        eps = max(eps, self.band_min)
        if self.is_graphene:
            ptilde = eps / self.v_fermi
            return self.v_fermi * self.half_gap_c ** 2 / ptilde ** 3
        a = self.alpha
        g = 1.0 + 2.0 * a * eps
        p2 = 2.0 * self.m_star * eps * (1.0 + a * eps)
        return 1.0 / (self.m_star * g) - 2.0 * a * p2 / (self.m_star ** 2 * g ** 3)

    def dvdp_transverse(self, eps):
        """|v|/|p|: the transverse eigenvalue of grad_p v."""
        eps = max(eps, self.band_min)
        if self.is_graphene:
            return self.v_fermi ** 2 / eps
        return 1.0 / (self.m_star * (1.0 + 2.0 * self.alpha * eps))

    def grad_v_iso(self, eps):
        """(1/d) tr(grad_p v): the isotropic weight of the velocity gradient."""
        d = self.dim
        return (self.dvdp_radial(eps) + (d - 1) * self.dvdp_transverse(eps)) / d
