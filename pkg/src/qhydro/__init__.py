"""Maximum-entropy moment closures for Wigner-equation charge transport.

Semiclassical constraint inversion, hbar^2-order quantum corrections,
electron-phonon production terms and quantum-corrected mobilities for
Kane-band semiconductors and graphene.
"""

from .closure import (ClosureFluxes, InversionResult, MomentVector,
                      Multipliers, Order, closure_fluxes, compatibility_bound,
                      constraints_forward, invert_constraints, j_coefficient,
                      jacobian_2x2, newton_invert)
from .collisions import (ChannelKind, PhononChannel, ProductionVector,
                         graphene_acoustic_production, graphene_k_production,
                         graphene_optical_production, production,
                         relaxation_time, silicon_optical_production)
from .dispersion import BandKind, DispersionModel
from .errors import (CompatibilityWarning, ConditioningError, DomainError,
                     GridAccuracyWarning, NonConvergenceError, QhydroError,
                     QuadratureConvergenceError, UndefinedRelaxationError,
                     UnrealizableMomentsError)
from .quadrature import (QuadratureSpec, bose_occupation, fermi_integral,
                         integrate_semi_infinite)
from .second_order import (Boundary, MultiplierField1D, SecondOrderRHS,
                           Xi0Jet, invert_second_order, psi_moments,
                           second_order_moments, w2_pointwise)
from .transport import (BulkState, MobilityResult, Trajectory,
                        mobility_second, mobility_zeroth, relax_to_steady)

__version__ = "0.1.0"
