"""Independent numerical oracles shared by the test modules.

Everything here deliberately avoids the production code paths: fixed-grid
Richardson (Romberg) integration instead of adaptive QUADPACK, Cartesian
tensor-grid momentum quadrature instead of the 1D density-of-states
reduction, and mpmath polylogarithms for the Fermi-Dirac integrals.
"""

import mpmath as mp
import numpy as np

mp.mp.dps = 30


# ---------------------------------------------------------------------------
# fixed-grid Romberg integration on [0, upper] with Richardson extrapolation
# ---------------------------------------------------------------------------

def romberg(f, a, b, levels=14):
    """Romberg table on [a, b]; independent of adaptive quadrature."""
    r = []
    h = b - a
    fa, fb = f(a), f(b)
    r.append([0.5 * h * (fa + fb)])
    total = 0.5 * (fa + fb)
    n = 1
    for k in range(1, levels + 1):
        h *= 0.5
        n *= 2
        xs = a + h * np.arange(1, n, 2)
        total += sum(f(x) for x in xs)
        row = [h * total]
        for m in range(1, k + 1):
            row.append(row[m - 1] + (row[m - 1] - r[k - 1][m - 1]) / (4 ** m - 1))
        r.append(row)
        if k > 4 and abs(r[k][k] - r[k - 1][k - 1]) < 1e-13 * (abs(r[k][k]) + 1e-300):
            break
    return r[-1][-1]


def semi_infinite_oracle(f, lower, decay_scale, splits=(), levels=14):
    """Integrate f on [lower, inf) by Romberg over splits + a mapped tail.

    `decay_scale` sets where the exponential tail is truncated/mapped.
    """
    pts = sorted([lower, *[s for s in splits if s > lower]])
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += romberg(f, a, b, levels)
    a = pts[-1]
    # map [a, inf) -> [0, 1) via x = a + decay_scale * t/(1-t)
    def g(t):
        if t >= 1.0:
            return 0.0
        x = a + decay_scale * t / (1.0 - t)
        return f(x) * decay_scale / (1.0 - t) ** 2
    total += romberg(g, 0.0, 1.0 - 1e-12, levels)
    return total


# ---------------------------------------------------------------------------
# Fermi-Dirac integrals via polylogarithm (analytic continuation oracle)
# ---------------------------------------------------------------------------

def fermi_integral_ref(k, eta):
    """F_k(eta) = -Li_{k+1}(-e^eta), к > -1."""
    val = -mp.polylog(k + 1, -mp.exp(eta))
    return float(mp.re(val))


# ---------------------------------------------------------------------------
# Cartesian momentum-space tensor-grid quadrature (independent of the
# density-of-states reduction)
# ---------------------------------------------------------------------------

def momentum_grid_integral(model, fn, p_max, n_nodes=181):
    """integral of fn(p_vec) over R^d via a tensor trapezoid grid.

    fn must vectorize over a (..., d) stack of momenta and decay well
    inside |p_i| < p_max.
    """
    axis = np.linspace(-p_max, p_max, n_nodes)
    w = np.full(n_nodes, axis[1] - axis[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    if model.dim == 2:
        px, py = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([px, py], axis=-1)
        weights = np.einsum("i,j->ij", w, w)
    else:
        px, py, pz = np.meshgrid(axis, axis, axis, indexing="ij")
        pts = np.stack([px, py, pz], axis=-1)
        weights = np.einsum("i,j,k->ijk", w, w, w)
    return float(np.sum(fn(pts) * weights))


def energies_vec(model, pts):
    """Vectorized band energy for a (..., d) momentum stack."""
    pn = np.linalg.norm(pts, axis=-1)
    if model.is_graphene:
        return model.v_fermi * np.hypot(pn, model.half_gap_c)
    kin = pn ** 2 / (2.0 * model.m_star)
    return 2.0 * kin / (1.0 + np.sqrt(1.0 + 4.0 * model.alpha * kin))


def thermal_p(model, factor=1.0):
    """A momentum scale ~ factor * p(E0) used to size grids."""
    return model.p_of_energy(model.band_min + factor * model.energy_scale)


def central_diff(f, x, h):
    return (f(x + h) - f(x - h)) / (2.0 * h)
