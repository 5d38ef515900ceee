"""Batch driver: TOML config in, CSV tables out.

Verbs:

    qhydro invert     --config cfg.toml [--output out.csv] [--threads N]
    qhydro mobility   --config cfg.toml ...
    qhydro relax      --config cfg.toml ...
    qhydro production --config cfg.toml ...

Exit codes: 0 all sweep points converged, 1 some points flagged,
2 unreadable/invalid configuration.

All physical inputs are eV / K / SI (see README for the config schema);
output CSV is UTF-8, '.' decimal separator, scientific notation with 12
significant digits, with a leading `# schema=1` comment.  Sweep points are
dispatched to a thread pool and written back in sweep order, so output is
deterministic for a given config regardless of scheduling.

Multiplier fields for gradient-corrected runs load from CSV through
MultiplierField1D.from_csv: columns x, eta0, eta1, eta2_* on a uniform,
strictly increasing grid of at least 5 points ('#' comment lines allowed).
"""

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                     # Python < 3.11
    import tomli as tomllib

from .closure import (MomentVector, Multipliers, Order, constraints_forward,
                      newton_invert)
from .collisions import PhononChannel, production, relaxation_time
from .constants import EV, M_E
from .dispersion import DispersionModel
from .errors import QhydroError
from .quadrature import QuadratureSpec
from .second_order import SecondOrderRHS, invert_second_order
from .transport import BulkState, mobility_second, relax_to_steady

__all__ = ["RunConfig", "load_config", "run_invert", "run_mobility_sweep",
           "run_relax", "run_production_table", "main"]

_SCHEMA_HEADER = "# schema=1"

MATERIAL_PRESETS = {
    "silicon-kane": dict(kind="kane", m_star_rel=0.32, alpha_per_ev=0.5,
                         g_spin=2.0, g_valley=6.0),
    "silicon-parabolic": dict(kind="kane", m_star_rel=0.32, alpha_per_ev=0.0,
                              g_spin=2.0, g_valley=6.0),
    "graphene": dict(kind="graphene", v_fermi=1.0e6, half_gap_ev=0.0,
                     g_spin=2.0, g_valley=2.0),
    "graphene-gapped": dict(kind="graphene", v_fermi=1.0e6, half_gap_ev=0.026,
                            g_spin=2.0, g_valley=2.0),
}

CHANNEL_PRESETS = {
    "silicon-optical": dict(kind="silicon-optical", dtk_ev_per_m=8.0e10,
                            rho=2330.0, hbar_omega_ev=0.0612, z_if=6.0),
    "graphene-acoustic": dict(kind="graphene-acoustic", d_ac_ev=6.8,
                              v_ac=2.1e4, sigma=7.6e-7),
    "graphene-optical": dict(kind="graphene-optical", d_ev_per_m=1.0e11,
                             sigma=7.6e-7, hbar_omega_ev=0.196),
    "graphene-k": dict(kind="graphene-k", d_ev_per_m=3.5e10,
                       sigma=7.6e-7, hbar_omega_ev=0.161),
}


class ConfigError(QhydroError):
    pass


@dataclass
class RunConfig:
    model: DispersionModel
    channels: list
    quadrature: QuadratureSpec
    hbar_scale: float
    output_path: str
    momentum_kernel: str
    raw: dict = field(default_factory=dict)


def _build_model(sec, hbar_scale):
    params = {}
    preset = sec.get("preset")
    if preset is not None:
        if preset not in MATERIAL_PRESETS:
            raise ConfigError(f"unknown material preset {preset!r}")
        params.update(MATERIAL_PRESETS[preset])
    params.update({k: v for k, v in sec.items() if k != "preset"})
    T_L = float(params.get("T_lattice", 300.0))
    kind = params.get("kind")
    if kind == "graphene":
        v_f = float(params["v_fermi"])
        c = float(params.get("half_gap_ev", 0.0)) * EV / v_f
        return DispersionModel.graphene(v_f, c, params.get("g_spin", 2.0),
                                        params.get("g_valley", 2.0), T_L, hbar_scale)
    if kind == "kane":
        m_star = float(params["m_star_rel"]) * M_E
        alpha = float(params.get("alpha_per_ev", 0.0)) / EV
        return DispersionModel.kane(m_star, alpha, params.get("g_spin", 2.0),
                                    params.get("g_valley", 6.0), T_L, hbar_scale)
    raise ConfigError(f"unknown material kind {kind!r}")


def _build_channel(sec, T_L):
    params = {}
    preset = sec.get("preset")
    if preset is not None:
        if preset not in CHANNEL_PRESETS:
            raise ConfigError(f"unknown channel preset {preset!r}")
        params.update(CHANNEL_PRESETS[preset])
    params.update({k: v for k, v in sec.items() if k != "preset"})
    kind = params.get("kind")
    T = float(params.get("T_L", T_L))
    if kind == "silicon-optical":
        return PhononChannel.silicon_optical(
            dtk=float(params["dtk_ev_per_m"]) * EV,
            rho=float(params["rho"]),
            hbar_omega=float(params["hbar_omega_ev"]) * EV,
            z_if=float(params.get("z_if", 1.0)), T_L=T)
    if kind == "graphene-acoustic":
        return PhononChannel.graphene_acoustic(
            d_ac=float(params["d_ac_ev"]) * EV, v_ac=float(params["v_ac"]),
            sigma=float(params["sigma"]), T_L=T)
    if kind == "graphene-optical":
        return PhononChannel.graphene_optical(
            d_sq=(float(params["d_ev_per_m"]) * EV) ** 2,
            sigma=float(params["sigma"]),
            hbar_omega=float(params["hbar_omega_ev"]) * EV, T_L=T)
    if kind == "graphene-k":
        return PhononChannel.graphene_k(
            d_sq=(float(params["d_ev_per_m"]) * EV) ** 2,
            sigma=float(params["sigma"]),
            hbar_omega=float(params["hbar_omega_ev"]) * EV, T_L=T)
    raise ConfigError(f"unknown channel kind {kind!r}")


def load_config(path, hbar_scale_override=None, output_override=None):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        hbar_scale = float(raw.get("hbar_scale", 1.0))
        if hbar_scale_override is not None:
            hbar_scale = hbar_scale_override
        model = _build_model(raw.get("material", {}), hbar_scale)
        channels = [_build_channel(sec, model.T_ref)
                    for sec in raw.get("channels", [])]
        qsec = raw.get("quadrature", {})
        quad = QuadratureSpec(
            rel_tol=float(qsec.get("rel_tol", 1e-10)),
            abs_tol=float(qsec.get("abs_tol", 1e-14)),
            max_subdivisions=int(qsec.get("max_subdivisions", 200)),
            truncation_margin=float(qsec.get("truncation_margin", 30.0)))
        out = raw.get("output", {}).get("path", "out.csv")
        if output_override is not None:
            out = output_override
        kernel = raw.get("momentum_kernel", "standard")
        if kernel not in ("standard", "golden-rule"):
            raise ConfigError(f"unknown momentum_kernel {kernel!r}")
        return RunConfig(model, channels, quad, hbar_scale, out, kernel, raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


# ---------------------------------------------------------------------------
# sweeps and CSV plumbing
# ---------------------------------------------------------------------------

def _sweep_values(cfg, default_param):
    sec = cfg.raw.get("sweep")
    if sec is None:
        return default_param, [None]
    count = int(sec.get("count", 1))
    if count < 1:
        raise ConfigError("sweep count must be >= 1")
    lo = float(sec["min"])
    hi = float(sec.get("max", lo))
    scale = sec.get("scale", "linear")
    if count == 1:
        vals = [lo]
    elif scale == "log":
        vals = list(np.geomspace(lo, hi, count))
    else:
        vals = list(np.linspace(lo, hi, count))
    return sec.get("parameter", default_param), vals


def _fmt(x):
    return f"{x + 0.0:.12e}"     # +0.0 folds -0.0 into a clean zero


def _write_csv(path, columns, rows, comments=()):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_SCHEMA_HEADER + "\n")
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _run_pool(worker, points, threads):
    if threads <= 1:
        return [worker(p) for p in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, points))


def _state_section(cfg):
    sec = dict(cfg.raw.get("state", {}))
    sec.setdefault("eta0", -2.0)
    sec.setdefault("eta1", 1.0)
    sec.setdefault("eta2", [0.0] * cfg.model.dim)
    return sec


def _multipliers_at(cfg, param, value):
    sec = _state_section(cfg)
    if value is not None:
        if param not in ("eta0", "eta1"):
            raise ConfigError(f"unsupported sweep parameter {param!r} here")
        sec[param] = value
    eta2 = np.asarray(sec["eta2"], dtype=float)
    return Multipliers(float(sec["eta0"]), float(sec["eta1"]), eta2)


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def run_invert(cfg, threads=1):
    """Invert (n, W, J) targets for multipliers; one CSV row per point."""
    model = cfg.model
    d = model.dim
    base = dict(cfg.raw.get("invert", {}))
    param, values = _sweep_values(cfg, "mean_energy_ev")

    def target_at(value):
        sec = dict(base)
        if value is not None:
            sec[param] = value
        n = float(sec.get("n", 1e23 if d == 3 else 1e16))
        mean_ev = float(sec.get("mean_energy_ev", 0.04))
        J = np.asarray(sec.get("j", [0.0] * d), dtype=float)
        return n, mean_ev, J

    def worker(value):
        n, mean_ev, J = target_at(value)
        try:
            target = MomentVector(n, n * mean_ev * EV, J)
            res = newton_invert(model, target, spec=cfg.quadrature)
            m = res.multipliers
            return (1, [n, mean_ev, m.eta0, m.eta1,
                        *[float(x) for x in m.eta2],
                        res.residual, float(res.iterations)])
        except QhydroError:
            return (0, [n, mean_ev, math.nan, math.nan,
                        *[math.nan] * d, math.nan, 0.0])

    results = _run_pool(worker, values, threads)
    cols = (["n", "mean_energy_ev", "eta0", "eta1"]
            + [f"eta2_{i}" for i in range(d)]
            + ["residual", "newton_iterations", "converged"])
    rows = [vals + [float(ok)] for ok, vals in results]
    _write_csv(cfg.output_path, cols, rows, [f"verb=invert sweep={param}"])
    return 0 if all(ok for ok, _ in results) else 1


def run_production_table(cfg, threads=1):
    """Channel production terms over a multiplier sweep.

    The detailed-balance column reports C_W at lattice-equilibrium eta1
    normalized by the emission+absorption magnitude; it must vanish for
    every inelastic channel.
    """
    model = cfg.model
    if not cfg.channels:
        raise ConfigError("production table needs at least one channel")
    param, values = _sweep_values(cfg, "eta0")

    def worker(value):
        try:
            mult = _multipliers_at(cfg, param, value)
            row = [mult.eta0, mult.eta1]
            for ch in cfg.channels:
                out = production(model, mult, ch, cfg.quadrature,
                                 cfg.momentum_kernel)
                # lattice equilibrium for this channel's bath temperature
                eq = Multipliers(mult.eta0, model.T_ref / ch.T_L, mult.eta2)
                bal = production(model, eq, ch, cfg.quadrature,
                                 cfg.momentum_kernel, skip_momentum=True)
                detbal = bal.C_W / bal.C_W_scale if bal.C_W_scale > 0.0 else 0.0
                row += [out.C_n, out.C_W, *[float(x) for x in out.C_J], detbal]
            return (1, row)
        except QhydroError:
            per = 3 + model.dim
            return (0, [math.nan] * (2 + per * len(cfg.channels)))

    results = _run_pool(worker, values, threads)
    cols = ["eta0", "eta1"]
    for k, ch in enumerate(cfg.channels):
        tag = f"ch{k}_{ch.kind.value}"
        cols += [f"{tag}_C_n", f"{tag}_C_W"]
        cols += [f"{tag}_C_J_{i}" for i in range(model.dim)]
        cols += [f"{tag}_detailed_balance"]
    _write_csv(cfg.output_path, cols + ["converged"],
               [vals + [float(ok)] for ok, vals in results],
               [f"verb=production sweep={param}"])
    return 0 if all(ok for ok, _ in results) else 1


def run_mobility_sweep(cfg, threads=1):
    """tau, mu0, mu2 and total mobility over a multiplier sweep."""
    model = cfg.model
    if not cfg.channels:
        raise ConfigError("mobility sweep needs at least one channel")
    param, values = _sweep_values(cfg, "eta0")
    second = dict(cfg.raw.get("second_order", {}))
    n2_frac = float(second.get("n2_fraction", 0.0))
    w2_frac = float(second.get("w2_fraction", 0.0))
    scale2 = cfg.hbar_scale ** 2

    def worker(value):
        try:
            mult = _multipliers_at(cfg, param, value)
            mv = constraints_forward(model, mult, cfg.quadrature)
            tau = relaxation_time(model, mult, cfg.channels, cfg.quadrature,
                                  cfg.momentum_kernel)
            n2 = scale2 * n2_frac * mv.n
            W2 = scale2 * w2_frac * mv.W
            target2 = MomentVector(n2, W2, np.zeros(model.dim), Order.SECOND)
            mult2 = invert_second_order(model, mult, target2,
                                        SecondOrderRHS.zero(model.dim),
                                        cfg.quadrature)
            mob = mobility_second(model, mult, mult2, mv.n, n2, tau,
                                  spec=cfg.quadrature)
            mu0 = float(mob.mu0[0, 0])
            mu2 = float(mob.mu2[0, 0])
            return (1, [mult.eta0, mult.eta1, mv.n, tau, mu0, mu2,
                        mu0 + mu2, abs(mu0 + mu2)])
        except QhydroError:
            return (0, [math.nan] * 8)

    results = _run_pool(worker, values, threads)
    cols = ["eta0", "eta1", "n", "tau", "mu0", "mu2", "mu_total",
            "mu_total_abs", "converged"]
    _write_csv(cfg.output_path, cols,
               [vals + [float(ok)] for ok, vals in results],
               [f"verb=mobility sweep={param}",
                f"hbar_scale={cfg.hbar_scale:g}",
                "sign convention: electron number-flux mobility, "
                "J = n mu E with E = -grad(potential)"])
    return 0 if all(ok for ok, _ in results) else 1


def run_relax(cfg, threads=1):
    """Relaxation trajectory CSV: t, moments, multiplier snapshot, tau."""
    model = cfg.model
    if not cfg.channels:
        raise ConfigError("relaxation needs at least one channel")
    sec = dict(cfg.raw.get("relax", {}))
    mult = _multipliers_at(cfg, None, None)
    if "eta1_start" in sec:
        mult = Multipliers(mult.eta0, float(sec["eta1_start"]), mult.eta2)
    mv = constraints_forward(model, mult, cfg.quadrature)
    E = np.asarray(sec.get("field", [0.0] * model.dim), dtype=float)
    zero2 = MomentVector(0.0, 0.0, np.zeros(model.dim), Order.SECOND)
    init = BulkState(mv, zero2, E, 0.0)
    traj = relax_to_steady(
        model, cfg.channels, init,
        dt=float(sec.get("dt", 1e-15)), t_max=float(sec.get("t_max", 1e-10)),
        spec=cfg.quadrature, steady_tol=float(sec.get("steady_tol", 1e-8)),
        rel_tol=float(sec.get("rel_tol", 1e-6)),
        momentum_kernel=cfg.momentum_kernel)
    d = model.dim
    cols = (["t", "n", "W"] + [f"J_{i}" for i in range(d)]
            + ["eta0", "eta1"] + [f"eta2_{i}" for i in range(d)] + ["tau"])
    rows = []
    for s in traj.states:
        m = s.multipliers
        rows.append([s.time, s.moments0.n, s.moments0.W,
                     *[float(x) for x in s.moments0.J],
                     m.eta0, m.eta1, *[float(x) for x in m.eta2], s.tau])
    _write_csv(cfg.output_path, cols, rows,
               [f"verb=relax reached_steady={traj.reached_steady}"])
    return 0 if traj.reached_steady else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="qhydro",
        description="Maximum-entropy moment closures and quantum-corrected "
                    "mobilities for Kane-band and graphene transport")
    parser.add_argument("verb", choices=["invert", "mobility", "relax",
                                         "production"])
    parser.add_argument("--config", required=True)
    parser.add_argument("--output", default=None)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--hbar-scale", type=float, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.hbar_scale, args.output)
        runner = {"invert": run_invert, "mobility": run_mobility_sweep,
                  "relax": run_relax, "production": run_production_table}[args.verb]
        return runner(cfg, threads=max(args.threads, 1))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except QhydroError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
