"""Experiment runner.

Subcommands bind the library modules behind JSON configs with
machine-readable outputs:

    gcwaves dno-test       --config cfg.json --out results/
    gcwaves resonance-scan --config cfg.json --out results/
    gcwaves evolve         --config cfg.json --out results/
    gcwaves nf-lifetime    --config cfg.json --out results/
    gcwaves symbol-check   --config cfg.json --out results/

Every run writes manifest.json echoing the fully resolved configuration
(the only timestamp lives there), then the experiment's CSV/JSON artifacts
with fixed float formatting, so identical configs give byte-identical
files.  Exit codes: 0 all checks passed, 1 a check failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

USAGE_ERROR = 2
CHECK_FAILED = 1


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "dno-test": {
        "g": 1.0, "kappa": None, "M": 128, "J": 64,
        "constant_lift": 0.1, "epsilon": 0.02, "seed_mode": 2,
        "tol_flat": 1e-10, "tol_selfadj": 1e-8, "tol_mean": 1e-10,
    },
    "resonance-scan": {
        "g": 1.0, "kappa_grid": None, "p_max": 1, "n_sum_max": 50,
        "wilton_pairs": [[1, 1], [1, 2]],
    },
    "evolve": {
        "g": 1.0, "kappa": None, "M": 32, "J": 24,
        "profile": "single_mode", "mode": 1, "epsilon": 1e-3, "seed": 0,
        "decay": 0.5, "T": 1.0, "dt": 2e-3, "cadence": 10, "norm_s": 2.0,
    },
    "nf-lifetime": {
        "kappa": None, "p": 2, "ell": 2, "a": 3.5, "cutoff": 8,
        "eps_list": [0.1, 0.05, 0.025], "s": 7.0, "dt": 4e-3, "T_max": 60.0,
    },
    "symbol-check": {
        "M": 64, "delta": 0.4, "n_pairs": 20, "seed": 0,
    },
}


def _resolve_config(name: str, path: str | None, overrides: list[str]) -> dict:
    cfg = dict(DEFAULTS[name])
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        unknown = set(user) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {name}: {sorted(unknown)}")
        cfg.update(user)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        if key not in cfg:
            raise ConfigError(f"unknown override key {key!r} for {name}")
        try:
            cfg[key] = json.loads(raw)
        except json.JSONDecodeError:
            cfg[key] = raw
    missing = [k for k, v in cfg.items() if v is None]
    if missing:
        raise ConfigError(f"missing required config keys for {name}: {missing}")
    return cfg


def _write(outdir: Path, fname: str, text: str, quiet: bool):
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / fname).write_text(text)
    if not quiet:
        print(f"wrote {outdir / fname}")


def _manifest(outdir: Path, name: str, cfg: dict, results: dict, quiet: bool):
    from . import __version__, BACKEND
    payload = {
        "subcommand": name,
        "config": cfg,
        "results": results,
        "package_version": __version__,
        "kernel_backend": BACKEND,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    _write(outdir, "manifest.json", json.dumps(payload, indent=1, sort_keys=True), quiet)


# -- subcommands -----------------------------------------------------------------

def cmd_dno_test(cfg: dict, outdir: Path, quiet: bool) -> int:
    from .dispersion import PhysParams
    from .dno import DNOConfig, dirichlet_neumann, dn_flattened_top_route
    from .fields import SpectralGrid, cosine_field, field_from_samples, zero_field, linf_norm
    from .dynamics import _integral_product

    grid = SpectralGrid(int(cfg["M"]))
    dcfg = DNOConfig(J=int(cfg["J"]))
    checks = []

    psi = cosine_field(grid, int(cfg["seed_mode"]))
    n = int(cfg["seed_mode"])
    flat = dirichlet_neumann(zero_field(grid), psi, dcfg)
    want = n * np.tanh(n)
    err_flat = float(np.max(np.abs(flat.samples - want * np.cos(n * grid.x))) / want)
    checks.append(("flat_exactness", err_flat, cfg["tol_flat"]))

    c = float(cfg["constant_lift"])
    etac = field_from_samples(np.full(grid.M, c), grid, mean_convention="free")
    gc = dirichlet_neumann(etac, cosine_field(grid, 1), dcfg)
    wantc = np.tanh(1.0 + c)
    err_const = float(np.max(np.abs(gc.samples - wantc * np.cos(grid.x))) / wantc)
    checks.append(("constant_lift", err_const, cfg["tol_flat"]))

    eps = float(cfg["epsilon"])
    eta = field_from_samples(eps * np.cos(grid.x), grid, mean_convention="zero_mean")
    p1 = cosine_field(grid, 1) + 0.5 * cosine_field(grid, 3)
    p2 = cosine_field(grid, 2) + 0.25 * cosine_field(grid, 4)
    g1 = dirichlet_neumann(eta, p1, dcfg)
    g2 = dirichlet_neumann(eta, p2, dcfg)
    sym = abs(_integral_product(p1, g2) - _integral_product(p2, g1))
    scale = max(abs(_integral_product(p1, g2)), 1e-30)
    checks.append(("self_adjointness", sym / scale, cfg["tol_selfadj"]))

    _, _, diag = dirichlet_neumann(eta, p1, dcfg, with_diagnostics=True)
    checks.append(("zero_mean", diag["mean_before_projection"], cfg["tol_mean"]))

    dual = dn_flattened_top_route(eta, p1, dcfg, h=0.005)
    err_dual = float(np.max(np.abs(dual.samples - g1.samples))
                     / max(np.max(np.abs(g1.samples)), 1e-30))
    checks.append(("dual_route", err_dual, 1e-6))

    rows = "check,value,tolerance,pass\n" + "".join(
        f"{name},{val:.17e},{tol:.3e},{int(val < tol)}\n" for name, val, tol in checks)
    _write(outdir, "dno_checks.csv", rows, quiet)
    ok = all(val < tol for _, val, tol in checks)
    results = {name: {"value": val, "tol": tol, "pass": bool(val < tol)}
               for name, val, tol in checks}
    _manifest(outdir, "dno-test", cfg, results, quiet)
    if not ok and not quiet:
        first = next(name for name, val, tol in checks if not val < tol)
        print(f"FAILED: {first}", file=sys.stderr)
    return 0 if ok else CHECK_FAILED


def cmd_resonance_scan(cfg: dict, outdir: Path, quiet: bool) -> int:
    from .dispersion import PhysParams, scan_nonresonance, find_wilton_kappa

    grid = cfg["kappa_grid"]
    if isinstance(grid, dict):
        grid = np.linspace(grid["start"], grid["stop"], int(grid["num"])).tolist()
    if not grid:
        raise ConfigError("kappa_grid is empty")
    params = PhysParams(float(cfg["g"]), float(grid[0]))
    report = scan_nonresonance(params, int(cfg["p_max"]), int(cfg["n_sum_max"]), grid)
    _write(outdir, "resonance.csv", report.to_csv(), quiet)
    _write(outdir, "resonance.json", report.to_json(), quiet)
    roots = {}
    for a, b in cfg["wilton_pairs"]:
        r = find_wilton_kappa(int(a), int(b), params)
        roots[f"{a},{b}"] = r
    _manifest(outdir, "resonance-scan", cfg, {"wilton_roots": roots,
                                              "rows": len(report.rows)}, quiet)
    return 0


def _seed_state(cfg, grid, params):
    from .fields import cosine_field, random_even_field, zero_field
    from .dynamics import WaveState
    eps = float(cfg["epsilon"])
    profile = cfg["profile"]
    if profile == "single_mode":
        eta = eps * cosine_field(grid, int(cfg["mode"]))
        psi = zero_field(grid, "mod_constants")
    elif profile == "two_mode":
        eta = eps * cosine_field(grid, int(cfg["mode"]))
        psi = eps * cosine_field(grid, int(cfg["mode"]) + 1)
    elif profile == "random_even":
        eta = eps * random_even_field(grid, int(cfg["seed"]), float(cfg["decay"]))
        psi = eps * random_even_field(grid, int(cfg["seed"]) + 1, float(cfg["decay"]))
    else:
        raise ConfigError(f"unknown profile {profile!r}")
    return WaveState(eta, psi.with_mean_convention("mod_constants"), 0.0, params)


def cmd_evolve(cfg: dict, outdir: Path, quiet: bool) -> int:
    from .dispersion import PhysParams
    from .dno import DNOConfig
    from .dynamics import IntegratorConfig, evolve
    from .fields import SpectralGrid

    grid = SpectralGrid(int(cfg["M"]))
    params = PhysParams(float(cfg["g"]), float(cfg["kappa"]))
    state = _seed_state(cfg, grid, params)
    icfg = IntegratorConfig(dt=float(cfg["dt"]), cadence=int(cfg["cadence"]),
                            norm_s=float(cfg["norm_s"]))
    traj = evolve(state, float(cfg["T"]), icfg, DNOConfig(J=int(cfg["J"])),
                  keep_states=False)
    _write(outdir, "trajectory.csv", traj.to_csv(), quiet)
    _manifest(outdir, "evolve", cfg, {
        "aborted": traj.aborted, "abort_reason": traj.abort_reason,
        "mass_drift_max": traj.mass_drift_max,
        "rows": int(len(traj.rows)),
    }, quiet)
    return 0 if not traj.aborted else CHECK_FAILED


def cmd_nf_lifetime(cfg: dict, outdir: Path, quiet: bool) -> int:
    from .fields import cosine_field
    from .normalform import (ModelSpec, model_grid, nf_lifetime_compare,
                             lifetime_rows_csv)

    spec = ModelSpec(kappa=float(cfg["kappa"]), p=int(cfg["p"]), ell=int(cfg["ell"]),
                     a=float(cfg["a"]), cutoff=int(cfg["cutoff"]))
    grid = model_grid(spec)
    seed = cosine_field(grid, 1)
    res = nf_lifetime_compare(spec, [float(e) for e in cfg["eps_list"]], seed,
                              s=float(cfg["s"]), dt=float(cfg["dt"]),
                              T_max=float(cfg["T_max"]))
    _write(outdir, "nf_lifetime.csv", lifetime_rows_csv(res), quiet)
    _manifest(outdir, "nf-lifetime", cfg, {
        "slope_raw": res["slope_raw"], "slope_transformed": res["slope_transformed"],
    }, quiet)
    return 0


def cmd_symbol_check(cfg: dict, outdir: Path, quiet: bool) -> int:
    from .cutoff import CutoffProfile
    from .fields import SpectralGrid, random_even_field, cosine_field, l2_norm
    from .symbols import SymbolObject, SymbolTerm, op_bw_apply, xifun

    grid = SpectralGrid(int(cfg["M"]))
    cut = CutoffProfile(float(cfg["delta"]))
    rng = np.random.RandomState(int(cfg["seed"]))
    worst_conj = worst_adj = 0.0
    for k in range(int(cfg["n_pairs"])):
        f = random_even_field(grid, int(rng.randint(1, 10**6)), 0.6)
        gfam = [xifun("tanh_xi"), xifun("xi_pow", 1), xifun("sech_profile")][k % 3]
        sym = SymbolObject(grid, terms=[SymbolTerm(f, gfam)], order=gfam.order)
        u = random_even_field(grid, int(rng.randint(1, 10**6)), 0.5,
                              complex_valued=True)
        lhs = op_bw_apply(sym, u, cut).conj()
        rhs = op_bw_apply(sym.bar_vee(), u.conj(), cut)
        scale = max(l2_norm(lhs), 1e-30)
        worst_conj = max(worst_conj, l2_norm(lhs - rhs) / scale)
        # self-adjointness of real-valued symbols
        v = random_even_field(grid, int(rng.randint(1, 10**6)), 0.5)
        w = random_even_field(grid, int(rng.randint(1, 10**6)), 0.5)
        av = op_bw_apply(sym, v, cut)
        aw = op_bw_apply(sym, w, cut)
        ip1 = np.vdot(av.coeffs, w.coeffs)
        ip2 = np.vdot(v.coeffs, aw.coeffs)
        scale = max(np.linalg.norm(av.coeffs) * np.linalg.norm(w.coeffs), 1e-30)
        worst_adj = max(worst_adj, abs(ip1 - ip2) / scale)
    ok = worst_conj < 1e-11 and worst_adj < 1e-10
    _write(outdir, "symbol_check.json", json.dumps({
        "conjugation_rule_worst": worst_conj,
        "self_adjointness_worst": worst_adj,
        "pass": bool(ok)}, indent=1), quiet)
    _manifest(outdir, "symbol-check", cfg, {"pass": bool(ok)}, quiet)
    return 0 if ok else CHECK_FAILED


COMMANDS = {
    "dno-test": cmd_dno_test,
    "resonance-scan": cmd_resonance_scan,
    "evolve": cmd_evolve,
    "nf-lifetime": cmd_nf_lifetime,
    "symbol-check": cmd_symbol_check,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gcwaves",
                                     description="water-waves experiment runner")
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--out", default="gcwaves-out", help="output directory")
    parser.add_argument("--override", action="append", default=[],
                        help="key=value override (repeatable; value parsed as JSON)")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args.subcommand, args.config, args.override)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        return COMMANDS[args.subcommand](cfg, Path(args.out), args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
