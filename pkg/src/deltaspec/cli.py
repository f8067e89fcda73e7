"""Batch experiment driver.

Every pipeline is a subcommand reading one TOML config tree, with dotted
--set overrides, and writing CSV/JSON artifacts plus an echo of the resolved
config into the output directory.  Identical config and seed give
byte-identical outputs: floats are serialized with 17 significant digits and
row order is fixed by trial index.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import bsp, oracle, rearrange, relop
from .errors import ConfigError, InvariantViolation, SolverError
from .grid import (
    GridFunction,
    load_grid_function,
    make_grid,
    save_grid_function,
)
from .potential import (
    Coupling,
    constant_coupling,
    indicator_coupling,
    perturbation_coupling,
    positive_part,
    random_bump_coupling,
)

SCHEMA_VERSION = 1

DEFAULTS = {
    "seed": 42,
    "out": "",
    "grid": {"dim": 1, "n": 2048, "half_extent": 40.0},
    "coupling": {
        "kind": "constant",
        "alpha0": 2.0,
        "beta": 4.0,
        "region": "ball",
        "radius": 1.0,
        "center": [0.0],
        "path": "",
        "support_radius": 6.0,
    },
    "surface": {"kind": "hyperplane", "xi_path": "", "lipschitz_bound": 0.0},
    "solver": {"tol": 1e-10, "max_iter": 5000, "force_dense": False, "seed": 42},
    "root": {
        "eps": 0.0,
        "tol": 1e-10,
        "detect_margin": 1e-6,
        "max_doublings": 60,
        "max_bisect": 200,
    },
    "mu_curve": {"lambda_min": -9.0, "lambda_max": -0.25, "samples": 50},
    "optimize": {"trials": 50, "alpha0_choices": [0.0, 1.0]},
    "oracle": {
        "n_transverse": 800,
        "n_normal": 800,
        "half_extent_transverse": 20.0,
        "half_extent_normal": 20.0,
    },
    "convergence": {"pairs": [[512, 40.0], [1024, 40.0], [2048, 40.0]]},
}


def _fmt(x: float) -> str:
    return "%.17g" % x


def _cfg_float(section: dict, key: str, where: str) -> float:
    try:
        return float(section[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(
            f"bad value for {where}.{key}: {section.get(key)!r}"
        ) from exc


def _cfg_int(section: dict, key: str, where: str) -> int:
    try:
        return int(section[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(
            f"bad value for {where}.{key}: {section.get(key)!r}"
        ) from exc


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_set_value(raw: str):
    # reuse the TOML value grammar; bare words fall back to strings
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def _apply_overrides(cfg: dict, pairs: list) -> dict:
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        keys = dotted.strip().split(".")
        node = cfg
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into {dotted!r}")
        node[keys[-1]] = _parse_set_value(raw.strip())
    return cfg


def _check_keys(node: dict, schema: dict, prefix: str) -> None:
    # every key must exist in DEFAULTS; a typo'd --set must not pass silently
    for key, value in node.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in schema:
            raise ConfigError(f"unknown config key: {path}")
        if isinstance(schema[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"bad value for {path}: expected a table")
            _check_keys(value, schema[key], path)
        elif isinstance(value, dict):
            raise ConfigError(f"bad value for {path}: unexpected table")


def load_config(path: str | None, overrides: list, seed: int | None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path, "rb") as fh:
                user = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config parse failure in {path}: {exc}") from exc
        cfg = _merge(cfg, user)
    _apply_overrides(cfg, overrides)
    if seed is not None:
        cfg["seed"] = int(seed)
    _check_keys(cfg, DEFAULTS, "")
    return cfg


def _echo_config(cfg: dict, out_dir: Path) -> None:
    payload = dict(cfg)
    payload["schema_version"] = SCHEMA_VERSION
    text = json.dumps(payload, indent=2, sort_keys=True)
    (out_dir / "config_echo.json").write_text(text + "\n")


def build_grid(cfg: dict):
    g = cfg["grid"]
    return make_grid(
        _cfg_int(g, "dim", "grid"),
        _cfg_int(g, "n", "grid"),
        _cfg_float(g, "half_extent", "grid"),
    )


def build_coupling(cfg: dict, grid, rng: np.random.Generator) -> Coupling:
    c = cfg["coupling"]
    kind = c["kind"]
    alpha0 = _cfg_float(c, "alpha0", "coupling")
    if kind == "constant":
        return constant_coupling(alpha0, grid)
    if kind in ("indicator", "ball", "box"):
        region = kind if kind in ("ball", "box") else c["region"]
        return indicator_coupling(
            _cfg_float(c, "beta", "coupling"), region,
            _cfg_float(c, "radius", "coupling"), c["center"], alpha0, grid,
        )
    if kind == "file":
        if not c["path"]:
            raise ConfigError("coupling.kind = file requires coupling.path")
        alpha1 = load_grid_function(c["path"])
        if alpha1.grid != grid:
            raise ConfigError(
                "coupling file lattice does not match the configured grid"
            )
        return perturbation_coupling(
            alpha1, alpha0, _cfg_float(c, "support_radius", "coupling")
        )
    if kind == "random":
        return random_bump_coupling(
            grid, rng, alpha0, _cfg_float(c, "support_radius", "coupling")
        )
    raise ConfigError(f"unknown coupling kind {kind!r}")


def build_surface(cfg: dict) -> oracle.SurfaceSpec:
    s = cfg["surface"]
    if s["kind"] == "hyperplane":
        return oracle.SurfaceSpec(kind="hyperplane")
    if not s["xi_path"]:
        raise ConfigError("surface.kind = graph requires surface.xi_path")
    xi = load_grid_function(s["xi_path"])
    return oracle.SurfaceSpec(
        kind="graph",
        xi=xi,
        lipschitz_bound=_cfg_float(s, "lipschitz_bound", "surface"),
    )


def build_solver(cfg: dict) -> relop.SolverConfig:
    s = cfg["solver"]
    return relop.SolverConfig(
        tol=_cfg_float(s, "tol", "solver"),
        max_iter=_cfg_int(s, "max_iter", "solver"),
        force_dense=bool(s["force_dense"]),
        seed=_cfg_int(s, "seed", "solver"),
    )


def build_root(cfg: dict) -> bsp.RootConfig:
    r = cfg["root"]
    return bsp.RootConfig(
        eps=_cfg_float(r, "eps", "root"),
        tol=_cfg_float(r, "tol", "root"),
        detect_margin=_cfg_float(r, "detect_margin", "root"),
        max_doublings=_cfg_int(r, "max_doublings", "root"),
        max_bisect=_cfg_int(r, "max_bisect", "root"),
    )


def build_box(cfg: dict, dim: int) -> oracle.BoxGrid:
    o = cfg["oracle"]
    return oracle.BoxGrid(
        dim=dim,
        n_transverse=_cfg_int(o, "n_transverse", "oracle"),
        n_normal=_cfg_int(o, "n_normal", "oracle"),
        half_extent_transverse=_cfg_float(o, "half_extent_transverse", "oracle"),
        half_extent_normal=_cfg_float(o, "half_extent_normal", "oracle"),
    )


def _prepare_out(cfg: dict, command: str) -> Path:
    out = cfg["out"] or f"runs/{command}"
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, out_dir)
    return out_dir


def cmd_mu_curve(cfg: dict) -> int:
    out_dir = _prepare_out(cfg, "mu-curve")
    mc = cfg["mu_curve"]
    lo = _cfg_float(mc, "lambda_min", "mu_curve")
    hi = _cfg_float(mc, "lambda_max", "mu_curve")
    count = _cfg_int(mc, "samples", "mu_curve")
    if not (lo < hi < 0):
        raise ConfigError(
            f"lambda range must satisfy lambda_min < lambda_max < 0, got "
            f"[{lo}, {hi}]"
        )
    if count < 2:
        raise ConfigError(f"need at least 2 samples, got {count}")
    grid = build_grid(cfg)
    rng = np.random.default_rng(_cfg_int(cfg, "seed", "config"))
    coupling = build_coupling(cfg, grid, rng)
    solver = build_solver(cfg)
    alpha0 = coupling.background
    lines = ["lambda,mu,ess_threshold_D"]
    for lam in np.linspace(lo, hi, count):
        lam = float(lam)
        res = relop.lowest_eigenvalue(coupling, lam, solver)
        thr = bsp.essential_threshold_D(alpha0, lam)
        lines.append(f"{_fmt(lam)},{_fmt(res.eigenvalue)},{_fmt(thr)}")
    (out_dir / "mu_curve.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out_dir / 'mu_curve.csv'}")
    return 0


def _report_json(report: bsp.BoundStateReport, cfg: dict) -> str:
    payload = {
        "lambda1": report.lambda1,
        "threshold": report.threshold,
        "status": report.status,
        "mu_curve": [[lam, mu] for lam, mu in report.mu_curve],
        "bracket": list(report.bracket),
        "solver": dict(cfg["solver"]),
        "grid": dict(cfg["grid"]),
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def cmd_lambda1(cfg: dict) -> int:
    out_dir = _prepare_out(cfg, "lambda1")
    grid = build_grid(cfg)
    rng = np.random.default_rng(_cfg_int(cfg, "seed", "config"))
    coupling = build_coupling(cfg, grid, rng)
    report = bsp.find_lambda1(coupling, build_solver(cfg), build_root(cfg))
    (out_dir / "report.json").write_text(_report_json(report, cfg) + "\n")
    bsp.write_mu_curve(report, str(out_dir / "mu_curve.csv"))
    if report.trace_phi is not None:
        save_grid_function(report.trace_phi, str(out_dir / "trace_phi.bin"))
    print(f"status {report.status}, lambda1 {report.lambda1}")
    return 0


def cmd_rearrange(cfg: dict) -> int:
    out_dir = _prepare_out(cfg, "rearrange")
    grid = build_grid(cfg)
    rng = np.random.default_rng(_cfg_int(cfg, "seed", "config"))
    coupling = build_coupling(cfg, grid, rng)
    plus = positive_part(coupling)
    ranking = rearrange.ranked_cells(grid)
    star = rearrange.symmetric_decreasing_rearrangement(
        GridFunction(grid, plus.perturbation.real_samples), ranking
    )
    save_grid_function(star, str(out_dir / "u_star.bin"))
    lines = ["radius,value"]
    vals = star.real_samples
    for cell in ranking.order:
        lines.append(f"{_fmt(ranking.distances[cell])},{_fmt(vals[cell])}")
    (out_dir / "rearranged.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out_dir / 'u_star.bin'}")
    return 0


def rearranged_coupling(coupling: Coupling) -> Coupling:
    """alpha0 + symmetric decreasing rearrangement of (alpha1)_+."""
    plus = positive_part(coupling)
    ranking = rearrange.ranked_cells(coupling.grid)
    star = rearrange.symmetric_decreasing_rearrangement(
        GridFunction(coupling.grid, plus.perturbation.real_samples), ranking
    )
    return perturbation_coupling(star, coupling.background, coupling.support_radius)


def cmd_optimize_check(cfg: dict) -> int:
    out_dir = _prepare_out(cfg, "optimize-check")
    grid = build_grid(cfg)
    solver = build_solver(cfg)
    root = build_root(cfg)
    opt = cfg["optimize"]
    trials = _cfg_int(opt, "trials", "optimize")
    try:
        choices = [float(a) for a in opt["alpha0_choices"]]
    except (TypeError, ValueError) as exc:
        raise ConfigError(
            f"bad value for optimize.alpha0_choices: {opt['alpha0_choices']!r}"
        ) from exc
    if not choices:
        raise ConfigError("optimize.alpha0_choices must not be empty")
    seed = _cfg_int(cfg, "seed", "config")
    lines = [
        "trial,lambda1_original,lambda1_rearranged,slack,"
        "status_original,status_rearranged"
    ]
    violations = 0
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        alpha0 = choices[trial % len(choices)]
        original = random_bump_coupling(grid, rng, alpha0)
        rearranged = rearranged_coupling(original)
        rep_o = bsp.find_lambda1(original, solver, root)
        rep_r = bsp.find_lambda1(rearranged, solver, root)
        if rep_o.lambda1 is not None and rep_r.lambda1 is not None:
            slack = rep_o.lambda1 - rep_r.lambda1
            if slack < -1e-6:
                violations += 1
            slack_txt = _fmt(slack)
            lo, lr = _fmt(rep_o.lambda1), _fmt(rep_r.lambda1)
        else:
            slack_txt = ""
            lo = "" if rep_o.lambda1 is None else _fmt(rep_o.lambda1)
            lr = "" if rep_r.lambda1 is None else _fmt(rep_r.lambda1)
        lines.append(
            f"{trial},{lo},{lr},{slack_txt},{rep_o.status},{rep_r.status}"
        )
    (out_dir / "optimize_check.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out_dir / 'optimize_check.csv'} ({violations} violations)")
    return 0 if violations == 0 else 4


def cmd_oracle_compare(cfg: dict) -> int:
    out_dir = _prepare_out(cfg, "oracle-compare")
    grid = build_grid(cfg)
    rng = np.random.default_rng(_cfg_int(cfg, "seed", "config"))
    coupling = build_coupling(cfg, grid, rng)
    solver = build_solver(cfg)
    report = bsp.find_lambda1(coupling, solver, build_root(cfg))

    surface = build_surface(cfg)
    box = build_box(cfg, grid.dim + 1)
    handle = oracle.assemble(coupling, surface, box)
    pair = oracle.lowest_eigenpair(handle, solver)
    bound_oracle = _oracle_localized(pair.eigenvector)

    recon_residual = None
    if report.lambda1 is not None and report.trace_phi is not None:
        lam1 = report.lambda1
        columns = bsp.evaluate_reconstruction(
            report.trace_phi, lam1,
            box.transverse_axis_nodes(), box.normal_axis_nodes(),
        )
        vec = oracle.BoxFunction(box, columns.reshape(-1)).values
        recon_residual = float(
            np.linalg.norm(handle.matrix @ vec - lam1 * vec) / np.linalg.norm(vec)
        )

    gap = None
    if report.lambda1 is not None and bound_oracle:
        gap = abs(pair.eigenvalue - report.lambda1) / abs(report.lambda1)
    payload = {
        "lambda1_bsp": report.lambda1,
        "status_bsp": report.status,
        "lambda1_oracle": pair.eigenvalue,
        "status_oracle": "bound_state" if bound_oracle else "no_bound_state_detected",
        "relative_gap": gap,
        "reconstruction_residual": recon_residual,
        "diagnostics": {
            "bsp": {
                "threshold": report.threshold,
                "mu_evaluations": len(report.mu_curve),
                "bracket": list(report.bracket),
            },
            "oracle": {
                "method": pair.method,
                "residual": pair.residual,
                "second_eigenvalue": pair.second_eigenvalue,
                "unknowns": handle.matrix.shape[0],
            },
        },
    }
    (out_dir / "compare.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    oracle.save_box_eigenvector(pair.eigenvector, str(out_dir / "oracle_state.bin"))
    print(f"bsp {report.lambda1} vs oracle {pair.eigenvalue}")
    return 0


def _oracle_localized(state: oracle.BoxFunction, ratio: float = 0.9) -> bool:
    """Bound states decay along x_d; box artifacts spread over the whole height.

    Classify by the squared-mass fraction inside the inner half of the normal
    extent: a Dirichlet box mode keeps about 0.82 there, a decaying state
    close to 1.
    """
    grid = state.grid
    resh = state.reshaped().reshape(-1, grid.n_normal - 1)
    inner = np.abs(grid.normal_axis_nodes()) <= 0.5 * grid.half_extent_normal
    total = float(np.sum(resh**2))
    if total == 0:
        return False
    return float(np.sum(resh[:, inner] ** 2)) / total > ratio


def cmd_convergence(cfg: dict) -> int:
    out_dir = _prepare_out(cfg, "convergence")
    pairs = cfg["convergence"]["pairs"]
    if not pairs:
        raise ConfigError("convergence.pairs must not be empty")
    solver = build_solver(cfg)
    root = build_root(cfg)
    seed = _cfg_int(cfg, "seed", "config")
    results = []
    for pair_nl in pairs:
        try:
            n, half = int(pair_nl[0]), float(pair_nl[1])
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(
                f"convergence.pairs entries must be [N, L], got {pair_nl!r}"
            ) from exc
        sub = copy.deepcopy(cfg)
        sub["grid"]["n"] = n
        sub["grid"]["half_extent"] = half
        grid = build_grid(sub)
        rng = np.random.default_rng(seed)
        coupling = build_coupling(sub, grid, rng)
        report = bsp.find_lambda1(coupling, solver, root)
        results.append((n, half, report.lambda1))

    ckind = cfg["coupling"]["kind"]
    alpha0 = float(cfg["coupling"]["alpha0"])
    if ckind == "constant" and alpha0 > 0:
        reference = -(alpha0**2) / 4.0
    else:
        finest = max(results, key=lambda row: (row[0], row[1]))
        reference = finest[2] if len(results) > 1 else None

    lines = ["N,L,lambda1,err_vs_reference"]
    for n, half, lam in results:
        lam_txt = "" if lam is None else _fmt(lam)
        if lam is None or reference is None:
            err_txt = ""
        else:
            err_txt = _fmt(abs(lam - reference))
        lines.append(f"{n},{_fmt(half)},{lam_txt},{err_txt}")
    (out_dir / "convergence.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out_dir / 'convergence.csv'}")
    return 0


_COMMANDS = {
    "mu-curve": cmd_mu_curve,
    "lambda1": cmd_lambda1,
    "rearrange": cmd_rearrange,
    "optimize-check": cmd_optimize_check,
    "oracle-compare": cmd_oracle_compare,
    "convergence": cmd_convergence,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deltaspec",
        description="Bound states of delta-potentials on a hyperplane via the "
        "reduced half-order operator, with a finite-difference cross-check.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=None,
            metavar="KEY=VALUE",
            help="dotted config override, repeatable",
        )
        p.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides or [], args.seed)
        if args.out is not None:
            cfg["out"] = args.out
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
