"""Command-line entry point.

Subcommands: scalar, matrix, shots, stability, cost, oracle.
Configuration comes from an optional JSON file (--config) overridden by
flags.  Exit codes: 0 success, 2 config error, 3 numeric/degeneracy
error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import analysis, cf_scalar
from .analysis import (BackendConfig, GridSpec, ModelSpec, RunConfig, emit,
                       emit_shot_study, emit_stability, measurement_cost_estimate,
                       oracle_sweep, run_sweep, shot_noise_study, stability_study)
from .errors import NUMERIC_ERRORS, ConfigError
from .lattice_models import OperatorPoolSpec


def _parse_levels(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part != "")
    except ValueError as exc:
        raise ConfigError(f"bad levels list {text!r}") from exc


def _parse_sites(text: str) -> tuple[int, ...]:
    sites: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            sites.extend(range(int(lo), int(hi) + 1))
        else:
            sites.append(int(part))
    if not sites:
        raise ConfigError(f"empty site list {text!r}")
    return tuple(sites)


def parse_pool(text: str) -> OperatorPoolSpec:
    """Pool grammar: '<a|n>_<up|down|both>:<sites>', e.g. 'a_up:0-3'."""
    try:
        head, sites_text = text.split(":", 1)
        kind_letter, spin = head.split("_", 1)
    except ValueError as exc:
        raise ConfigError(f"bad pool spec {text!r}") from exc
    kinds = {"a": "annihilation", "n": "number"}
    spins = {"up": ("up",), "down": ("down",), "dn": ("down",),
             "both": ("up", "down")}
    if kind_letter not in kinds or spin not in spins:
        raise ConfigError(f"bad pool spec {text!r}")
    return OperatorPoolSpec(kinds[kind_letter], _parse_sites(sites_text),
                            spins[spin])


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return data


def _pick(args_value, file_dict: dict, key: str, default):
    if args_value is not None:
        return args_value
    if key in file_dict:
        return file_dict[key]
    return default


def build_run_config(args, mode: str) -> RunConfig:
    cfg = _load_config_file(args.config)
    model_cfg = cfg.get("model", {})
    grid_cfg = cfg.get("grid", {})
    backend_cfg = cfg.get("backend", {})

    model = ModelSpec(
        name=_pick(args.model, model_cfg, "name", "hubbard1d"),
        sites=int(_pick(args.sites, model_cfg, "sites", 2)),
        t=float(_pick(args.t, model_cfg, "t", 1.0)),
        U=float(_pick(args.U, model_cfg, "U", 0.0)),
        filling=tuple(model_cfg["filling"]) if "filling" in model_cfg else None,
    )
    grid = GridSpec(
        omega_min=float(_pick(args.omega_min, grid_cfg, "omega_min", -10.0)),
        omega_max=float(_pick(args.omega_max, grid_cfg, "omega_max", 10.0)),
        points=int(_pick(args.points, grid_cfg, "points", 500)),
        eta=float(_pick(args.eta, grid_cfg, "eta", 0.1)),
    )
    reality = _pick(getattr(args, "enforce_reality", None), backend_cfg,
                    "enforce_reality", None)
    if isinstance(reality, str):
        reality = {"auto": None, "true": True, "false": False}[reality]
    seed = int(_pick(args.seed, backend_cfg,
                     "seed", cfg.get("seed", 0)))
    backend = BackendConfig(
        kind=_pick(getattr(args, "backend", None), backend_cfg, "kind", "exact"),
        shots=int(_pick(getattr(args, "shots", None), backend_cfg, "shots", 1024)),
        seed=seed,
        epsilon=float(_pick(getattr(args, "epsilon", None), backend_cfg,
                            "epsilon", 0.0)),
        sigma=_pick(getattr(args, "sigma", None), backend_cfg, "sigma",
                    "maximally_mixed"),
        enforce_reality=reality,
    )

    pool = None
    pool_spec = _pick(getattr(args, "pool", None), cfg, "pool", None)
    op_text = _pick(getattr(args, "op", None), cfg, "op", None)
    if mode == "scalar" and op_text:
        pool = parse_pool(op_text)
    elif mode != "scalar" and pool_spec is not None:
        if isinstance(pool_spec, dict):
            kind = {"a": "annihilation", "n": "number"}.get(
                pool_spec.get("kind", "a"), pool_spec.get("kind"))
            pool = OperatorPoolSpec(
                kind, tuple(int(s) for s in pool_spec.get("sites", ())),
                tuple(pool_spec.get("spins", ("up",))))
        else:
            pool = parse_pool(str(pool_spec))

    levels_text = _pick(args.levels, cfg, "levels", "0")
    if isinstance(levels_text, (list, tuple)):
        levels = tuple(int(l) for l in levels_text)
    else:
        levels = _parse_levels(str(levels_text))

    return RunConfig(
        mode=mode, model=model, pool=pool, backend=backend, levels=levels,
        grid=grid,
        oracle=_pick(getattr(args, "oracle", None), cfg, "oracle", "lehmann"),
        seed=seed,
        threshold=(float(args.threshold) if getattr(args, "threshold", None)
                   is not None else cfg.get("threshold")),
        form=_pick(getattr(args, "form", None), cfg, "form", "unnormalized"),
        hermitize=bool(getattr(args, "hermitize", False)
                       or cfg.get("hermitize", False)),
        threads=int(_pick(args.threads, cfg, "threads", 1)),
    )


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override")
    sub.add_argument("--out", help="output file path")
    sub.add_argument("--format", choices=("csv", "json"), default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--threads", type=int, default=None)
    sub.add_argument("--model", choices=("hubbard1d", "dimer"), default=None)
    sub.add_argument("--sites", type=int, default=None)
    sub.add_argument("--t", type=float, default=None)
    sub.add_argument("--U", type=float, default=None)
    sub.add_argument("--eta", type=float, default=None)
    sub.add_argument("--omega-min", dest="omega_min", type=float, default=None)
    sub.add_argument("--omega-max", dest="omega_max", type=float, default=None)
    sub.add_argument("--points", type=int, default=None)
    sub.add_argument("--levels", default=None)
    sub.add_argument("--oracle", choices=("lehmann", "quadrature"), default=None)
    sub.add_argument("--backend", choices=("exact", "sampled", "perturbed"),
                     default=None)
    sub.add_argument("--shots", type=int, default=None)
    sub.add_argument("--epsilon", type=float, default=None)
    sub.add_argument("--sigma", default=None)
    sub.add_argument("--enforce-reality", dest="enforce_reality",
                     choices=("auto", "true", "false"), default=None)
    sub.add_argument("--dump-operators", dest="dump_operators", default=None,
                     help="write the recursion operators to this text file")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfgreen",
        description="Continued-fraction Green's functions for small lattice models")
    subs = parser.add_subparsers(dest="command", required=True)

    scalar = subs.add_parser("scalar", help="single-operator recursion sweep")
    _add_common(scalar)
    scalar.add_argument("--op", default=None, help="operator, e.g. n_up:0")
    scalar.add_argument("--r", type=float, default=0.25,
                        help="free parameter of the truncation bound")
    scalar.add_argument("--r-scan", action="store_true",
                        help="scan r in {0.05..0.45} and report the best bound")

    matrix = subs.add_parser("matrix", help="many-operator recursion sweep")
    _add_common(matrix)
    matrix.add_argument("--pool", default=None, help="pool, e.g. a_up:0-3")
    matrix.add_argument("--threshold", type=float, default=None)
    matrix.add_argument("--form", choices=("normalized", "unnormalized"),
                        default=None)
    matrix.add_argument("--hermitize", action="store_true")

    shots = subs.add_parser("shots", help="error vs measurement budget")
    _add_common(shots)
    shots.add_argument("--pool", default=None)
    shots.add_argument("--threshold", type=float, default=None)
    shots.add_argument("--form", choices=("normalized", "unnormalized"),
                       default=None)
    shots.add_argument("--shots-list", dest="shots_list",
                       default="1000,10000,100000,1000000")
    shots.add_argument("--repeats", type=int, default=20)

    stability = subs.add_parser("stability", help="coefficient-noise stability")
    _add_common(stability)
    stability.add_argument("--op", default=None)
    stability.add_argument("--s", type=float, default=1e-3,
                           help="relative coefficient noise magnitude")
    stability.add_argument("--trials", type=int, default=100)
    stability.add_argument("--stability-eta", dest="stability_eta", type=float,
                           default=2.0)

    cost = subs.add_parser("cost", help="fermionic-shadow measurement cost")
    cost.add_argument("--modes", type=int, required=True)
    cost.add_argument("--k0", type=int, required=True)
    cost.add_argument("--d", type=int, required=True)
    cost.add_argument("--n", type=int, required=True)
    cost.add_argument("--eps", type=float, required=True)
    cost.add_argument("--out", default=None)

    oracle = subs.add_parser("oracle", help="exact-diagonalization reference only")
    _add_common(oracle)
    oracle.add_argument("--pool", default=None)

    return parser


def _dump_operators(path: str, config: RunConfig) -> None:
    from .expectation_backends import make_backend
    problem = analysis.build_problem(config)
    backend = make_backend(config.backend, problem.hamiltonian.qubit_count,
                           hamiltonian=problem.hamiltonian)
    blocks = []
    if config.mode == "scalar":
        data = cf_scalar.scalar_recursion(problem.hamiltonian, problem.ops[0],
                                          max(config.levels), backend, problem.rho)
        for idx, op in enumerate(data.chain):
            blocks.append(f"# chain[{idx}]\n{op.to_text()}")
    else:
        from . import cf_matrix
        data = cf_matrix.matrix_recursion(problem.hamiltonian, problem.ops,
                                          max(config.levels), backend,
                                          problem.rho, threshold=config.threshold)
        for lvl, level in enumerate(data.levels):
            for idx, op in enumerate(level.normalized_ops):
                blocks.append(f"# level[{lvl}] op[{idx}]\n{op.to_text()}")
    analysis._write_text(path, "\n".join(blocks) + "\n")


def run(argv=None) -> int:
    args = make_parser().parse_args(argv)
    command = args.command

    if command == "cost":
        value = measurement_cost_estimate(args.modes, args.k0, args.d,
                                          args.n, args.eps)
        print(f"measurement cost estimate: {value:.6e} samples")
        if args.out:
            analysis._write_text(args.out, json.dumps(
                {"modes": args.modes, "k0": args.k0, "d": args.d,
                 "n": args.n, "eps": args.eps, "cost": value}) + "\n")
        return 0

    mode = "scalar" if command in ("scalar", "stability") else "matrix"
    config = build_run_config(args, mode)
    fmt = args.format or "csv"

    if command in ("scalar", "matrix"):
        result = run_sweep(config)
        if args.out:
            emit(result, fmt, args.out)
        for level in config.levels:
            print(f"level {level}: max |G - oracle| = {result.max_error(level):.6e}")
        if command == "scalar" and max(config.levels) >= 1:
            _report_bound(args, config)
        if args.dump_operators:
            _dump_operators(args.dump_operators, config)
        return 0

    if command == "oracle":
        result = oracle_sweep(config)
        if args.out:
            emit(result, fmt, args.out)
        print(f"oracle rows: {len(result)}")
        return 0

    if command == "shots":
        from dataclasses import replace as _replace
        if config.backend.kind != "sampled":
            config = _replace(config, backend=_replace(config.backend,
                                                       kind="sampled"))
        shots_list = [int(x) for x in str(args.shots_list).split(",") if x]
        study = shot_noise_study(config, shots_list, args.repeats)
        if args.out:
            emit_shot_study(study, args.out)
        for m, level, median, q1, q3 in study.summary():
            print(f"M={m:<9d} level={level} median={median:.4e} "
                  f"q1={q1:.4e} q3={q3:.4e}")
        return 0

    if command == "stability":
        report = stability_study(config, args.s, args.trials,
                                 eta=args.stability_eta)
        if args.out:
            md = analysis._metadata_for(config, {
                "study": "stability", "s": analysis._fmt(args.s),
                "trials": str(args.trials)})
            emit_stability(report, args.out, md)
        ok = report.applicable
        print(f"applicable frequencies: {int(ok.sum())}/{ok.shape[0]}; "
              f"bound violations: {report.violations()}")
        return 0

    raise ConfigError(f"unhandled command {command!r}")


def _report_bound(args, config: RunConfig) -> None:
    from .expectation_backends import make_backend
    problem = analysis.build_problem(config)
    backend = make_backend(config.backend, problem.hamiltonian.qubit_count,
                           hamiltonian=problem.hamiltonian)
    data = cf_scalar.scalar_recursion(problem.hamiltonian, problem.ops[0],
                                      max(config.levels), backend, problem.rho)
    for level in config.levels:
        if level < 1:
            continue
        if data.terminated_at is not None and data.terminated_at <= level:
            print(f"level {level}: truncation exact (chain terminated)")
            continue
        if level >= len(data.gammas):
            continue
        if getattr(args, "r_scan", False):
            r, lam, bound = cf_scalar.theorem1_bound_scan(data, level)
            print(f"level {level}: best r={r:.2f} Lambda={lam:.6g} bound={bound:.6e}")
        else:
            lam, bound = cf_scalar.theorem1_bound(data, level, args.r)
            print(f"level {level}: r={args.r:.2f} Lambda={lam:.6g} bound={bound:.6e}")


def main(argv=None) -> None:
    try:
        code = run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        sys.exit(2)
    except NUMERIC_ERRORS as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        sys.exit(3)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        sys.exit(3)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        sys.exit(4)
    sys.exit(code)


if __name__ == "__main__":
    main()
