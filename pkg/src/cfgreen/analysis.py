"""Experiment driver: sweeps, error curves, noise studies, file emission.

The CSV contract (consumed by the renderer and by scripts):

    # key=value metadata lines
    omega0,eta,level,i,j,g_re,g_im,oracle_re,oracle_im,abs_err

Floats are written with 17 significant digits, so parse -> emit is
byte-identical and values round-trip losslessly.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import cf_matrix, cf_scalar
from .errors import ConfigError, DomainError
from .exact_reference import (DensityState, Spectrum, ground_state_in_sector,
                              lehmann_green, time_quadrature_green)
from .expectation_backends import BackendConfig, make_backend
from .lattice_models import (HubbardSpec, OperatorPoolSpec, build_dimer_compact,
                             build_hubbard, build_pool, dimer_ground_state,
                             dimer_number_operator, total_number_operator)
from .operator_algebra import OperatorSum

VERSION = "0.1.0"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class GridSpec:
    omega_min: float = -10.0
    omega_max: float = 10.0
    points: int = 500
    eta: float = 0.1

    def __post_init__(self):
        if self.eta <= 0:
            raise ConfigError("eta must be > 0")
        if self.points < 2:
            raise ConfigError("points must be >= 2")

    def omega0(self) -> np.ndarray:
        return np.linspace(self.omega_min, self.omega_max, self.points)

    def omega(self) -> np.ndarray:
        return self.omega0() + 1j * self.eta


@dataclass(frozen=True)
class ModelSpec:
    name: str = "hubbard1d"        # or "dimer"
    sites: int = 2
    t: float = 1.0
    U: float = 0.0
    filling: Optional[tuple[int, int]] = None   # (N_up, N_down); default half

    def __post_init__(self):
        if self.name not in ("hubbard1d", "dimer"):
            raise ConfigError(f"unknown model {self.name!r}")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "matrix"           # "scalar" | "matrix"
    model: ModelSpec = field(default_factory=ModelSpec)
    pool: Optional[OperatorPoolSpec] = None
    backend: BackendConfig = field(default_factory=BackendConfig)
    levels: tuple[int, ...] = (0,)
    grid: GridSpec = field(default_factory=GridSpec)
    oracle: str = "lehmann"        # or "quadrature"
    seed: int = 0
    threshold: Optional[float] = None
    form: str = "unnormalized"
    hermitize: bool = False        # repair R/Delta to real-Hermitian before eval
    threads: int = 1

    def __post_init__(self):
        if self.mode not in ("scalar", "matrix"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not self.levels:
            raise ConfigError("levels must be nonempty")
        if any(l < 0 for l in self.levels):
            raise ConfigError("levels must be >= 0")
        if self.oracle not in ("lehmann", "quadrature"):
            raise ConfigError(f"unknown oracle {self.oracle!r}")
        if self.mode == "scalar" and self.pool is not None and \
                len(self.pool.sites) * len(self.pool.spins) != 1:
            raise ConfigError("scalar mode takes exactly one operator")


@dataclass
class Problem:
    """Model, oracle spectrum, state, and pool assembled from a config."""

    hamiltonian: OperatorSum
    spectrum: Spectrum
    rho: DensityState
    ops: list[OperatorSum]
    labels: list[str]


def half_filling(sites: int) -> tuple[int, int]:
    return (sites + 1) // 2, sites // 2


def build_problem(config: RunConfig) -> Problem:
    model = config.model
    if model.name == "dimer":
        h = build_dimer_compact(model.U, model.t)
        spectrum = Spectrum.diagonalize(h)
        vec = dimer_ground_state(model.U, model.t)
        rho = DensityState.pure(vec, hamiltonian=spectrum.dense_h)
        ops = [dimer_number_operator()]
        labels = ["n0up"]
    else:
        spec = HubbardSpec(sites=model.sites, t=model.t, U=model.U)
        h = build_hubbard(spec)
        spectrum = Spectrum.diagonalize(h)
        n_up, n_dn = model.filling or half_filling(model.sites)
        rho = ground_state_in_sector(
            spectrum,
            [total_number_operator(spec, "up"), total_number_operator(spec, "down")],
            [float(n_up), float(n_dn)])
        pool = config.pool
        if pool is None:
            pool = OperatorPoolSpec("annihilation", tuple(range(model.sites)))
        ops = build_pool(pool, spec)
        labels = [f"{pool.kind[0]}_{spin}{site}"
                  for spin in pool.spins for site in pool.sites]
    return Problem(hamiltonian=h, spectrum=spectrum, rho=rho, ops=ops,
                   labels=labels)


# -- result container and serialization ---------------------------------

_COLUMNS = ("omega0", "eta", "level", "i", "j",
            "g_re", "g_im", "oracle_re", "oracle_im", "abs_err")


@dataclass
class GreensResult:
    metadata: dict[str, str]
    omega0: np.ndarray
    eta: np.ndarray
    level: np.ndarray
    i: np.ndarray
    j: np.ndarray
    g: np.ndarray          # complex
    oracle: np.ndarray     # complex
    abs_err: np.ndarray

    def __len__(self) -> int:
        return self.omega0.shape[0]

    def select(self, level: int, i: int, j: int) -> np.ndarray:
        mask = (self.level == level) & (self.i == i) & (self.j == j)
        return mask

    def max_error(self, level: Optional[int] = None) -> float:
        mask = np.ones(len(self), dtype=bool) if level is None else self.level == level
        return float(self.abs_err[mask].max()) if mask.any() else 0.0


def _metadata_for(config: RunConfig, extra: dict[str, str] | None = None) -> dict[str, str]:
    md = {
        "version": VERSION,
        "mode": config.mode,
        "model": config.model.name,
        "sites": str(config.model.sites),
        "t": _fmt(config.model.t),
        "U": _fmt(config.model.U),
        "pool": _pool_label(config),
        "backend": config.backend.kind,
        "shots": str(config.backend.shots),
        "epsilon": _fmt(config.backend.epsilon),
        "sigma": str(config.backend.sigma),
        "seed": str(config.seed),
        "levels": ",".join(str(l) for l in config.levels),
        "eta": _fmt(config.grid.eta),
        "omega_min": _fmt(config.grid.omega_min),
        "omega_max": _fmt(config.grid.omega_max),
        "points": str(config.grid.points),
        "oracle": config.oracle,
        "form": config.form,
    }
    if extra:
        md.update(extra)
    return md


def _pool_label(config: RunConfig) -> str:
    if config.model.name == "dimer":
        return "n0up-compact"
    pool = config.pool or OperatorPoolSpec("annihilation",
                                           tuple(range(config.model.sites)))
    sites = ",".join(str(s) for s in pool.sites)
    spins = ",".join(pool.spins)
    return f"{pool.kind}:{spins}:{sites}"


def _oracle_matrix(problem: Problem, config: RunConfig) -> np.ndarray:
    """oracle[i, j, k] over the grid; G_ij pairs A_i with B = A_j^dag."""
    ops = problem.ops
    n_op = len(ops)
    grid = config.grid.omega()
    out = np.empty((n_op, n_op, grid.shape[0]), dtype=complex)
    for a in range(n_op):
        for b in range(n_op):
            if config.oracle == "lehmann":
                out[a, b] = lehmann_green(problem.spectrum, problem.rho,
                                          ops[a], ops[b].dagger(), grid)
            else:
                norm = problem.spectrum.spectral_norm
                eta = config.grid.eta
                t_max = math.log(max(1.0, norm) / (1e-10 * eta)) / eta
                out[a, b] = np.array([
                    time_quadrature_green(problem.spectrum, problem.rho,
                                          ops[a], ops[b].dagger(), w, t_max)
                    for w in grid])
    return out


def run_sweep(config: RunConfig) -> GreensResult:
    """Build everything once, evaluate every requested level over the grid."""
    problem = build_problem(config)
    backend = make_backend(config.backend, problem.hamiltonian.qubit_count,
                           hamiltonian=problem.hamiltonian)
    grid = config.grid.omega()
    omega0 = config.grid.omega0()
    n_max = max(config.levels)
    n_op = len(problem.ops)
    oracle = _oracle_matrix(problem, config)

    if config.mode == "scalar":
        if n_op != 1:
            raise ConfigError("scalar mode requires a single operator")
        data = cf_scalar.scalar_recursion(problem.hamiltonian, problem.ops[0],
                                          n_max, backend, problem.rho)
        values = {level: np.array([cf_scalar.eval_scalar_cf(data, w, level)
                                   for w in grid]).reshape(1, 1, -1)
                  for level in config.levels}
    else:
        data = cf_matrix.matrix_recursion(problem.hamiltonian, problem.ops,
                                          n_max, backend, problem.rho,
                                          threshold=config.threshold)
        if config.hermitize:
            # all built-in models have real Hamiltonians
            data = cf_matrix.hermitize(data, real=True)
        values = {level: _eval_matrix_grid(data, grid, level, config.form,
                                           config.threads)
                  for level in config.levels}

    rows_per_level = grid.shape[0] * n_op * n_op
    total = rows_per_level * len(config.levels)
    omega0_col = np.empty(total)
    level_col = np.empty(total, dtype=int)
    i_col = np.empty(total, dtype=int)
    j_col = np.empty(total, dtype=int)
    g_col = np.empty(total, dtype=complex)
    oracle_col = np.empty(total, dtype=complex)
    pos = 0
    for level in config.levels:
        block = values[level]
        for k in range(grid.shape[0]):
            for a in range(n_op):
                for b in range(n_op):
                    omega0_col[pos] = omega0[k]
                    level_col[pos] = level
                    i_col[pos] = a
                    j_col[pos] = b
                    g_col[pos] = block[a, b, k]
                    oracle_col[pos] = oracle[a, b, k]
                    pos += 1
    eta_col = np.full(total, config.grid.eta)
    abs_err = np.abs(g_col - oracle_col)
    return GreensResult(metadata=_metadata_for(config),
                        omega0=omega0_col, eta=eta_col, level=level_col,
                        i=i_col, j=j_col, g=g_col, oracle=oracle_col,
                        abs_err=abs_err)


def _eval_matrix_grid(data: cf_matrix.MatrixCFData, grid: np.ndarray,
                      level: int, form: str, threads: int) -> np.ndarray:
    n_op = data.n_op
    out = np.empty((n_op, n_op, grid.shape[0]), dtype=complex)

    def one(k: int):
        out[:, :, k] = cf_matrix.eval_matrix_cf(data, grid[k], level, form=form)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(grid.shape[0])))
    else:
        for k in range(grid.shape[0]):
            one(k)
    return out


def oracle_sweep(config: RunConfig) -> GreensResult:
    """Oracle-only rows (level = -1, g = oracle, abs_err = 0)."""
    problem = build_problem(config)
    grid = config.grid.omega()
    omega0 = config.grid.omega0()
    n_op = len(problem.ops)
    oracle = _oracle_matrix(problem, config)
    total = grid.shape[0] * n_op * n_op
    omega0_col = np.empty(total)
    i_col = np.empty(total, dtype=int)
    j_col = np.empty(total, dtype=int)
    oracle_col = np.empty(total, dtype=complex)
    pos = 0
    for k in range(grid.shape[0]):
        for a in range(n_op):
            for b in range(n_op):
                omega0_col[pos] = omega0[k]
                i_col[pos] = a
                j_col[pos] = b
                oracle_col[pos] = oracle[a, b, k]
                pos += 1
    md = _metadata_for(config, {"oracle_only": "1"})
    return GreensResult(metadata=md, omega0=omega0_col,
                        eta=np.full(total, config.grid.eta),
                        level=np.full(total, -1, dtype=int),
                        i=i_col, j=j_col, g=oracle_col.copy(),
                        oracle=oracle_col, abs_err=np.zeros(total))


# -- emission ------------------------------------------------------------

def emit(result: GreensResult, fmt: str, path: str) -> None:
    if fmt == "csv":
        _emit_csv(result, path)
    elif fmt == "json":
        _emit_json(result, path)
    else:
        raise ConfigError(f"unknown output format {fmt!r}")


def _emit_csv(result: GreensResult, path: str) -> None:
    lines = [f"# {k}={v}" for k, v in result.metadata.items()]
    lines.append(",".join(_COLUMNS))
    for k in range(len(result)):
        lines.append(",".join([
            _fmt(result.omega0[k]), _fmt(result.eta[k]),
            str(int(result.level[k])), str(int(result.i[k])), str(int(result.j[k])),
            _fmt(result.g[k].real), _fmt(result.g[k].imag),
            _fmt(result.oracle[k].real), _fmt(result.oracle[k].imag),
            _fmt(result.abs_err[k]),
        ]))
    _write_text(path, "\n".join(lines) + "\n")


def _emit_json(result: GreensResult, path: str) -> None:
    payload = {
        "metadata": result.metadata,
        "columns": list(_COLUMNS),
        "rows": [
            [float(result.omega0[k]), float(result.eta[k]),
             int(result.level[k]), int(result.i[k]), int(result.j[k]),
             float(result.g[k].real), float(result.g[k].imag),
             float(result.oracle[k].real), float(result.oracle[k].imag),
             float(result.abs_err[k])]
            for k in range(len(result))
        ],
    }
    _write_text(path, json.dumps(payload, indent=1) + "\n")


def _write_text(path: str, text: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def parse_csv(path: str) -> GreensResult:
    metadata: dict[str, str] = {}
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as handle:
        header_seen = False
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    metadata[key] = value
                continue
            if not header_seen:
                if line != ",".join(_COLUMNS):
                    raise ConfigError(f"unexpected CSV header {line!r}")
                header_seen = True
                continue
            rows.append([float(x) for x in line.split(",")])
    if not header_seen:
        raise ConfigError(f"{path} has no CSV header")
    data = np.asarray(rows, dtype=float) if rows else np.zeros((0, len(_COLUMNS)))
    return GreensResult(
        metadata=metadata,
        omega0=data[:, 0], eta=data[:, 1],
        level=data[:, 2].astype(int), i=data[:, 3].astype(int),
        j=data[:, 4].astype(int),
        g=data[:, 5] + 1j * data[:, 6],
        oracle=data[:, 7] + 1j * data[:, 8],
        abs_err=data[:, 9])


# -- shot-noise study -----------------------------------------------------

@dataclass
class ShotNoiseStudy:
    metadata: dict[str, str]
    shots: np.ndarray      # per raw row
    repeat: np.ndarray
    level: np.ndarray
    max_err: np.ndarray

    def summary(self) -> list[tuple[int, int, float, float, float]]:
        """(shots, level, median, q1, q3) rows, shots ascending."""
        out = []
        for level in sorted(set(self.level.tolist())):
            for m in sorted(set(self.shots.tolist())):
                sel = (self.shots == m) & (self.level == level)
                errs = self.max_err[sel]
                out.append((int(m), int(level), float(np.median(errs)),
                            float(np.quantile(errs, 0.25)),
                            float(np.quantile(errs, 0.75))))
        return out

    def median_per_shots(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        ms = np.array(sorted(set(self.shots.tolist())), dtype=float)
        med = np.array([np.median(self.max_err[(self.shots == m) & (self.level == level)])
                        for m in ms])
        return ms, med


def shot_noise_study(config: RunConfig, shots_list: Sequence[int],
                     repeats: int) -> ShotNoiseStudy:
    """Statistical error of the sampled recursion against the exact CF.

    The reference is the exact-backend continued fraction at the same
    level, so the study isolates measurement noise from truncation error.
    """
    if config.backend.kind != "sampled":
        raise ConfigError("shot_noise_study requires the sampled backend")
    problem = build_problem(config)
    grid = config.grid.omega()
    n_max = max(config.levels)

    exact_cfg = replace(config, backend=BackendConfig(
        kind="exact", enforce_reality=config.backend.enforce_reality))
    exact_backend = make_backend(exact_cfg.backend, problem.hamiltonian.qubit_count)
    reference = _recursion_values(problem, exact_backend, config, grid, n_max)

    base = make_backend(config.backend, problem.hamiltonian.qubit_count)
    shots_col, repeat_col, level_col, err_col = [], [], [], []
    for m in shots_list:
        for rep in range(repeats):
            backend = base.session(int(m), rep)
            backend.shots = int(m)
            sampled = _recursion_values(problem, backend, config, grid, n_max)
            for level in config.levels:
                err = float(np.max(np.abs(sampled[level] - reference[level])))
                shots_col.append(int(m))
                repeat_col.append(rep)
                level_col.append(level)
                err_col.append(err)
    md = _metadata_for(config, {"study": "shots",
                                "repeats": str(repeats),
                                "shots_list": ",".join(str(int(m)) for m in shots_list)})
    return ShotNoiseStudy(metadata=md,
                          shots=np.asarray(shots_col),
                          repeat=np.asarray(repeat_col),
                          level=np.asarray(level_col),
                          max_err=np.asarray(err_col))


def _recursion_values(problem: Problem, backend, config: RunConfig,
                      grid: np.ndarray, n_max: int) -> dict[int, np.ndarray]:
    if config.mode == "scalar":
        data = cf_scalar.scalar_recursion(problem.hamiltonian, problem.ops[0],
                                          n_max, backend, problem.rho)
        return {level: np.array([cf_scalar.eval_scalar_cf(data, w, level)
                                 for w in grid]).reshape(1, 1, -1)
                for level in config.levels}
    data = cf_matrix.matrix_recursion(problem.hamiltonian, problem.ops, n_max,
                                      backend, problem.rho,
                                      threshold=config.threshold)
    return {level: _eval_matrix_grid(data, grid, level, config.form, config.threads)
            for level in config.levels}


def emit_shot_study(study: ShotNoiseStudy, path: str) -> None:
    lines = [f"# {k}={v}" for k, v in study.metadata.items()]
    lines.append("shots,repeat,level,max_err")
    for k in range(study.shots.shape[0]):
        lines.append(f"{int(study.shots[k])},{int(study.repeat[k])},"
                     f"{int(study.level[k])},{_fmt(study.max_err[k])}")
    _write_text(path, "\n".join(lines) + "\n")


# -- stability study ------------------------------------------------------

def stability_study(config: RunConfig, s: float, trials: int,
                    eta: float = 2.0) -> cf_scalar.StabilityReport:
    """Jones-Thron noise experiment on the scalar chain of the model."""
    problem = build_problem(config)
    if len(problem.ops) != 1:
        raise ConfigError("stability study runs on a single-operator chain")
    backend = make_backend(BackendConfig(kind="exact"),
                           problem.hamiltonian.qubit_count)
    n_max = max(config.levels)
    data = cf_scalar.scalar_recursion(problem.hamiltonian, problem.ops[0],
                                      n_max, backend, problem.rho)
    omegas = config.grid.omega0() + 1j * eta
    return cf_scalar.jones_thron_experiment(data, s, omegas, trials=trials,
                                            seed=config.seed)


def emit_stability(report: cf_scalar.StabilityReport, path: str,
                   metadata: dict[str, str]) -> None:
    lines = [f"# {k}={v}" for k, v in metadata.items()]
    lines.append("omega0,omega_im,q,bound,max_abs_eps,applicable")
    for k in range(report.omegas.shape[0]):
        bound = report.bound[k]
        lines.append(",".join([
            _fmt(report.omegas[k].real), _fmt(report.omegas[k].imag),
            _fmt(report.q[k]),
            _fmt(bound) if np.isfinite(bound) else "nan",
            _fmt(report.max_abs_eps[k]),
            "1" if report.applicable[k] else "0",
        ]))
    _write_text(path, "\n".join(lines) + "\n")


# -- measurement-cost estimate --------------------------------------------

def measurement_cost_estimate(n_modes: int, k0: int, d: int, n: int,
                              eps: float) -> float:
    """Fermionic-shadow sample count sum_{x=1}^{2 k0 + (2n+1) d} C(N, x) x^{3/2} log(N) / eps^2."""
    if n_modes < 1 or k0 < 1 or d < 1 or n < 0:
        raise ConfigError("n_modes, k0, d must be >= 1 and n >= 0")
    if eps <= 0:
        raise ConfigError("eps must be > 0")
    order = 2 * k0 + (2 * n + 1) * d
    if order > n_modes:
        raise DomainError(
            f"RDM order {order} exceeds the number of modes {n_modes}")
    total = 0.0
    log_n = math.log(n_modes)
    for x in range(1, order + 1):
        total += math.comb(n_modes, x) * x ** 1.5 * log_n / (eps * eps)
    return total
