"""Riemann presets, model comparisons, convergence studies and CSV output."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (
    MacroState,
    ModelKind,
    ModelParameters,
    RiemannInitial,
    SimulationConfig,
    SmoothInitial,
    to_primitive,
)
from .macro_solver import MacroRun, run_macro
from .riemann import WaveStructure, sample_grid, solve_riemann

log = logging.getLogger(__name__)

CSV_COLUMNS = ("x", "rho", "u", "model", "dx", "t")


class UnknownPresetError(KeyError):
    pass


@dataclass(frozen=True)
class ExperimentPreset:
    id: str
    rho_l: float
    u_l: float
    rho_r: float
    u_r: float
    x0: float
    t_end: float
    models: tuple[ModelKind, ...]
    domain: tuple[float, float] = (0.0, 1.0)
    resolutions: tuple[float, ...] = (0.01, 0.001)

    @property
    def initial(self) -> RiemannInitial:
        return RiemannInitial(self.rho_l, self.u_l, self.rho_r, self.u_r, self.x0)

    def config(self, model: ModelKind | str, dx: float, cfl_number: float = 0.45,
               params: ModelParameters | None = None) -> SimulationConfig:
        lo, hi = self.domain
        return SimulationConfig(model=ModelKind(model), params=params or ModelParameters(),
                                domain=self.domain, n_cells=int(round((hi - lo) / dx)),
                                t_end=self.t_end, cfl_number=cfl_number,
                                initial_condition=self.initial)

    def oracle(self, params: ModelParameters | None = None) -> WaveStructure:
        return solve_riemann((self.rho_l, self.u_l), (self.rho_r, self.u_r), params)


# Example 1 is a shock and runs in the conservative variables; the other
# three have no shocks and run in (rho, rho u).
_PRESETS = {
    "ex1": ExperimentPreset("ex1", 0.5, 1.0, 0.5, 0.0, 0.5, 0.2,
                            (ModelKind.CONSERVATIVE_AW_RASCLE, ModelKind.HAMILTON_JACOBI)),
    "ex2": ExperimentPreset("ex2", 0.0, 1.0, 0.5, 1.0, 0.5, 0.2,
                            (ModelKind.AW_RASCLE, ModelKind.HAMILTON_JACOBI)),
    "ex3": ExperimentPreset("ex3", 0.5, 0.0, 0.9, 0.5, 0.5, 0.4,
                            (ModelKind.AW_RASCLE, ModelKind.HAMILTON_JACOBI)),
    "ex4": ExperimentPreset("ex4", 0.5, 0.0, 0.1, 1.0, 0.25, 0.5,
                            (ModelKind.AW_RASCLE, ModelKind.HAMILTON_JACOBI)),
}
PRESET_IDS = tuple(_PRESETS)


def preset(preset_id: str) -> ExperimentPreset:
    try:
        return _PRESETS[preset_id]
    except KeyError:
        raise UnknownPresetError(f"unknown preset {preset_id!r}; choose from {PRESET_IDS}") from None


def format_dx(dx: float) -> str:
    return f"{dx:g}"


def csv_name(preset_id: str, model: ModelKind | str, dx: float) -> str:
    return f"{preset_id}_{ModelKind(model).value}_{format_dx(dx)}.csv"


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_csv(entries: Iterable[tuple[str, MacroState]], path,
              params: ModelParameters | None = None) -> Path:
    """Write ``(model_label, state)`` pairs as ``x,rho,u,model,dx,t`` rows."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for label, state in entries:
                rho, u = to_primitive(state, params)
                dx, t = _fmt(state.dx), _fmt(state.t)
                for xi, ri, ui in zip(state.x, rho, u):
                    writer.writerow((_fmt(xi), _fmt(ri), _fmt(ui), label, dx, t))
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path) -> dict[str, list]:
    """Read a file written by :func:`write_csv` into column lists."""
    cols: dict[str, list] = {c: [] for c in CSV_COLUMNS}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            for c in CSV_COLUMNS:
                cols[c].append(row[c] if c == "model" else float(row[c]))
    return cols


def l1_distance(a: np.ndarray, b: np.ndarray, dx: float) -> float:
    return float(np.sum(np.abs(np.asarray(a) - np.asarray(b))) * dx)


def linf_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


@dataclass
class ComparisonReport:
    preset: ExperimentPreset
    runs: dict[tuple[ModelKind, float], MacroRun] = field(default_factory=dict)
    oracle: WaveStructure | None = None
    # (label_a, label_b, dx) -> (L1, Linf) of the density at t_end
    distances: dict[tuple[str, str, float], tuple[float, float]] = field(default_factory=dict)
    failures: dict[tuple[ModelKind, float], str] = field(default_factory=dict)
    csv_paths: list[Path] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def density(self, model: ModelKind | str, dx: float) -> np.ndarray:
        run = self.runs[(ModelKind(model), dx)]
        return to_primitive(run.final, run.config.params)[0]


def _run(config: SimulationConfig) -> MacroRun:
    return run_macro(config)


def run_comparison(case: ExperimentPreset | str, models: Sequence[ModelKind | str] | None = None,
                   resolutions: Sequence[float] | None = None, *, out_dir=None,
                   cfl_number: float = 0.45, params: ModelParameters | None = None,
                   workers: int = 1) -> ComparisonReport:
    """Run every ``(model, dx)`` pair and compare densities at ``t_end``.

    Distances are computed between all runs sharing a grid and, for
    Aw-Rascle runs, against the exact Riemann solution.  Failed runs are
    recorded in ``failures`` and leave the report partial.
    """
    case = preset(case) if isinstance(case, str) else case
    models = tuple(ModelKind(m) for m in (models or case.models))
    resolutions = tuple(resolutions or case.resolutions)
    params = params or ModelParameters()
    report = ComparisonReport(case, oracle=case.oracle(params))

    keys = [(m, dx) for dx in resolutions for m in models]
    configs = [case.config(m, dx, cfl_number, params) for m, dx in keys]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run, c) for c in configs]
            outcomes = []
            for fut in futures:
                try:
                    outcomes.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - reported as partial result
                    outcomes.append(exc)
    else:
        outcomes = []
        for c in configs:
            try:
                outcomes.append(_run(c))
            except Exception as exc:  # noqa: BLE001 - reported as partial result
                outcomes.append(exc)

    for key, outcome in zip(keys, outcomes):
        if isinstance(outcome, Exception):
            log.warning("run %s dx=%s failed: %s", key[0].value, key[1], outcome)
            report.failures[key] = f"{type(outcome).__name__}: {outcome}"
        else:
            report.runs[key] = outcome

    for dx in resolutions:
        done = [m for m in models if (m, dx) in report.runs]
        for i, a in enumerate(done):
            rho_a = report.density(a, dx)
            for b in done[i + 1:]:
                rho_b = report.density(b, dx)
                report.distances[(a.value, b.value, dx)] = (
                    l1_distance(rho_a, rho_b, dx), linf_distance(rho_a, rho_b))
            if a in (ModelKind.AW_RASCLE, ModelKind.CONSERVATIVE_AW_RASCLE):
                state = report.runs[(a, dx)].final
                exact, _ = sample_grid(report.oracle, state.x, case.x0, state.t)
                report.distances[(a.value, "oracle", dx)] = (
                    l1_distance(rho_a, exact, dx), linf_distance(rho_a, exact))

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for (m, dx), run in report.runs.items():
            path = write_csv([(m.value, run.final)], out / csv_name(case.id, m, dx), params)
            report.csv_paths.append(path)
    return report


def oracle_state(case: ExperimentPreset | str, t: float, dx: float,
                 params: ModelParameters | None = None) -> MacroState:
    """Exact solution sampled at cell centres, as a momentum-variable state."""
    case = preset(case) if isinstance(case, str) else case
    lo, hi = case.domain
    n = int(round((hi - lo) / dx))
    x = lo + (np.arange(n) + 0.5) * dx
    rho, u = sample_grid(case.oracle(params), x, case.x0, t)
    return MacroState(lo, dx, rho, rho * u, t=t)


# --- convergence -------------------------------------------------------------

def _restrict(fine: np.ndarray, periodic: bool) -> np.ndarray:
    """Fourth-order interpolation of a fine grid onto the coarse cell centres.

    Coarse centre ``i`` lies midway between fine centres ``2i`` and ``2i+1``.
    """
    if periodic:
        ext = np.concatenate([fine[-1:], fine, fine[:1]])
    else:
        ext = np.concatenate([2 * fine[:1] - fine[1:2], fine, 2 * fine[-1:] - fine[-2:-1]])
    a, b = ext[1:-1:2], ext[2::2]
    before, after = ext[0:-2:2], ext[3::2]
    return (-before + 9 * a + 9 * b - after) / 16.0


def extremum_mask(values: np.ndarray, margin: int) -> np.ndarray:
    """True for cells farther than ``margin`` cells from a local extremum.

    A field whose total variation is at roundoff level has no extrema.
    """
    keep = np.ones(values.size, dtype=bool)
    if np.ptp(values) <= 1e-9 * max(1.0, float(np.max(np.abs(values)))):
        return keep
    d = np.diff(values)
    turns = np.nonzero(d[:-1] * d[1:] <= 0)[0] + 1
    for i in turns:
        keep[max(0, i - margin):i + margin + 1] = False
    return keep


@dataclass
class ConvergenceResult:
    cells: list[int]
    errors: list[float]
    orders: list[float]
    excluded_errors: list[float]
    excluded_orders: list[float]

    @property
    def mean_order(self) -> float:
        finite = [o for o in self.orders if math.isfinite(o)]
        return float(np.mean(finite)) if finite else math.nan

    @property
    def mean_excluded_order(self) -> float:
        finite = [o for o in self.excluded_orders if math.isfinite(o)]
        return float(np.mean(finite)) if finite else math.nan


def _order(e_coarse: float, e_fine: float) -> float:
    if e_coarse == 0 or e_fine == 0:
        return math.nan
    return math.log2(e_coarse / e_fine)


def smooth_profile(kind: str = "advection", amplitude: float = 0.1):
    """Periodic smooth initial data used by the convergence studies."""
    if kind == "advection":
        return SmoothInitial(lambda x: (0.5 + amplitude * np.sin(2 * np.pi * x),
                                        np.full_like(x, 0.5)))
    if kind == "wave":
        return SmoothInitial(lambda x: (0.5 + amplitude * np.sin(2 * np.pi * x),
                                        0.5 + amplitude * np.cos(2 * np.pi * x)))
    if kind == "constant":
        return SmoothInitial(lambda x: (np.full_like(x, 0.5), np.full_like(x, 0.5)))
    raise ValueError(f"unknown smooth profile {kind!r}")


def convergence_study(model: ModelKind | str, initial: SmoothInitial, levels: int = 3, *,
                      base_cells: int = 100, t_end: float = 0.1, cfl_number: float = 0.45,
                      params: ModelParameters | None = None, boundary: str = "periodic",
                      exclusion_width: float = 0.05) -> ConvergenceResult:
    """L1 self-convergence of the density on ``levels`` grids ``n, 2n, 4n, ...``.

    Consecutive grids give one difference each and consecutive differences
    one order estimate.  The excluded norm drops cells within
    ``exclusion_width`` of an extremum of the density or the velocity.  The
    limiter clips the reconstruction there, and at velocity extrema the
    Hamilton-Jacobi source ``|u_x| u_x`` is only once differentiable.
    """
    if levels < 3:
        raise ValueError("need at least 3 levels")
    base = SimulationConfig(model=model, params=params or ModelParameters(),
                            n_cells=base_cells, t_end=t_end, cfl_number=cfl_number,
                            initial_condition=initial, boundary=boundary)
    cells = [base_cells * 2**k for k in range(levels)]
    densities, velocities = [], []
    for n in cells:
        run = run_macro(replace(base, n_cells=n))
        rho, u = to_primitive(run.final, base.params)
        densities.append(rho)
        velocities.append(u)

    periodic = boundary == "periodic"
    length = base.domain[1] - base.domain[0]
    errors, excluded = [], []
    for k, (coarse, fine) in enumerate(zip(densities[:-1], densities[1:])):
        diff = np.abs(coarse - _restrict(fine, periodic))
        dx = length / coarse.size
        margin = int(math.ceil(exclusion_width / dx))
        keep = extremum_mask(coarse, margin) & extremum_mask(velocities[k], margin)
        if not periodic:
            keep[:margin] = keep[-margin:] = False
        errors.append(float(np.sum(diff) * dx))
        excluded.append(float(np.sum(diff[keep]) * dx))
    orders = [_order(a, b) for a, b in zip(errors[:-1], errors[1:])]
    ex_orders = [_order(a, b) for a, b in zip(excluded[:-1], excluded[1:])]
    return ConvergenceResult(cells, errors, orders, excluded, ex_orders)
