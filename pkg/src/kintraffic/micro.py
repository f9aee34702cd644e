"""Car-following models and micro-to-macro density reconstruction.

Cars are ordered by position; car ``i + 1`` leads car ``i``.  The front car
holds its initial velocity (virtual leader at infinite gap).
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .core import ModelParameters, RiemannInitial


class CollisionError(RuntimeError):
    pass


class MicroStepError(RuntimeError):
    pass


class FollowModel(str, enum.Enum):
    RASCLE = "rf"
    HAMILTON_JACOBI = "hj"


@dataclass(frozen=True, eq=False)
class MicroState:
    x: np.ndarray
    v: np.ndarray
    H: float
    t: float = 0.0

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        v = np.array(self.v, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 1:
            raise ValueError("x and v must be non-empty 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("non-finite positions or velocities")
        if np.any(np.diff(x) <= self.H):
            raise CollisionError("gaps must exceed the minimal headway H")
        x.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.x.size


def _accelerations(model, x, v, H, v_ref):
    gaps = np.diff(x)
    if np.any(gaps <= H):
        raise CollisionError("a gap closed to the minimal headway")
    dv = np.diff(v)
    acc = np.zeros_like(v)
    if model is FollowModel.RASCLE:
        acc[:-1] = H * v_ref / gaps * dv / (gaps - H)
    else:
        acc[:-1] = H / gaps**2 * (np.abs(dv) * dv) / (gaps - H)
    return acc


def micro_rhs(model: FollowModel | str, state: MicroState,
              params: ModelParameters | None = None) -> np.ndarray:
    """Per-car accelerations; the leader gets zero."""
    params = params or ModelParameters()
    return _accelerations(FollowModel(model), state.x, state.v, state.H, params.v_ref)


def _rk4(model, x, v, dt, H, v_ref):
    k1x, k1v = v, _accelerations(model, x, v, H, v_ref)
    k2x = v + 0.5 * dt * k1v
    k2v = _accelerations(model, x + 0.5 * dt * k1x, k2x, H, v_ref)
    k3x = v + 0.5 * dt * k2v
    k3v = _accelerations(model, x + 0.5 * dt * k2x, k3x, H, v_ref)
    k4x = v + dt * k3v
    k4v = _accelerations(model, x + dt * k3x, k4x, H, v_ref)
    x_new = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    v_new = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    if np.any(np.diff(x_new) <= H):
        raise CollisionError("step ends in a collision")
    return x_new, v_new


def rk4_step(state: MicroState, dt: float, model: FollowModel | str,
             params: ModelParameters | None = None, *, clamp: bool = True,
             max_halvings: int = 20) -> MicroState:
    """Classical RK4 over ``dt``.

    A step whose stages collide is retried as two half steps, recursively, up
    to ``max_halvings`` levels.  Velocities are clamped to ``[0, w]``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    model = FollowModel(model)
    params = params or ModelParameters()

    def advance(x, v, h, depth):
        try:
            return _rk4(model, x, v, h, state.H, params.v_ref)
        except CollisionError:
            if depth >= max_halvings:
                raise MicroStepError(f"step failed after {max_halvings} halvings") from None
            x, v = advance(x, v, h / 2, depth + 1)
            return advance(x, v, h / 2, depth + 1)

    x, v = advance(state.x, state.v, dt, 0)
    if clamp:
        v = np.clip(v, 0.0, params.w)
    return MicroState(x, v, state.H, state.t + dt)


def stable_micro_dt(state: MicroState, model: FollowModel | str,
                    params: ModelParameters, safety: float = 0.25) -> float:
    """Step bound from the linearised relaxation rate of each follower."""
    model = FollowModel(model)
    if state.n < 2:
        return np.inf
    gaps = np.diff(state.x)
    dv = np.abs(np.diff(state.v))
    free = gaps - state.H
    if model is FollowModel.RASCLE:
        rate = state.H * params.v_ref / (gaps * free)
    else:
        rate = 2.0 * state.H * dv / (gaps**2 * free)
    closing = dv / free
    worst = float(np.max(np.maximum(rate, closing)))
    return np.inf if worst == 0 else safety / worst


def place_cars(initial: RiemannInitial, n_cars: int, domain: tuple[float, float]
               ) -> MicroState:
    """Place ``n_cars`` so that their spacing is ``H / rho`` of the initial density.

    ``H`` is chosen so that the road space occupied by the cars, ``H * N``,
    equals the integral of the initial density over ``domain``.
    """
    lo, hi = domain
    if not lo < initial.x0 < hi:
        raise ValueError("discontinuity must lie inside the domain")
    left_len, right_len = initial.x0 - lo, hi - initial.x0
    total = initial.rho_l * left_len + initial.rho_r * right_len
    if total <= 0 or n_cars < 1:
        raise ValueError("need a positive number of cars and positive density")
    H = total / n_cars
    occupied = (np.arange(n_cars) + 0.5) * H
    left_mass = initial.rho_l * left_len
    # invert X(x) = int_lo^x rho dx, piecewise linear
    in_left = occupied < left_mass
    x = np.where(in_left,
                 lo + occupied / max(initial.rho_l, 1e-300),
                 initial.x0 + (occupied - left_mass) / max(initial.rho_r, 1e-300))
    v = np.where(x < initial.x0, initial.u_l, initial.u_r)
    return MicroState(x, v, H)


def density_reconstruct(state: MicroState, x0: float, dx: float, n_cells: int
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Resample the local density ``H / l_i`` onto a uniform grid.

    Every cell whose centre lies in the gap ``[x_i, x_{i+1})`` gets
    ``rho = H / l_i`` and ``u = v_i``; cells outside the platoon are empty.
    """
    centres = x0 + (np.arange(n_cells) + 0.5) * dx
    rho = np.zeros(n_cells)
    u = np.zeros(n_cells)
    if state.n < 2:
        return rho, u
    gaps = np.diff(state.x)
    idx = np.searchsorted(state.x, centres, side="right") - 1
    inside = (idx >= 0) & (idx < state.n - 1)
    rho[inside] = state.H / gaps[idx[inside]]
    u[inside] = state.v[idx[inside]]
    return rho, u


def midpoint_samples(state: MicroState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gap midpoints with their local density and follower velocity."""
    gaps = np.diff(state.x)
    return 0.5 * (state.x[1:] + state.x[:-1]), state.H / gaps, state.v[:-1].copy()


@dataclass(frozen=True)
class MicroConfig:
    model: FollowModel = FollowModel.RASCLE
    params: ModelParameters = field(default_factory=ModelParameters)
    n_cars: int = 100
    initial: RiemannInitial = field(default_factory=lambda: RiemannInitial(0.5, 1.0, 0.5, 0.0, 0.5))
    domain: tuple[float, float] = (0.0, 1.0)
    t_end: float = 0.2
    dt: float | None = None
    output_times: tuple[float, ...] = ()
    n_cells: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "model", FollowModel(self.model))
        if self.n_cars < 2:
            raise ValueError("n_cars must be at least 2")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class MicroRun:
    config: MicroConfig
    states: list[MicroState] = field(default_factory=list)
    fields: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    steps: int = 0
    wall_time: float = 0.0

    @property
    def final(self) -> MicroState:
        return self.states[-1]


def run_micro(config: MicroConfig) -> MicroRun:
    start = time.perf_counter()
    lo, hi = config.domain
    dx = (hi - lo) / config.n_cells
    state = place_cars(config.initial, config.n_cars, config.domain)
    run = MicroRun(config)

    def record(s):
        run.states.append(s)
        run.fields.append(density_reconstruct(s, lo, dx, config.n_cells))

    record(state)
    targets = sorted({float(t) for t in config.output_times if t > 0} | {float(config.t_end)})
    for target in (t for t in targets if t > 0):
        while state.t < target:
            dt = config.dt or stable_micro_dt(state, config.model, config.params)
            remaining = target - state.t
            last = dt >= remaining
            state = rk4_step(state, remaining if last else dt, config.model, config.params)
            if last:
                state = MicroState(state.x, state.v, state.H, target)
            run.steps += 1
        record(state)
    run.wall_time = time.perf_counter() - start
    return run
