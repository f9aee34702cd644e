"""Domain types, parameter validation and variable conversions.

Densities are normalized by default (``H = 1``, ``v_ref = 1``, so the
maximal density is 1).  With a different ``H`` the density is the number
density and the maximal density is ``1/H``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

#: densities below this are treated as vacuum
VACUUM_FLOOR = 1e-10
#: distance kept from the maximal density before evaluating coefficients
CEILING_MARGIN = 1e-10


class DomainError(ValueError):
    """An argument lies outside the domain of a formula."""


class ParameterError(ValueError):
    """A model parameter violates its invariant."""

    def __init__(self, name: str, message: str):
        super().__init__(f"{name}: {message}")
        self.name = name


class ModelKind(str, enum.Enum):
    AW_RASCLE = "ar"
    HAMILTON_JACOBI = "hj"
    MERGED = "merged"
    CONSERVATIVE_AW_RASCLE = "ar-cons"

    @property
    def variable_set(self) -> "VariableSet":
        if self is ModelKind.CONSERVATIVE_AW_RASCLE:
            return VariableSet.CONSERVATIVE_Y
        return VariableSet.MOMENTUM


class VariableSet(str, enum.Enum):
    MOMENTUM = "momentum"
    CONSERVATIVE_Y = "conservative_y"


@dataclass(frozen=True)
class ModelParameters:
    """Physical and kinetic constants.

    ``q_A``/``q_B`` are the explicit interaction-rate weights used by the
    raw Enskog-term evaluators.  The coefficient functions ``a`` and ``b``
    absorb them as the headway density at the respective threshold,
    ``q_X = q(H_X; rho)``; see :func:`kintraffic.closure.headway_weights`.
    """

    H: float = 1.0
    H_A: float = 1.0
    H_B: float = 1.0
    v_ref: float = 1.0
    w: float = 1.0
    q_A: float = 1.0
    q_B: float = 1.0
    alpha: float = 1.5
    beta: float = 0.5
    eta: int = 1
    c_eta: float = 1.0
    C_limit: float = 1.0

    def __post_init__(self):
        checks = [
            ("H", self.H > 0, "must be positive"),
            ("H_B", self.H_B > 0, "must be positive"),
            ("H_A", self.H_A >= self.H_B, "must be >= H_B"),
            ("v_ref", self.v_ref > 0, "must be positive"),
            ("w", self.w > 0, "must be positive"),
            ("q_A", self.q_A >= 0, "must be non-negative"),
            ("q_B", self.q_B >= 0, "must be non-negative"),
            ("alpha", self.alpha > 1, "must exceed 1"),
            ("beta", 0 < self.beta < 1, "must lie in (0, 1)"),
            ("eta", self.eta in (1, 2), "must be 1 or 2"),
            ("c_eta", self.c_eta > 0, "must be positive"),
            ("C_limit", self.C_limit > 0, "must be positive"),
        ]
        for name, ok, msg in checks:
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ParameterError(name, "must be finite")
            if not ok:
                raise ParameterError(name, f"{msg} (got {value!r})")

    @property
    def rho_max(self) -> float:
        return 1.0 / self.H


@dataclass(frozen=True, eq=False)
class MacroState:
    """Cell-centred fields on a uniform grid.

    ``m`` holds ``rho*u`` for the momentum variable set and
    ``y = rho*(u + p(rho))`` for the conservative one.
    """

    x0: float
    dx: float
    rho: np.ndarray
    m: np.ndarray
    variable_set: VariableSet = VariableSet.MOMENTUM
    t: float = 0.0

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        m = np.asarray(self.m, dtype=float)
        if rho.ndim != 1 or rho.shape != m.shape:
            raise ValueError("rho and m must be 1-D arrays of equal length")
        if rho.size < 5:
            raise ValueError("at least 5 cells are needed")
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(m))):
            raise ValueError("state contains non-finite values")
        rho.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "variable_set", VariableSet(self.variable_set))

    @property
    def n(self) -> int:
        return self.rho.size

    @property
    def x(self) -> np.ndarray:
        return self.x0 + (np.arange(self.n) + 0.5) * self.dx

    def mass(self) -> float:
        return float(np.sum(self.rho) * self.dx)

    def replace(self, **changes) -> "MacroState":
        values = dict(x0=self.x0, dx=self.dx, rho=self.rho, m=self.m,
                      variable_set=self.variable_set, t=self.t)
        values.update(changes)
        return MacroState(**values)


@dataclass(frozen=True)
class RiemannInitial:
    rho_l: float
    u_l: float
    rho_r: float
    u_r: float
    x0: float

    def profile(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        left = x < self.x0
        rho = np.where(left, self.rho_l, self.rho_r)
        u = np.where(left, self.u_l, self.u_r)
        return rho.astype(float), u.astype(float)


@dataclass(frozen=True)
class SmoothInitial:
    """Initial data given by a callable ``x -> (rho, u)``."""

    func: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]

    def profile(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rho, u = self.func(x)
        return (np.broadcast_to(np.asarray(rho, dtype=float), x.shape).copy(),
                np.broadcast_to(np.asarray(u, dtype=float), x.shape).copy())


@dataclass(frozen=True)
class SimulationConfig:
    model: ModelKind = ModelKind.AW_RASCLE
    params: ModelParameters = field(default_factory=ModelParameters)
    domain: tuple[float, float] = (0.0, 1.0)
    n_cells: int = 100
    t_end: float = 0.2
    cfl_number: float = 0.45
    initial_condition: RiemannInitial | SmoothInitial = field(
        default_factory=lambda: RiemannInitial(0.5, 1.0, 0.5, 0.0, 0.5))
    output_times: Sequence[float] = ()
    boundary: str = "outflow"
    coefficients: str = "simplified"

    def __post_init__(self):
        object.__setattr__(self, "model", ModelKind(self.model))
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError("domain must satisfy x_lo < x_hi")
        if self.n_cells < 10:
            raise ValueError("n_cells must be at least 10")
        if not 0 < self.cfl_number <= 0.5:
            raise ValueError("cfl_number must lie in (0, 0.5]")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        ic = self.initial_condition
        if isinstance(ic, RiemannInitial) and not lo < ic.x0 < hi:
            raise ValueError("Riemann discontinuity x0 must lie inside the domain")
        if self.boundary not in ("outflow", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.coefficients not in ("simplified", "kinetic"):
            raise ValueError(f"unknown coefficient family {self.coefficients!r}")
        if self.coefficients == "kinetic" and self.model is ModelKind.CONSERVATIVE_AW_RASCLE:
            raise ValueError("the conservative form needs the simplified coefficient")
        for t in self.output_times:
            if not 0 <= t <= self.t_end:
                raise ValueError(f"output time {t} outside [0, t_end]")

    @property
    def dx(self) -> float:
        lo, hi = self.domain
        return (hi - lo) / self.n_cells

    def initial_state(self) -> MacroState:
        lo, _ = self.domain
        x = lo + (np.arange(self.n_cells) + 0.5) * self.dx
        rho, u = self.initial_condition.profile(x)
        return from_primitive(rho, u, self.params, self.model.variable_set,
                              x0=lo, dx=self.dx)


def pressure(rho, params: ModelParameters | None = None):
    """Pseudo-pressure ``p(rho) = -v_ref * ln(1 - rho*H)``."""
    params = params or ModelParameters()
    r = np.asarray(rho, dtype=float) * params.H
    if np.any(r < 0) or np.any(r >= 1):
        raise DomainError("pressure needs 0 <= rho*H < 1")
    out = -params.v_ref * np.log1p(-r)
    return float(out) if np.ndim(out) == 0 else out


def pressure_inverse(p_val, params: ModelParameters | None = None):
    params = params or ModelParameters()
    p = np.asarray(p_val, dtype=float)
    if np.any(p < 0):
        raise DomainError("pressure_inverse needs p >= 0")
    # expm1 rounds to -1 for huge p; keep the result below rho_max
    out = np.minimum(-np.expm1(-p / params.v_ref), 1.0 - CEILING_MARGIN) / params.H
    return float(out) if np.ndim(out) == 0 else out


def from_primitive(rho, u, params: ModelParameters | None = None,
                   variable_set: VariableSet = VariableSet.MOMENTUM,
                   *, x0: float = 0.0, dx: float = 1.0, t: float = 0.0) -> MacroState:
    params = params or ModelParameters()
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(rho < 0) or np.any(rho * params.H >= 1):
        raise DomainError("densities must satisfy 0 <= rho < rho_max")
    if VariableSet(variable_set) is VariableSet.CONSERVATIVE_Y:
        m = rho * (u + pressure(rho, params))
    else:
        m = rho * u
    return MacroState(x0, dx, rho, m, variable_set, t)


def to_primitive(state: MacroState, params: ModelParameters | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(rho, u)``; vacuum cells report ``u = 0``."""
    params = params or ModelParameters()
    rho = state.rho
    occupied = rho >= VACUUM_FLOOR
    safe = np.where(occupied, rho, 1.0)
    u = state.m / safe
    if state.variable_set is VariableSet.CONSERVATIVE_Y:
        r = np.clip(safe * params.H, 0.0, 1.0 - CEILING_MARGIN)
        u = u + params.v_ref * np.log1p(-r)
    return rho.copy(), np.where(occupied, u, 0.0)
