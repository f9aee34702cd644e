"""Staggered second-order central scheme for ``phi_t + H(phi, phi_x) = 0``.

The state ``phi = (rho, m)`` is advanced on the half-shifted grid with a
midpoint predictor that uses analytic Jacobians of ``H``, then recentred
onto the original cells.  Boundaries use three ghost cells per side, filled
by constant extrapolation (outflow) or by wrapping (periodic).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .closure import CoefficientProfile, kinetic_profile, simplified_profile
from .core import (
    VACUUM_FLOOR,
    MacroState,
    ModelKind,
    ModelParameters,
    SimulationConfig,
)

log = logging.getLogger(__name__)

GHOST = 3


class CFLViolationError(RuntimeError):
    pass


class NonFiniteStateError(RuntimeError):
    pass


@dataclass
class HamiltonianEval:
    """``H`` and its Jacobians at ``n`` points.

    ``value`` has shape ``(2, n)``; both Jacobians have shape ``(n, 2, 2)``.
    """

    value: np.ndarray
    dH_dphi: np.ndarray
    dH_dphix: np.ndarray


@dataclass(frozen=True)
class StepReport:
    dt: float
    lambda_max: float
    max_abs_ux: float
    mass_before: float
    mass_after: float
    gradient_limited: bool
    dx: float

    @property
    def cfl(self) -> float:
        return self.dt * self.lambda_max / self.dx


def minmod3(x1, x2, x3):
    """Three-argument MinMod, elementwise."""
    x1, x2, x3 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, x3)))
    pos = (x1 > 0) & (x2 > 0) & (x3 > 0)
    neg = (x1 < 0) & (x2 < 0) & (x3 < 0)
    out = np.where(pos, np.minimum(np.minimum(x1, x2), x3),
                   np.where(neg, np.maximum(np.maximum(x1, x2), x3), 0.0))
    return float(out) if out.ndim == 0 else out


def make_profile(params: ModelParameters, family: str = "simplified") -> CoefficientProfile:
    if family == "kinetic":
        return kinetic_profile(params)
    return simplified_profile(params)


def _gradient_law(model, ux, params):
    """Return ``G(u_x)`` and ``G'(u_x)`` of the momentum source ``rho c G``."""
    if model is ModelKind.AW_RASCLE:
        return ux, np.ones_like(ux)
    mag = np.abs(ux)
    if model is ModelKind.HAMILTON_JACOBI:
        return mag * ux, 2.0 * mag
    capped = np.minimum(mag, params.C_limit)
    return capped * ux, np.where(mag < params.C_limit, 2.0 * mag, params.C_limit)


def _momentum_hamiltonian(model, rho, m, rx, mx, params, profile):
    u = m / rho
    ux = (mx - u * rx) / rho
    rc = profile.clamp(rho)
    brake = ux < 0
    coeff = profile.a if model is ModelKind.AW_RASCLE else profile.b
    c, dc = coeff(rc, brake)
    dc = np.where(rc < rho, 0.0, dc)
    G, Gp = _gradient_law(model, ux, params)

    value = np.stack([mx, 2.0 * u * mx - u * u * rx - rho * c * G])

    ux_rho = (u * rx / rho - ux) / rho
    ux_m = -rx / rho**2
    flux_grad = 2.0 * mx - 2.0 * u * rx
    a_rho = flux_grad * (-u / rho)
    a_m = flux_grad / rho
    s_rho = (c + rho * dc) * G + rho * c * Gp * ux_rho
    s_m = rho * c * Gp * ux_m

    n = rho.size
    jac = np.zeros((n, 2, 2))
    jac[:, 1, 0] = a_rho - s_rho
    jac[:, 1, 1] = a_m - s_m
    jacx = np.zeros((n, 2, 2))
    jacx[:, 0, 1] = 1.0
    jacx[:, 1, 0] = -u * u + c * Gp * u
    jacx[:, 1, 1] = 2.0 * u - c * Gp
    return value, jac, jacx


def _conservative_hamiltonian(rho, y, rx, yx, params, profile):
    H, v = params.H, params.v_ref
    rc = profile.clamp(rho)
    d = 1.0 - H * rc
    p = -v * np.log1p(-H * rc)
    p1 = v * H / d
    p2 = v * H * H / d**2
    clamped = rc < rho
    p1 = np.where(clamped, 0.0, p1)
    p2 = np.where(clamped, 0.0, p2)

    f1_rho = -(p + rho * p1)
    f2_rho = -(y * y) / rho**2 - y * p1
    f2_y = 2.0 * y / rho - p
    value = np.stack([f1_rho * rx + yx, f2_rho * rx + f2_y * yx])

    n = rho.size
    jac = np.zeros((n, 2, 2))
    jac[:, 0, 0] = -(2.0 * p1 + rho * p2) * rx
    jac[:, 1, 0] = (2.0 * y * y / rho**3 - y * p2) * rx + (-2.0 * y / rho**2 - p1) * yx
    jac[:, 1, 1] = (-2.0 * y / rho**2 - p1) * rx + (2.0 / rho) * yx
    jacx = np.zeros((n, 2, 2))
    jacx[:, 0, 0] = f1_rho
    jacx[:, 0, 1] = 1.0
    jacx[:, 1, 0] = f2_rho
    jacx[:, 1, 1] = f2_y
    return value, jac, jacx


def hamiltonian(model: ModelKind | str, phi, phi_x, params: ModelParameters | None = None,
                profile: CoefficientProfile | None = None) -> HamiltonianEval:
    """Evaluate ``H(phi, phi_x)`` and its analytic Jacobians.

    ``phi`` and ``phi_x`` are ``(2, n)`` arrays (or length-2 sequences for a
    single point).  Points with ``rho`` below the vacuum floor get zero value
    and zero Jacobians.
    """
    model = ModelKind(model)
    params = params or ModelParameters()
    profile = profile or simplified_profile(params)
    phi = np.asarray(phi, dtype=float).reshape(2, -1)
    phi_x = np.asarray(phi_x, dtype=float).reshape(2, -1)
    rho, m = phi
    rx, mx = phi_x
    n = rho.size
    occupied = rho >= VACUUM_FLOOR

    value = np.zeros((2, n))
    jac = np.zeros((n, 2, 2))
    jacx = np.zeros((n, 2, 2))
    if np.any(occupied):
        args = (rho[occupied], m[occupied], rx[occupied], mx[occupied], params, profile)
        if model is ModelKind.CONSERVATIVE_AW_RASCLE:
            v, j, jx = _conservative_hamiltonian(*args)
        else:
            v, j, jx = _momentum_hamiltonian(model, *args)
        value[:, occupied] = v
        jac[occupied] = j
        jacx[occupied] = jx
    return HamiltonianEval(value, jac, jacx)


def _spectral_radius(jacx: np.ndarray) -> np.ndarray:
    tr = jacx[:, 0, 0] + jacx[:, 1, 1]
    det = jacx[:, 0, 0] * jacx[:, 1, 1] - jacx[:, 0, 1] * jacx[:, 1, 0]
    disc = 0.25 * tr * tr - det
    real = 0.5 * np.abs(tr) + np.sqrt(np.maximum(disc, 0.0))
    return np.where(disc >= 0, real, np.sqrt(np.abs(det)))


def max_wave_speed(model: ModelKind | str, phi, phi_x, params: ModelParameters | None = None,
                   profile: CoefficientProfile | None = None) -> float:
    """Largest ``|eigenvalue|`` of ``dH/dphi_x`` over all points."""
    ev = hamiltonian(model, phi, phi_x, params, profile)
    if ev.dH_dphix.shape[0] == 0:
        return 0.0
    return float(np.max(_spectral_radius(ev.dH_dphix)))


def _pad(phi: np.ndarray, boundary: str) -> np.ndarray:
    mode = "wrap" if boundary == "periodic" else "edge"
    return np.pad(phi, ((0, 0), (GHOST, GHOST)), mode=mode)


def _second_differences(delta: np.ndarray) -> np.ndarray:
    """Limited second differences at the interior entries of ``delta``."""
    return minmod3(delta[:, 2:] - delta[:, 1:-1],
                   0.5 * (delta[:, 2:] - delta[:, :-2]),
                   delta[:, 1:-1] - delta[:, :-2])


def _interfaces(state: MacroState, boundary: str):
    """Interface values, slopes and limited second differences at time level m.

    Interface ``k`` of the padded array sits between padded cells ``k`` and
    ``k + 1``; the returned arrays cover ``k = 1 .. L-3``.
    """
    padded = _pad(np.stack([state.rho, state.m]), boundary)
    delta = np.diff(padded, axis=1)
    second = _second_differences(delta)
    values = padded[:, 2:-1] - 0.5 * delta[:, 1:-1] - 0.125 * second
    slopes = delta[:, 1:-1] / state.dx
    return values, slopes, second


def _velocity_gradient(model, values, slopes):
    rho, m = values
    rx, mx = slopes
    occupied = rho >= VACUUM_FLOOR
    if model is ModelKind.CONSERVATIVE_AW_RASCLE or not np.any(occupied):
        # the conservative form has no gradient-dependent source
        return 0.0
    r = rho[occupied]
    ux = (mx[occupied] - m[occupied] / r * rx[occupied]) / r
    return float(np.max(np.abs(ux)))


def stable_dt(state: MacroState, model: ModelKind | str, params: ModelParameters,
              cfl_number: float, profile: CoefficientProfile | None = None,
              boundary: str = "outflow") -> float:
    """Largest time step allowed by the CFL bound (``inf`` for a still state)."""
    model = ModelKind(model)
    values, slopes, _ = _interfaces(state, boundary)
    lam = max_wave_speed(model, values, slopes, params, profile)
    return np.inf if lam == 0 else cfl_number * state.dx / lam


def central_step(state: MacroState, dt: float, model: ModelKind | str,
                 params: ModelParameters | None = None, *,
                 profile: CoefficientProfile | None = None,
                 cfl_number: float = 0.5, boundary: str = "outflow"
                 ) -> tuple[MacroState, StepReport]:
    """Advance ``state`` by one staggered step and recentre it."""
    model = ModelKind(model)
    params = params or ModelParameters()
    profile = profile or simplified_profile(params)
    if state.variable_set is not model.variable_set:
        raise ValueError(f"model {model.value} needs the {model.variable_set.value} variables")
    dx = state.dx

    values, slopes, second = _interfaces(state, boundary)
    ev = hamiltonian(model, values, slopes, params, profile)
    radius = _spectral_radius(ev.dH_dphix)
    lam = float(np.max(radius))
    if dt * lam / dx > cfl_number * (1.0 + 1e-12):
        raise CFLViolationError(
            f"dt={dt:.3e} gives CFL number {dt * lam / dx:.4f} > {cfl_number}")

    curvature = second / dx**2
    half_values = values - 0.5 * dt * ev.value
    half_slopes = slopes - 0.5 * dt * (
        np.einsum("nij,jn->in", ev.dH_dphi, slopes)
        + np.einsum("nij,jn->in", ev.dH_dphix, curvature))
    staggered = values - dt * hamiltonian(model, half_values, half_slopes,
                                          params, profile).value

    delta = np.diff(staggered, axis=1)
    second_new = _second_differences(delta)
    # staggered[:, s] is padded interface s + 1; padded cell j sits between
    # interfaces j - 1 and j
    lo = GHOST - 2
    hi = lo + state.n
    new = staggered[:, lo:hi] + 0.5 * delta[:, lo:hi] - 0.125 * second_new[:, lo - 1:hi - 1]
    if not np.all(np.isfinite(new)):
        raise NonFiniteStateError(f"non-finite values after step at t={state.t:.6g}")

    result = state.replace(rho=new[0], m=new[1], t=state.t + dt)
    plain_speed = np.abs(values[1] / np.where(values[0] >= VACUUM_FLOOR, values[0], 1.0))
    gradient_limited = (model in (ModelKind.HAMILTON_JACOBI, ModelKind.MERGED)
                        and lam > float(np.max(np.where(values[0] >= VACUUM_FLOOR,
                                                        plain_speed, 0.0))))
    report = StepReport(dt=dt, lambda_max=lam,
                        max_abs_ux=_velocity_gradient(model, values, slopes),
                        mass_before=state.mass(), mass_after=result.mass(),
                        gradient_limited=bool(gradient_limited), dx=dx)
    return result, report


@dataclass
class MacroRun:
    config: SimulationConfig
    snapshots: list[MacroState] = field(default_factory=list)
    reports: list[StepReport] = field(default_factory=list)
    masses: list[float] = field(default_factory=list)
    steps: int = 0
    wall_time: float = 0.0

    @property
    def final(self) -> MacroState:
        return self.snapshots[-1]


def run_macro(config: SimulationConfig, *, profile: CoefficientProfile | None = None,
              max_steps: int = 5_000_000) -> MacroRun:
    """Integrate from ``t = 0`` to ``config.t_end``, landing exactly on output times."""
    start = time.perf_counter()
    params = config.params
    profile = profile or make_profile(params, config.coefficients)
    state = config.initial_state()
    run = MacroRun(config, [state], [], [state.mass()])
    targets = sorted({float(t) for t in config.output_times if t > 0} | {float(config.t_end)})
    targets = [t for t in targets if t > 0]

    for target in targets:
        while state.t < target:
            if run.steps >= max_steps:
                raise RuntimeError(f"step limit {max_steps} reached at t={state.t:.6g}")
            dt = stable_dt(state, config.model, params, config.cfl_number, profile,
                           config.boundary)
            remaining = target - state.t
            last = dt >= remaining
            dt = remaining if last else dt
            state, report = central_step(state, dt, config.model, params, profile=profile,
                                         cfl_number=config.cfl_number,
                                         boundary=config.boundary)
            if last:
                state = state.replace(t=target)
            run.reports.append(report)
            run.steps += 1
        run.snapshots.append(state)
        run.masses.append(state.mass())

    run.wall_time = time.perf_counter() - start
    log.debug("run %s: %d steps in %.2fs", config.model.value, run.steps, run.wall_time)
    return run
