"""Exact Riemann solutions of the Aw-Rascle-type system.

The pressure is ``p(rho) = -v_ref ln(1 - rho H)``.  First-family waves keep
``w = u + p(rho)`` constant; the second family is a contact moving with the
right-state velocity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError, ModelParameters, pressure, pressure_inverse


class UnsupportedRiemannInput(ValueError):
    pass


@dataclass(frozen=True)
class Shock:
    speed: float


@dataclass(frozen=True)
class Rarefaction:
    head_speed: float
    tail_speed: float


@dataclass(frozen=True)
class WaveStructure:
    left: tuple[float, float]
    right: tuple[float, float]
    wave1: Shock | Rarefaction | None
    middle: tuple[float, float]
    vacuum: tuple[float, float] | None
    contact_speed: float
    params: ModelParameters

    @property
    def has_vacuum(self) -> bool:
        return self.vacuum is not None


def characteristic_speed(rho, u, params: ModelParameters):
    """First-family eigenvalue ``u - rho p'(rho)``."""
    rho = np.asarray(rho, dtype=float)
    return u - params.v_ref * params.H * rho / (1.0 - params.H * rho)


def solve_riemann(left, right, params: ModelParameters | None = None) -> WaveStructure:
    params = params or ModelParameters()
    rho_l, u_l = map(float, left)
    rho_r, u_r = map(float, right)
    for rho in (rho_l, rho_r):
        if not 0 <= rho * params.H < 1:
            raise DomainError("densities must satisfy 0 <= rho < rho_max")
    if rho_l == 0 and rho_r == 0:
        raise UnsupportedRiemannInput("both states are vacuum")

    if rho_l == 0:
        # nothing to the left can interact; only the contact remains
        return WaveStructure((rho_l, u_l), (rho_r, u_r), None, (rho_r, u_r), None, u_r, params)

    w_l = u_l + pressure(rho_l, params)
    if rho_r == 0 or u_r >= w_l:
        # cars ahead escape faster than the fan can follow
        head = float(characteristic_speed(rho_l, u_l, params))
        fan = Rarefaction(head, w_l)
        if rho_r == 0:
            return WaveStructure((rho_l, u_l), (rho_r, u_r), fan, (0.0, w_l),
                                 None, w_l, params)
        vacuum = (w_l, u_r) if u_r > w_l else None
        return WaveStructure((rho_l, u_l), (rho_r, u_r), fan, (0.0, w_l), vacuum, u_r, params)

    rho_m = pressure_inverse(w_l - u_r, params)
    u_m = u_r
    if u_l > u_m:
        speed = (rho_m * u_m - rho_l * u_l) / (rho_m - rho_l)
        wave = Shock(speed)
    elif u_l < u_m:
        wave = Rarefaction(float(characteristic_speed(rho_l, u_l, params)),
                           float(characteristic_speed(rho_m, u_m, params)))
    else:
        wave = None
    return WaveStructure((rho_l, u_l), (rho_r, u_r), wave, (rho_m, u_m), None, u_r, params)


def _fan_density(ws: WaveStructure, xi: float) -> float:
    """Density inside the 1-fan, solving ``lambda_1(rho) = xi`` by bisection."""
    params = ws.params
    w_l = ws.left[1] + pressure(ws.left[0], params)

    def speed(rho):
        return float(characteristic_speed(rho, w_l - pressure(rho, params), params))

    # lambda_1 decreases in rho along the fan
    lo, hi = min(ws.left[0], ws.middle[0]), max(ws.left[0], ws.middle[0])
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if speed(mid) > xi:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sample(ws: WaveStructure, xi) -> tuple[np.ndarray, np.ndarray] | tuple[float, float]:
    """Evaluate the self-similar solution at ``xi = (x - x0)/t``."""
    scalar = np.ndim(xi) == 0
    xs = np.atleast_1d(np.asarray(xi, dtype=float))
    rho = np.empty_like(xs)
    u = np.empty_like(xs)
    params = ws.params
    w_l = ws.left[1] + pressure(ws.left[0], params) if ws.left[0] > 0 else None

    for i, s in enumerate(xs):
        if s >= ws.contact_speed and ws.right[0] > 0:
            rho[i], u[i] = ws.right
            continue
        wave = ws.wave1
        if wave is None:
            rho[i], u[i] = ws.left
            continue
        if isinstance(wave, Shock):
            rho[i], u[i] = ws.left if s < wave.speed else ws.middle
        elif s < wave.head_speed:
            rho[i], u[i] = ws.left
        elif s < wave.tail_speed:
            r = _fan_density(ws, s)
            rho[i], u[i] = r, w_l - pressure(r, params)
        elif ws.vacuum is not None or ws.right[0] == 0:
            # vacuum between the fan tail and the contact; velocity of the
            # last car continues across it
            rho[i], u[i] = 0.0, ws.middle[1]
        else:
            rho[i], u[i] = ws.middle
    if scalar:
        return float(rho[0]), float(u[0])
    return rho, u


def sample_grid(ws: WaveStructure, x: np.ndarray, x0: float, t: float):
    """Exact ``(rho, u)`` at positions ``x`` and time ``t > 0``."""
    if t <= 0:
        x = np.asarray(x, dtype=float)
        left = x < x0
        return (np.where(left, ws.left[0], ws.right[0]),
                np.where(left, ws.left[1], ws.right[1]))
    return sample(ws, (np.asarray(x, dtype=float) - x0) / t)
