"""Kinetic closure: headway statistics, Enskog terms and momentum coefficients.

All functions accept scalars or numpy arrays.  Scalars come back as floats.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import CEILING_MARGIN, DomainError, ModelParameters


class ClosureVariant(str, enum.Enum):
    BOLTZMANN_EX1 = "boltzmann-ex1"
    BOLTZMANN_EX2 = "boltzmann-ex2"
    FOKKER_PLANCK_ETA1 = "fp-eta1"
    FOKKER_PLANCK_ETA2 = "fp-eta2"


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def _check_density(rho, H_B):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(rho * H_B >= 1):
        raise DomainError(f"density must satisfy 0 <= rho < 1/H_B = {1.0 / H_B}")
    return rho


def reduced_density(rho, H_B: float = 1.0):
    """``rho / (1 - rho*H_B)``: density after removing the minimal headways."""
    rho = _check_density(rho, H_B)
    return _out(rho / (1.0 - rho * H_B))


def headway_pdf(h, rho, H_B: float = 1.0):
    """Shifted-exponential headway density ``q(h; rho)`` with support ``[H_B, inf)``."""
    rt = np.asarray(reduced_density(rho, H_B))
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise DomainError("headway must be non-negative")
    inside = h >= H_B
    # exponent clipped on the zero branch only, to avoid overflow warnings
    expo = np.where(inside, -rt * (h - H_B), 0.0)
    return _out(np.where(inside, rt * np.exp(expo), 0.0))


def headway_weights(rho, params: ModelParameters):
    """Interaction weights ``(q_A, q_B) = (q(H_A; rho), q(H_B; rho))``.

    These are the weights absorbed in :func:`coeff_a` and :func:`coeff_b`.
    """
    rt = np.asarray(reduced_density(rho, params.H_B))
    q_b = rt
    q_a = rt * np.exp(-rt * (params.H_A - params.H_B))
    return _out(q_a), _out(q_b)


def braking_probability(rho, H_B: float = 1.0):
    rho = _check_density(rho, H_B)
    rt = rho / (1.0 - rho * H_B)
    return _out(1.0 - (1.0 - rho * H_B) * np.exp(-rt * H_B))


def _braking_probability_derivative(rho, H_B):
    rt = rho / (1.0 - rho * H_B)
    return H_B * np.exp(-rt * H_B) * (1.0 + 1.0 / (1.0 - rho * H_B))


def enskog_term(variant: ClosureVariant | str, rho, u, du_dx,
                params: ModelParameters | None = None):
    """Closed Enskog term ``E`` of the momentum balance.

    The braking branch applies where ``du_dx < 0``, the acceleration branch
    where ``du_dx > 0``.  The explicit weights ``params.q_A``/``params.q_B``
    are used as given.
    """
    variant = ClosureVariant(variant)
    params = params or ModelParameters()
    rho = _check_density(rho, params.H_B)
    u = np.asarray(u, dtype=float)
    g = np.asarray(du_dx, dtype=float)
    if np.any(u < 0) or np.any(u > params.w):
        raise DomainError(f"velocity must lie in [0, w={params.w}]")
    p_b = np.asarray(braking_probability(rho, params.H_B))
    q_a, q_b = params.q_A, params.q_B
    H_A, H_B = params.H_A, params.H_B

    if variant is ClosureVariant.BOLTZMANN_EX1:
        brake = -q_b * p_b * rho * H_B**2 * g * np.abs(g)
        accel = -q_a * rho * H_A**2 * g * np.abs(g)
    elif variant is ClosureVariant.BOLTZMANN_EX2:
        brake = -q_b * p_b * rho * H_B * (1.0 - params.beta) / 2.0 * u * g
        accel = -q_a * rho * H_A * (np.minimum(params.alpha * u, params.w) - u) / 2.0 * g
    elif variant is ClosureVariant.FOKKER_PLANCK_ETA1:
        brake = -params.v_ref * q_b * p_b * rho * H_B * g
        accel = -params.v_ref * q_a * rho * H_A * g
    else:
        brake = -params.c_eta * q_b * p_b * rho * H_B**2 * np.abs(g) * g
        accel = -params.c_eta * q_a * rho * H_A**2 * np.abs(g) * g

    return _out(np.where(g < 0, brake, np.where(g > 0, accel, 0.0)))


def _velocity_factor(f, u, default):
    if f is None:
        return default
    return np.asarray(f(u), dtype=float)


def coeff_a(rho, u, du_sign, params: ModelParameters | None = None,
            f_A: Callable | None = None, f_B: Callable | None = None,
            braking_prob=None):
    """Aw-Rascle-type coefficient ``a(rho, u)``.

    ``f_A``/``f_B`` default to the constant ``v_ref``.  ``braking_prob``
    overrides ``P_B`` (e.g. ``1`` for the fully simplified model).
    """
    params = params or ModelParameters()
    rt = np.asarray(reduced_density(rho, params.H_B))
    p_b = braking_probability(rho, params.H_B) if braking_prob is None else braking_prob
    u = np.asarray(u, dtype=float)
    brake = params.H_B * p_b * rt * _velocity_factor(f_B, u, params.v_ref)
    accel = (params.H_A * rt * np.exp(-rt * (params.H_A - params.H_B))
             * _velocity_factor(f_A, u, params.v_ref))
    return _out(np.where(np.asarray(du_sign) < 0, brake, accel))


def coeff_b(rho, du_sign, params: ModelParameters | None = None, braking_prob=None):
    """Hamilton-Jacobi coefficient ``b(rho, u)`` (dimension of a length)."""
    params = params or ModelParameters()
    rt = np.asarray(reduced_density(rho, params.H_B))
    p_b = braking_probability(rho, params.H_B) if braking_prob is None else braking_prob
    brake = params.H_B**2 * p_b * rt
    accel = params.H_A**2 * rt * np.exp(-rt * (params.H_A - params.H_B))
    return _out(np.where(np.asarray(du_sign) < 0, brake, accel))


def simplified_a(rho, params: ModelParameters | None = None):
    """``a(rho) = H v_ref / (1/rho - H)``."""
    params = params or ModelParameters()
    rho = _check_density(rho, params.H)
    return _out(params.H * params.v_ref * rho / (1.0 - rho * params.H))


def simplified_b(rho, params: ModelParameters | None = None):
    """``b(rho) = H^2 / (1/rho - H)``."""
    params = params or ModelParameters()
    rho = _check_density(rho, params.H)
    return _out(params.H**2 * rho / (1.0 - rho * params.H))


def merged_coefficient(rho, du_dx, params: ModelParameters | None = None):
    """Effective merged-model coefficient ``b(rho) * min(|du_dx|, C)``."""
    params = params or ModelParameters()
    return _out(np.asarray(simplified_b(rho, params))
                * np.minimum(np.abs(np.asarray(du_dx, dtype=float)), params.C_limit))


@dataclass(frozen=True)
class CoefficientProfile:
    """Momentum coefficients as consumed by the solver.

    Each callable maps ``(rho, brake)`` to ``(value, d value / d rho)``, where
    ``brake`` is a boolean array selecting the braking branch.  Densities are
    clamped just below ``rho_cap`` before evaluation.
    """

    a: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    b: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    rho_cap: float

    def clamp(self, rho: np.ndarray) -> np.ndarray:
        return np.minimum(rho, self.rho_cap - CEILING_MARGIN)


def simplified_profile(params: ModelParameters | None = None) -> CoefficientProfile:
    params = params or ModelParameters()
    H, v = params.H, params.v_ref

    def a(rho, brake):
        d = 1.0 - rho * H
        return H * v * rho / d, H * v / d**2

    def b(rho, brake):
        d = 1.0 - rho * H
        return H * H * rho / d, H * H / d**2

    return CoefficientProfile(a, b, 1.0 / H)


def kinetic_profile(params: ModelParameters | None = None,
                    f_A: float | None = None, f_B: float | None = None) -> CoefficientProfile:
    """Branch-dependent coefficients with constant velocity factors."""
    params = params or ModelParameters()
    H_A, H_B = params.H_A, params.H_B
    gap = H_A - H_B
    f_A = params.v_ref if f_A is None else f_A
    f_B = params.v_ref if f_B is None else f_B

    def parts(rho):
        d = 1.0 - rho * H_B
        rt = rho / d
        drt = 1.0 / d**2
        p_b = 1.0 - d * np.exp(-rt * H_B)
        dp_b = _braking_probability_derivative(rho, H_B)
        decay = np.exp(-rt * gap)
        return rt, drt, p_b, dp_b, decay

    def make(scale_b, scale_a):
        def coeff(rho, brake):
            rt, drt, p_b, dp_b, decay = parts(rho)
            val_b = scale_b * p_b * rt
            der_b = scale_b * (dp_b * rt + p_b * drt)
            val_a = scale_a * rt * decay
            der_a = scale_a * drt * (1.0 - rt * gap) * decay
            return np.where(brake, val_b, val_a), np.where(brake, der_b, der_a)
        return coeff

    return CoefficientProfile(make(H_B * f_B, H_A * f_A), make(H_B**2, H_A**2), 1.0 / H_B)
