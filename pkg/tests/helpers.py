"""Shared numerical checks used by several test modules."""
import numpy as np

from kintraffic.core import ModelKind, ModelParameters, VariableSet, from_primitive, pressure
from kintraffic.macro_solver import hamiltonian


def random_points(model, n, rng, params=None):
    """Random interior points away from the gradient-law kinks."""
    params = params or ModelParameters()
    model = ModelKind(model)
    rho = rng.uniform(0.05, 0.9, n)
    u = rng.uniform(0.0, 1.0, n)
    rx = rng.uniform(-2, 2, n)
    ux = rng.uniform(-2, 2, n)
    ux = np.where(np.abs(ux) < 1e-2, 0.5, ux)
    if model is ModelKind.MERGED:
        ux = np.where(np.abs(np.abs(ux) - params.C_limit) < 1e-2, 0.5, ux)
    if model.variable_set is VariableSet.CONSERVATIVE_Y:
        m = rho * (u + pressure(rho, params))
        dp = params.v_ref * params.H / (1 - params.H * rho)
        mx = rx * (u + pressure(rho, params)) + rho * (ux + dp * rx)
    else:
        m = rho * u
        mx = rx * u + rho * ux
    return np.stack([rho, m]), np.stack([rx, mx])


def jacobian_fd_error(model, phi, phi_x, params=None, profile=None, h=1e-6):
    """Largest relative mismatch between analytic and central-difference Jacobians."""
    ev = hamiltonian(model, phi, phi_x, params, profile)
    worst = 0.0
    for analytic, which in ((ev.dH_dphi, 0), (ev.dH_dphix, 1)):
        for j in range(2):
            step = np.zeros_like(phi)
            step[j] = h
            if which == 0:
                plus = hamiltonian(model, phi + step, phi_x, params, profile).value
                minus = hamiltonian(model, phi - step, phi_x, params, profile).value
            else:
                plus = hamiltonian(model, phi, phi_x + step, params, profile).value
                minus = hamiltonian(model, phi, phi_x - step, params, profile).value
            fd = (plus - minus) / (2 * h)
            exact = analytic[:, :, j].T
            scale = np.maximum(1.0, np.abs(exact))
            worst = max(worst, float(np.max(np.abs(fd - exact) / scale)))
    return worst


ACCEPTANCE: dict[int, str] = {}


def record(number, title, ok, detail=""):
    """Store one acceptance line for the terminal summary and echo it."""
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
    if detail:
        line += f"  ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    return ok
