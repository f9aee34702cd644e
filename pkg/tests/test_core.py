import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kintraffic.core import (
    DomainError,
    MacroState,
    ModelKind,
    ModelParameters,
    ParameterError,
    RiemannInitial,
    SimulationConfig,
    VariableSet,
    from_primitive,
    pressure,
    pressure_inverse,
    to_primitive,
)


def test_pressure_values():
    assert pressure(0.0) == 0.0
    assert pressure(0.5) == pytest.approx(math.log(2.0), abs=1e-6)
    assert pressure(0.8161) == pytest.approx(-math.log(1 - 0.8161), rel=1e-12)
    assert pressure(0.8161) == pytest.approx(1.69315, abs=5e-4)


@pytest.mark.parametrize("rho", [-0.1, 1.0, 1.5])
def test_pressure_domain(rho):
    with pytest.raises(DomainError):
        pressure(rho)


def test_pressure_inverse_values():
    assert pressure_inverse(0.0) == 0.0
    assert pressure_inverse(0.693147) == pytest.approx(0.5, abs=1e-6)
    assert pressure_inverse(1e6) < 1
    with pytest.raises(DomainError):
        pressure_inverse(-1e-3)


def test_pressure_round_trip_grid():
    rho = np.round(np.arange(0, 1.0, 0.1), 12)
    assert np.max(np.abs(pressure_inverse(pressure(rho)) - rho)) < 1e-12


@given(st.floats(0.0, 0.999))
def test_pressure_monotone(rho):
    assert pressure(rho) >= 0
    assert pressure(min(rho + 1e-4, 0.9995)) > pressure(rho)


def test_physical_units_pressure():
    params = ModelParameters(H=0.5, H_A=0.5, H_B=0.5, v_ref=2.0)
    assert pressure(1.0, params) == pytest.approx(-2.0 * math.log(0.5))
    assert pressure_inverse(pressure(1.2, params), params) == pytest.approx(1.2)


def _state(rho, m, vs=VariableSet.MOMENTUM):
    return MacroState(0.0, 0.1, np.full(5, rho), np.full(5, m), vs)


def test_to_primitive_examples():
    _, u = to_primitive(_state(0.5, 0.25))
    assert u == pytest.approx(0.5)
    # y = rho (u - ln(1 - rho)) with rho = 0.5, u = 1
    _, u = to_primitive(_state(0.5, 0.846574, VariableSet.CONSERVATIVE_Y))
    assert u == pytest.approx(0.846574 / 0.5 + math.log(0.5), abs=1e-9)
    assert u == pytest.approx(1.0, abs=1e-5)
    _, u = to_primitive(_state(0.0, 0.3))
    assert np.all(u == 0.0)


@pytest.mark.parametrize("vs", list(VariableSet))
@given(rho=st.floats(1e-10, 0.999), u=st.floats(0.0, 1.0))
def test_primitive_round_trip(vs, rho, u):
    rho_arr = np.full(5, rho)
    state = from_primitive(rho_arr, np.full(5, u), variable_set=vs)
    r, back = to_primitive(state)
    assert np.all(r == rho_arr)
    assert np.max(np.abs(back - u)) < 1e-12 * max(1.0, abs(state.m[0]) / rho)


@pytest.mark.parametrize("field, value", [
    ("H", 0.0), ("H_B", -1.0), ("H_A", 0.5), ("v_ref", 0.0), ("w", -1.0),
    ("q_A", -1.0), ("q_B", -0.1), ("alpha", 1.0), ("beta", 1.0), ("eta", 3),
    ("c_eta", 0.0), ("C_limit", 0.0),
])
def test_parameter_validation_names_field(field, value):
    with pytest.raises(ParameterError) as info:
        ModelParameters(**{field: value})
    assert info.value.name == field


def test_parameter_errors_are_distinct():
    messages = set()
    for field, value in [("H", 0.0), ("H_A", 0.5), ("alpha", 0.5), ("beta", 2.0)]:
        with pytest.raises(ParameterError) as info:
            ModelParameters(**{field: value})
        messages.add(str(info.value))
    assert len(messages) == 4


def test_macrostate_invariants():
    with pytest.raises(ValueError):
        MacroState(0.0, 0.1, np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        MacroState(0.0, 0.1, np.zeros(6), np.zeros(5))
    with pytest.raises(ValueError):
        MacroState(0.0, 0.1, np.full(6, np.nan), np.zeros(6))
    s = _state(0.5, 0.25)
    with pytest.raises(ValueError):
        s.rho[0] = 1.0
    assert s.x == pytest.approx([0.05, 0.15, 0.25, 0.35, 0.45])


def test_model_kind_variable_sets():
    assert ModelKind.CONSERVATIVE_AW_RASCLE.variable_set is VariableSet.CONSERVATIVE_Y
    for kind in (ModelKind.AW_RASCLE, ModelKind.HAMILTON_JACOBI, ModelKind.MERGED):
        assert kind.variable_set is VariableSet.MOMENTUM


def test_simulation_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(cfl_number=0.6)
    with pytest.raises(ValueError):
        SimulationConfig(n_cells=5)
    with pytest.raises(ValueError):
        SimulationConfig(initial_condition=RiemannInitial(0.5, 1, 0.5, 0, 1.5))
    cfg = SimulationConfig(model="ar-cons", n_cells=10)
    state = cfg.initial_state()
    assert state.variable_set is VariableSet.CONSERVATIVE_Y
    rho, u = to_primitive(state)
    assert np.allclose(rho, 0.5)
    assert np.allclose(u, [1] * 5 + [0] * 5)
