import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ftlab.errors import ArgumentError
from ftlab.infomeasures import (
    classical_correlation,
    coherence,
    info_summary,
    is_completely_dephasing,
    relative_entropy_of_coherence,
    run_scenario,
    total_mutual_information,
    von_neumann_entropy,
)
from ftlab.qcore import Layout, kron_all
from ftlab.qstates import DensityState, RngSpec, named_state, random_density, swap_gate

from conftest import make_instance, make_scenario

LN2 = np.log(2)


def test_entropy_values():
    assert abs(von_neumann_entropy(np.eye(2) / 2) - LN2) <= 1e-12
    assert abs(von_neumann_entropy(named_state("bell"))) <= 1e-12
    expected = 2 * LN2 - 0.75 * np.log(3)
    assert abs(von_neumann_entropy(np.diag([0.75, 0.25])) - expected) <= 1e-12
    assert abs(expected - 0.562335) < 1e-6


def test_mutual_information_fixtures():
    prod = named_state("product", [np.diag([0.9, 0.1]), np.diag([0.6, 0.4])])
    assert abs(total_mutual_information(prod)) <= 1e-10
    assert abs(total_mutual_information(named_state("bell")) - 2 * LN2) <= 1e-10
    assert abs(total_mutual_information(named_state("ghz", 3)) - 3 * LN2) <= 1e-10


def test_classical_correlation_fixtures():
    prod = named_state("product", [np.diag([0.9, 0.1]), np.diag([0.6, 0.4])])
    assert abs(classical_correlation(prod)) <= 1e-10
    mix = DensityState(np.diag([0.5, 0, 0, 0.5]), Layout.from_dims("S", [2, 2]))
    assert abs(classical_correlation(mix) - LN2) <= 1e-10
    assert abs(classical_correlation(named_state("ghz", 3)) - 2 * LN2) <= 1e-10


def test_coherence_fixtures():
    mix = DensityState(np.diag([0.5, 0, 0, 0.5]), Layout.from_dims("S", [2, 2]))
    assert abs(coherence(mix)) <= 1e-10
    assert abs(coherence(named_state("bell")) - LN2) <= 1e-10
    assert abs(coherence(named_state("ghz", 3)) - LN2) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_coherence_equals_relative_entropy_of_coherence(seed):
    rho = random_density(8, rng=RngSpec(seed), layout=Layout.from_dims("S", [2, 2, 2]))
    assert abs(coherence(rho) - relative_entropy_of_coherence(rho)) <= 1e-10
    assert coherence(rho) >= -1e-10


def test_identity_gates_change_nothing():
    sc = make_scenario(11, gates="identity")
    assert np.allclose(sc.quantum.rho_S_final.matrix, sc.rho_S.matrix, atol=1e-14)
    assert np.allclose(sc.classical.rho_S_final.matrix, sc.rho_S_dephased.matrix, atol=1e-14)
    for a, b in zip(sc.sys_initial, sc.quantum.sys_final):
        assert np.allclose(a.vectors, b.vectors, atol=1e-12)
    info = info_summary(sc)
    for v in (info.dI, info.dI_cl, info.dC):
        assert abs(v) <= 1e-12


def test_swap_gates_exchange_system_and_environment():
    rho_S, rho_E, gates = make_instance(12, gates="swap")
    sc = run_scenario(rho_S, rho_E, gates)
    expected = kron_all(r.matrix for r in rho_E)
    assert np.allclose(sc.quantum.rho_S_final.matrix, expected, atol=1e-14)
    for j, m in enumerate(sc.quantum.rho_E_final_sites):
        assert np.allclose(m.matrix, rho_S.marginals()[j].matrix, atol=1e-14)
    info = info_summary(sc)
    assert abs(info.dC - coherence(rho_S)) <= 1e-10
    assert abs(info.dI - (info.dI_cl + info.dC)) <= 1e-10
    assert is_completely_dephasing(sc)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_data_processing(seed):
    sc = make_scenario(seed)
    info = info_summary(sc)
    assert info.dI >= -1e-10
    assert info.dI_cl >= -1e-10
    assert abs(info.C_initial - (info.I_initial - info.I_cl_initial)) <= 1e-12


def test_random_gates_are_not_dephasing():
    assert not is_completely_dephasing(make_scenario(13))


def test_run_scenario_argument_errors():
    rho_S, rho_E, gates = make_instance(14)
    with pytest.raises(ArgumentError):
        run_scenario(rho_S, rho_E[:1], gates)
    with pytest.raises(ArgumentError):
        run_scenario(rho_S, rho_E, gates[::-1])
    with pytest.raises(ArgumentError):
        run_scenario(rho_S, rho_E, [swap_gate(2, acts_on=("S1", "E1"))] * 2)
    with pytest.raises(ArgumentError):
        run_scenario(rho_S, rho_E, gates, joint_basis="weird")
