"""Shared fixtures and direct-trace oracles.

The oracles build full projectors and take traces of dense matrices, so they
share no code path with the amplitude-table fast paths they check.
"""
from __future__ import annotations

import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

from ftlab.infomeasures import run_scenario
from ftlab.qcore import Layout
from ftlab.qstates import RngSpec, UnitaryGate, random_density, random_unitary, swap_gate, identity_gate

FIXTURES = Path(__file__).parent / "fixtures"


def make_instance(seed, n_sites=2, d=2, e=2, gates="random", stream=0):
    g = RngSpec(seed, stream).generator()
    rho_S = random_density(d**n_sites, rng=g, layout=Layout.from_dims("S", [d] * n_sites))
    rho_E = [random_density(e, rng=g, layout=Layout(((f"E{j + 1}", e),))) for j in range(n_sites)]
    pairs = [(f"S{j + 1}", f"E{j + 1}") for j in range(n_sites)]
    if gates == "random":
        us = [UnitaryGate(random_unitary(d * e, g), p) for p in pairs]
    elif gates == "swap":
        us = [swap_gate(d, e, p) for p in pairs]
    else:
        us = [identity_gate(d, e, p) for p in pairs]
    return rho_S, rho_E, us


def make_scenario(seed, n_sites=2, gates="random", **kw):
    return run_scenario(*make_instance(seed, n_sites, gates=gates), **kw)


def proj(v):
    return np.outer(v, v.conj())


def kron_cols(bases):
    """Product basis vectors (columns) from a list of Spectral objects."""
    out = np.ones((1, 1))
    for b in bases:
        out = np.kron(out, b.vectors)
    return out


def kron_mats(mats):
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


def oracle_forward_classical(sc, pipeline="classical"):
    pl = sc.pipeline(pipeline)
    rho0 = np.kron(pl.rho_S.matrix, kron_mats(r.matrix for r in sc.rho_E_list))
    vs, vn = kron_cols(sc.sys_initial), kron_cols(sc.env_initial)
    vsp, vnp = kron_cols(pl.sys_final), kron_cols(pl.env_final)
    U = sc.U
    ds, de = vs.shape[0], vn.shape[0]
    out = np.zeros((ds, de, ds, de))
    for s, n, sp, npr in itertools.product(range(ds), range(de), range(ds), range(de)):
        pin = proj(np.kron(vs[:, s], vn[:, n]))
        pout = proj(np.kron(vsp[:, sp], vnp[:, npr]))
        out[s, n, sp, npr] = np.trace(U.conj().T @ pout @ U @ pin @ rho0 @ pin).real
    return out


def oracle_backward_classical(sc, pipeline="classical"):
    """Reversed two-point scheme: measure the dephased final state times the
    reference environment in the final bases, evolve by U^dag, measure in the
    initial bases."""
    pl = sc.pipeline(pipeline)
    vs, vn = kron_cols(sc.sys_initial), kron_cols(sc.env_initial)
    vsp, vnp = kron_cols(pl.sys_final), kron_cols(pl.env_final)
    start = np.kron(pl.rho_S_final.matrix, pl.rho_E_ref.matrix)
    U = sc.U
    ds, de = vs.shape[0], vn.shape[0]
    out = np.zeros((ds, de, ds, de))
    for s, n, sp, npr in itertools.product(range(ds), range(de), range(ds), range(de)):
        pin = proj(np.kron(vs[:, s], vn[:, n]))
        pout = proj(np.kron(vsp[:, sp], vnp[:, npr]))
        out[s, n, sp, npr] = np.trace(U @ pin @ U.conj().T @ pout @ start @ pout).real
    return out


def oracle_quasi(sc, kind="forward"):
    """Q^F = Tr(P_{k'n'} P_{s'n'} U P_{sn} (rho_S x rho_E) P_{kn} U^dag),
    Q^B = Tr(P_{s'n'} U P_{sn} P_{kn} U^dag P_{k'n'} (rho'_S x rho_ref))."""
    q = sc.quantum
    vs, vn = kron_cols(sc.sys_initial), kron_cols(sc.env_initial)
    vsp, vnp = kron_cols(q.sys_final), kron_cols(q.env_final)
    vk, vkp = sc.joint_initial.vectors, sc.joint_final.vectors
    rho0 = np.kron(sc.rho_S.matrix, kron_mats(r.matrix for r in sc.rho_E_list))
    rho_back = np.kron(q.rho_S_final.matrix, q.rho_E_ref.matrix)
    U, Ud = sc.U, sc.U.conj().T
    ds, de = vs.shape[0], vn.shape[0]
    out = np.zeros((ds, ds, de, ds, ds, de), dtype=complex)
    for k, s, n, kp, sp, npr in itertools.product(range(ds), range(ds), range(de), range(ds), range(ds), range(de)):
        p_sn = proj(np.kron(vs[:, s], vn[:, n]))
        p_kn = proj(np.kron(vk[:, k], vn[:, n]))
        p_spn = proj(np.kron(vsp[:, sp], vnp[:, npr]))
        p_kpn = proj(np.kron(vkp[:, kp], vnp[:, npr]))
        if kind == "forward":
            val = np.trace(p_kpn @ p_spn @ U @ p_sn @ rho0 @ p_kn @ Ud)
        else:
            val = np.trace(p_spn @ U @ p_sn @ p_kn @ Ud @ p_kpn @ rho_back)
        out[k, s, n, kp, sp, npr] = val
    return out


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(n))
