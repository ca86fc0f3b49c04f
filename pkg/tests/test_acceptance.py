"""Acceptance gate: one check per numbered criterion, at the pinned tolerances.

Run under pytest (a PASS/FAIL line per criterion is printed in the terminal
summary) or directly with ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import (  # noqa: E402
    make_instance,
    make_scenario,
    oracle_backward_classical,
    oracle_forward_classical,
    oracle_quasi,
    proj,
)
from ftlab.ensemble import EnsembleConfig, ensemble_csv, run_ensemble  # noqa: E402
from ftlab.infomeasures import (  # noqa: E402
    classical_correlation,
    coherence,
    run_scenario,
    total_mutual_information,
)
from ftlab.qcore import kron  # noqa: E402
from ftlab.qstates import DensityState, dephase, named_state  # noqa: E402
from ftlab.qcore import Layout  # noqa: E402
from ftlab.theorems import detailed_ft_classical, detailed_ft_coherence, detailed_ft_quantum  # noqa: E402
from ftlab.trajectories import (  # noqa: E402
    backward_classical,
    backward_quasi,
    forward_classical,
    forward_quasi,
    marginal_local,
)

SEED = 42
SAMPLES = 1000
RESULTS: dict[int, tuple[bool, str]] = {}
_CACHE: dict[str, object] = {}


def _ensemble(scenario: str):
    if scenario not in _CACHE:
        cfg = EnsembleConfig(sites=3, samples=SAMPLES, scenario=scenario, seed=SEED)
        t0 = time.perf_counter()
        recs = run_ensemble(cfg)
        _CACHE[scenario] = (recs, time.perf_counter() - t0)
    return _CACHE[scenario]


def _reports(scenario):
    recs, _ = _ensemble(scenario)
    return [r.report for r in recs if not r.failed], recs


def record(n: int, ok: bool, detail: str) -> bool:
    RESULTS[n] = (bool(ok), detail)
    return ok


def criterion_1():
    reports, recs = _reports("random")
    _, secs = _ensemble("random")
    dev = max(abs(r.ift_cl - 1) for r in reports)
    ok = len(reports) == SAMPLES and dev <= 1e-8
    return record(1, ok, f"max|<e^-dicl>-1| = {dev:.2e} over {len(reports)}/{SAMPLES} "
                         f"N=3 instances (ensemble incl. quasi: {secs:.0f}s)")


def criterion_2():
    reports, _ = _reports("random")
    dev = max(abs(r.ift_q - 1) for r in reports)
    im = max(abs(r.ift_q.imag) for r in reports)
    ok = len(reports) == SAMPLES and dev <= 1e-8 and im <= 1e-10
    return record(2, ok, f"max|<e^-di>-1| = {dev:.2e}, max|Im| = {im:.2e}")


def criterion_3():
    reports, _ = _reports("swap")
    ok = len(reports) == SAMPLES and all(r.ift_c is not None for r in reports)
    dev = max(abs(r.ift_c - 1) for r in reports) if ok else float("inf")
    return record(3, ok and dev <= 1e-8, f"max|<e^-dc>-1| = {dev:.2e} over {len(reports)} SWAP instances")


def criterion_4():
    rnd, _ = _reports("random")
    swp, _ = _reports("swap")
    e_cl = max(abs(r.exp_cl.real - r.info["dI_cl"]) for r in rnd + swp)
    e_q = max(abs(r.exp_q.real - r.info["dI"]) for r in rnd + swp)
    e_c = max(abs(r.exp_c.real - r.info["dC"]) for r in swp)
    ok = max(e_cl, e_q, e_c) <= 1e-8
    return record(4, ok, f"max expectation gaps: cl {e_cl:.2e}, q {e_q:.2e}, c (SWAP) {e_c:.2e}")


def criterion_5():
    worst = {"cl": 0.0, "q": 0.0, "c": 0.0}
    for i in range(100):
        sc = make_scenario(10_000 + i)
        worst["cl"] = max(worst["cl"], detailed_ft_classical(sc))
        worst["q"] = max(worst["q"], detailed_ft_quantum(sc))
        sw = make_scenario(20_000 + i, gates="swap")
        worst["c"] = max(worst["c"], detailed_ft_coherence(sw))
    ok = max(worst.values()) <= 1e-10
    return record(5, ok, "max residuals on 100 N=2 instances: "
                         + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))


def criterion_6():
    rnd, _ = _reports("random")
    swp, _ = _reports("swap")
    both = rnd + swp
    lo_i = min(r.info["dI"] for r in both)
    lo_cl = min(r.info["dI_cl"] for r in both)
    lo_c = min(r.info["dC"] for r in swp)
    ok = lo_i >= -1e-10 and lo_cl >= -1e-10 and lo_c >= -1e-10
    return record(6, ok, f"min dI {lo_i:.2e}, min dI_cl {lo_cl:.2e}, min dC (SWAP) {lo_c:.2e}")


def criterion_7():
    worst = 0.0
    for i in range(6):
        for gates in ("random", "swap"):
            sc = make_scenario(30_000 + i, gates=gates)
            for pipeline in ("classical", "quantum"):
                worst = max(worst, np.max(np.abs(forward_classical(sc, pipeline).values
                                                 - oracle_forward_classical(sc, pipeline))))
                worst = max(worst, np.max(np.abs(backward_classical(sc, pipeline).values
                                                 - oracle_backward_classical(sc, pipeline))))
            worst = max(worst, np.max(np.abs(forward_quasi(sc).values - oracle_quasi(sc, "forward"))))
            worst = max(worst, np.max(np.abs(backward_quasi(sc).values - oracle_quasi(sc, "backward"))))
    marg = 0.0
    for i in range(6):
        sc = make_scenario(31_000 + i)
        pf = forward_classical(sc)
        for j in range(sc.N):
            start = kron(sc.rho_S_dephased.reduce(sc.layout_S.labels[j]).matrix, sc.rho_E_list[j].matrix)
            u = sc.gates[j].matrix
            vs, vn = sc.sys_initial[j].vectors, sc.env_initial[j].vectors
            vsp, vnp = sc.classical.sys_final[j].vectors, sc.classical.env_final[j].vectors
            oracle = np.zeros((2, 2, 2, 2))
            for s, n, sp, npr in np.ndindex(2, 2, 2, 2):
                pin = proj(np.kron(vs[:, s], vn[:, n]))
                pout = proj(np.kron(vsp[:, sp], vnp[:, npr]))
                oracle[s, n, sp, npr] = np.trace(u.conj().T @ pout @ u @ pin @ start @ pin).real
            marg = max(marg, np.max(np.abs(marginal_local(pf, j).values - oracle)))
    red = 0.0
    for i in range(6):
        rho_S, rho_E, gates = make_instance(32_000 + i)
        sc = run_scenario(dephase(rho_S), rho_E, gates, joint_basis="product")
        q = forward_quasi(sc).values
        p = forward_classical(sc).values
        ds = q.shape[0]
        k, kp = np.arange(ds)[:, None], np.arange(ds)[None, :]
        collapsed = np.zeros_like(q)
        collapsed[k, k, :, kp, kp, :] = p.transpose(0, 2, 1, 3)
        red = max(red, np.max(np.abs(q - collapsed)))
    ok = max(worst, marg, red) <= 1e-12
    return record(7, ok, f"fast path vs trace {worst:.2e}, marginals {marg:.2e}, Q^F vs P^F (dephased) {red:.2e}")


def criterion_8():
    ln2 = np.log(2)
    prod = named_state("product", [np.diag([0.9, 0.1]), np.diag([0.6, 0.4])])
    mix = DensityState(np.diag([0.5, 0, 0, 0.5]), Layout.from_dims("S", [2, 2]))
    bell, ghz = named_state("bell"), named_state("ghz", 3)
    checks = [
        (total_mutual_information(prod), 0.0), (classical_correlation(prod), 0.0), (coherence(prod), 0.0),
        (classical_correlation(mix), ln2), (coherence(mix), 0.0),
        (total_mutual_information(bell), 2 * ln2), (classical_correlation(bell), ln2), (coherence(bell), ln2),
        (total_mutual_information(ghz), 3 * ln2), (classical_correlation(ghz), 2 * ln2), (coherence(ghz), ln2),
    ]
    dev = max(abs(a - b) for a, b in checks)
    return record(8, dev <= 1e-10, f"max fixture deviation {dev:.2e} over {len(checks)} values")


def criterion_9():
    reports, _ = _reports("random")
    n_checked, worst, fails = 0, 0.0, 0
    for r in reports:
        for q in ("cl", "q"):
            m1, m2, bound = getattr(r, f"exp_{q}").real, getattr(r, f"m2_{q}"), getattr(r, f"bound_{q}")
            if abs(m1) <= 0.1:
                n_checked += 1
                gap = abs(m2 - 2 * m1)
                worst = max(worst, gap / bound if bound > 0 else (0.0 if gap == 0 else np.inf))
                fails += gap > bound
    ok = n_checked > 0 and fails == 0
    return record(9, ok, f"{n_checked} (instance, quantity) pairs with |m1|<=0.1, "
                         f"{fails} over bound, max gap/bound {worst:.3f}")


def criterion_10():
    cfg = EnsembleConfig(sites=3, samples=50, scenario="random", seed=SEED)
    a = ensemble_csv(run_ensemble(cfg, workers=1), cfg)
    b = ensemble_csv(run_ensemble(cfg, workers=2), cfg)
    c = ensemble_csv(run_ensemble(cfg, workers=1), cfg)
    ok = a == b == c
    return record(10, ok, f"3 runs (serial, 2 workers, serial) of {cfg.samples} samples: "
                          f"{'byte-identical' if ok else 'DIFFER'} ({len(a.encode())} bytes)")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def format_line(n: int) -> str:
    ok, detail = RESULTS[n]
    return f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.parametrize("n", range(1, 11))
def test_criterion(n):
    assert CRITERIA[n - 1](), format_line(n)


if __name__ == "__main__":
    for fn in CRITERIA:
        fn()
        print(format_line(int(fn.__name__.split("_")[1])), flush=True)
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
