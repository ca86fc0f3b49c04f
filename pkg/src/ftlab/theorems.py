"""Integral and detailed fluctuation relations, moments, and per-instance reports."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import PreconditionError, SupportViolation
from .infomeasures import DEPHASING_TOL, Scenario, dephasing_deviation, info_summary
from .qcore import kron, partial_trace, Layout
from .summation import compensated_rows
from .trajectories import (
    ZERO_WEIGHT,
    QuasiDistribution,
    TrajectoryDistribution,
    XiIndex,
    ZetaIndex,
    backward_classical,
    backward_quasi,
    delta_c_table,
    delta_iota_cl_table,
    delta_iota_table,
    forward_classical,
    forward_quasi,
    local_product,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tolerances:
    integral: float = 1e-8
    integral_imag: float = 1e-10
    classical_imag: float = 1e-12
    expectation: float = 1e-8
    expectation_imag: float = 1e-10
    detailed: float = 1e-10
    nonnegative: float = 1e-10
    dephasing: float = DEPHASING_TOL
    moment_floor: float = 1e-12


@dataclass(frozen=True)
class Aggregate:
    """Weighted sums of one observable x over one (quasi)distribution w."""

    total: complex
    ift: complex
    m1: complex
    m2: complex
    abs3: float
    max_abs: float

    def taylor_bound(self) -> float:
        """Upper bound on |<x^2> - 2<x>| implied by <e^{-x}> = 1 and the
        cubic Taylor remainder of e^{-x}."""
        return float(np.exp(self.max_abs) / 3.0 * self.abs3)


def _index_of(dist, ks: slice, local, shape) -> XiIndex | ZetaIndex:
    # reduced axes report index 0
    local = tuple(i if shape[a] > 1 else 0 for a, i in enumerate(local))
    if isinstance(dist, QuasiDistribution):
        k = local[0] + (ks.start or 0)
        xi = XiIndex.from_flat(local[1:3] + local[4:6], dist.sys_dims, dist.env_dims)
        return ZetaIndex(int(k), xi, int(local[3]))
    return XiIndex.from_flat(local, dist.sys_dims, dist.env_dims)


def _slice_obs(obs: np.ndarray, ks: slice) -> np.ndarray:
    return obs if obs.shape[0] == 1 else obs[ks]


def _reduce_weights(w: np.ndarray, obs_shape: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Compensated sum of ``w`` over the axes the observable does not depend on.

    Returns the reduced weights and, per reduced entry, the largest |w| that
    went into it (used for the support test).
    """
    axes = tuple(i for i, (a, b) in enumerate(zip(w.shape, obs_shape)) if b == 1 and a > 1)
    if not axes:
        return w, np.abs(w)
    keep = tuple(i for i in range(w.ndim) if i not in axes)
    out_shape = tuple(w.shape[i] if i in keep else 1 for i in range(w.ndim))
    inner = int(np.prod([w.shape[i] for i in axes]))
    moved = np.transpose(w, keep + axes).reshape(-1, inner)
    if np.iscomplexobj(moved):
        sums = compensated_rows(np.concatenate([moved.real, moved.imag]))
        half = moved.shape[0]
        reduced = sums[:half] + 1j * sums[half:]
    else:
        reduced = compensated_rows(moved)
    peak = np.abs(moved).max(axis=1)
    return reduced.reshape(out_shape), peak.reshape(out_shape)


def aggregate(dist: TrajectoryDistribution | QuasiDistribution, obs: np.ndarray) -> Aggregate:
    """One exhaustive pass over ``dist``, block by block, accumulating every moment.

    Weights are first summed (compensated) over the index axes the observable
    does not depend on. Entries whose observable is undefined are dropped when
    every contributing weight is below 1e-14 (0 * anything = 0); otherwise
    SupportViolation is raised.
    """
    obs = np.asarray(obs, dtype=np.float64)
    parts = []
    max_abs = 0.0
    for ks, w_full in dist.blocks():
        x_block = _slice_obs(obs, ks)
        w, peak = _reduce_weights(w_full, x_block.shape)
        x = np.broadcast_to(x_block, w.shape)
        heavy = peak >= ZERO_WEIGHT
        with np.errstate(over="ignore", invalid="ignore"):
            ex = np.exp(-x)
            bad = ~np.isfinite(x) | ~np.isfinite(ex)
        if np.any(bad & heavy):
            local = tuple(int(i) for i in np.argwhere(bad & heavy)[0])
            raise SupportViolation("observable undefined on the support", index=_index_of(dist, ks, local, w_full.shape))
        good = ~bad
        xg = np.where(good, x, 0.0).ravel()
        eg = np.where(good, ex, 0.0).ravel()
        wr = np.real(w).ravel()
        wi = np.imag(w).ravel()
        wabs = np.where(good, np.abs(w), 0.0).ravel()
        rows = np.stack([
            wr, wi,
            wr * eg, wi * eg,
            wr * xg, wi * xg,
            wr * xg * xg, wi * xg * xg,
            wabs * np.abs(xg) ** 3,
        ])
        parts.append(compensated_rows(rows))
        if np.any(good):
            max_abs = max(max_abs, float(np.max(np.abs(xg))))
    s = compensated_rows(np.array(parts).T)
    return Aggregate(
        total=complex(s[0], s[1]),
        ift=complex(s[2], s[3]),
        m1=complex(s[4], s[5]),
        m2=complex(s[6], s[7]),
        abs3=float(s[8]),
        max_abs=max_abs,
    )


def integral_ft(dist, obs: np.ndarray) -> complex:
    """<e^{-x}> under ``dist``."""
    return aggregate(dist, obs).ift


def expectation_check(dist, obs: np.ndarray, target: float,
                      tol: float = 1e-8, imag_tol: float = 1e-10) -> tuple[complex, bool]:
    m1 = aggregate(dist, obs).m1
    return m1, bool(abs(m1.real - target) <= tol and abs(m1.imag) <= imag_tol)


def moment_report(dist, obs: np.ndarray) -> tuple[float, float]:
    """Real parts of the first and second moments."""
    agg = aggregate(dist, obs)
    if agg.m1.imag or agg.m2.imag:
        log.debug("imaginary moment parts: m1 %.3e, m2 %.3e", agg.m1.imag, agg.m2.imag)
    return agg.m1.real, agg.m2.real


def _normalized_residual(lhs: np.ndarray, rhs: np.ndarray, keep: np.ndarray) -> float:
    diff = np.abs(lhs - rhs)[keep]
    if diff.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(lhs)[keep])), float(np.max(np.abs(rhs)[keep])))
    return float(np.max(diff)) / scale if scale > 0 else 0.0


def _exp_weighted(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """w * e^{-x}, zero where w is negligible and x undefined."""
    with np.errstate(over="ignore", invalid="ignore"):
        out = w * np.exp(-x)
    bad = ~np.isfinite(out)
    if np.any(bad & (np.abs(w) >= ZERO_WEIGHT)):
        raise SupportViolation("observable undefined on the support")
    return np.where(bad, 0, out)


def detailed_ft_classical(sc: Scenario, pipeline: str = "classical") -> float:
    """Max normalized residual of P^F e^{-x} prod_j P_j^B - P^B prod_j P_j^F
    over the indices where x is defined."""
    pf = forward_classical(sc, pipeline)
    pb = backward_classical(sc, pipeline)
    x = np.broadcast_to(delta_iota_cl_table(sc, pipeline), pf.shape)
    lhs = _exp_weighted(pf.values, x) * local_product(pb)
    rhs = pb.values * local_product(pf)
    keep = ((np.abs(pf.values) >= ZERO_WEIGHT) | (np.abs(pb.values) >= ZERO_WEIGHT)) & np.isfinite(x)
    return _normalized_residual(lhs, rhs, keep)


def _quasi_detailed(sc: Scenario, obs: np.ndarray, fwd_factor: np.ndarray, bwd_factor: np.ndarray,
                    qf: QuasiDistribution | None, qb: QuasiDistribution | None) -> float:
    """Blockwise max normalized residual of Q^F e^{-x} bwd - Q^B fwd.

    Indices where x is undefined (a zero initial or final probability) are
    outside the relation's domain and are skipped; there Q^F vanishes while
    Q^B need not.
    """
    qf = qf or forward_quasi(sc)
    qb = qb or backward_quasi(sc)
    fwd = fwd_factor[None, :, :, None, :, :]
    bwd = bwd_factor[None, :, :, None, :, :]
    max_diff = 0.0
    scale = 0.0
    for (ks, wf), (_, wb) in zip(qf.blocks(), qb.blocks()):
        x = _slice_obs(obs, ks)
        lhs = _exp_weighted(wf, x) * bwd
        rhs = wb * fwd
        keep = ((np.abs(wf) >= ZERO_WEIGHT) | (np.abs(wb) >= ZERO_WEIGHT)) & np.isfinite(x)
        if np.any(keep):
            max_diff = max(max_diff, float(np.max(np.abs(lhs - rhs)[keep])))
            scale = max(scale, float(np.max(np.abs(lhs)[keep])), float(np.max(np.abs(rhs)[keep])))
    return max_diff / scale if scale > 0 else 0.0


def detailed_ft_quantum(sc: Scenario, qf: QuasiDistribution | None = None,
                        qb: QuasiDistribution | None = None) -> float:
    """Max normalized residual of Q^F e^{-Delta iota} prod_j P_j^B - Q^B prod_j P_j^F,
    with P_j built on the quantum pipeline's final bases."""
    pf = forward_classical(sc, "quantum")
    pb = backward_classical(sc, "quantum")
    return _quasi_detailed(sc, delta_iota_table(sc), local_product(pf), local_product(pb), qf, qb)


def _worst_coherence_site(sc: Scenario) -> tuple[int, float]:
    """Site whose local channel lets the most initial coherence through."""
    worst = (0, 0.0)
    for j, gate in enumerate(sc.gates):
        d, e = sc.sys_dims[j], sc.env_dims[j]
        v = sc.sys_initial[j].vectors
        layout = Layout((("S", d), ("E", e)))
        leak = 0.0
        for a in range(d):
            for b in range(d):
                if a == b:
                    continue
                x = np.outer(v[:, a], v[:, b].conj())
                out = gate.matrix @ kron(x, sc.rho_E_list[j].matrix) @ gate.matrix.conj().T
                red, _ = partial_trace(out, layout, ["S"])
                leak = max(leak, float(np.max(np.abs(red))))
        if leak > worst[1]:
            worst = (j, leak)
    return worst


def require_dephasing(sc: Scenario, tol: float = DEPHASING_TOL) -> float:
    dev = dephasing_deviation(sc)
    if dev > tol:
        j, leak = _worst_coherence_site(sc)
        raise PreconditionError(
            f"dynamics is not completely dephasing: final system state deviates by {dev:.3e} "
            f"(tol {tol:g}); site {sc.layout_S.labels[j]} passes coherence {leak:.3e}"
        )
    return dev


def detailed_ft_coherence(sc: Scenario, tol: float = DEPHASING_TOL, qf: QuasiDistribution | None = None,
                          qb: QuasiDistribution | None = None) -> float:
    """Max normalized residual of Q^F e^{-Delta c} P^B - Q^B P^F (quantum-pipeline P)."""
    require_dephasing(sc, tol)
    pf = forward_classical(sc, "quantum")
    pb = backward_classical(sc, "quantum")
    return _quasi_detailed(sc, delta_c_table(sc), pf.values, pb.values, qf, qb)


def _cpair(z: complex | None):
    return None if z is None else [float(z.real), float(z.imag)]


@dataclass
class FTReport:
    instance_id: str
    info: dict
    ift_cl: complex
    exp_cl: complex
    m2_cl: float
    bound_cl: float
    detailed_residual_cl: float
    ift_q: complex | None = None
    exp_q: complex | None = None
    m2_q: float | None = None
    bound_q: float | None = None
    detailed_residual_q: float | None = None
    ift_c: complex | None = None
    exp_c: complex | None = None
    m2_c: float | None = None
    bound_c: float | None = None
    detailed_residual_c: float | None = None
    dephasing_deviation: float = float("nan")
    support_diagnostics: list = field(default_factory=list)
    tolerances: Tolerances = field(default_factory=Tolerances)
    passes: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(v for v in self.passes.values())

    def to_dict(self) -> dict:
        out = {}
        for key, value in self.__dict__.items():
            if isinstance(value, complex):
                value = _cpair(value)
            elif isinstance(value, Tolerances):
                value = asdict(value)
            out[key] = value
        out["all_pass"] = self.all_pass
        return out


def evaluate_passes(r: FTReport) -> dict:
    """Recompute every pass flag from the stored numbers and tolerances."""
    t = r.tolerances
    info = r.info
    p = {
        "ift_cl": abs(r.ift_cl - 1) <= t.integral and abs(r.ift_cl.imag) <= t.classical_imag,
        "exp_cl": abs(r.exp_cl.real - info["dI_cl"]) <= t.expectation and abs(r.exp_cl.imag) <= t.expectation_imag,
        "moment_cl": abs(r.m2_cl - 2 * r.exp_cl.real) <= r.bound_cl + t.moment_floor,
        "detailed_cl": r.detailed_residual_cl <= t.detailed,
        "nonneg_dI_cl": info["dI_cl"] >= -t.nonnegative,
        "nonneg_dI": info["dI"] >= -t.nonnegative,
    }
    if r.ift_q is not None:
        p["ift_q"] = abs(r.ift_q - 1) <= t.integral and abs(r.ift_q.imag) <= t.integral_imag
        p["exp_q"] = abs(r.exp_q.real - info["dI"]) <= t.expectation and abs(r.exp_q.imag) <= t.expectation_imag
        p["moment_q"] = abs(r.m2_q - 2 * r.exp_q.real) <= r.bound_q + t.moment_floor
        p["detailed_q"] = r.detailed_residual_q <= t.detailed
    if r.ift_c is not None:
        p["ift_c"] = abs(r.ift_c - 1) <= t.integral and abs(r.ift_c.imag) <= t.integral_imag
        p["exp_c"] = abs(r.exp_c.real - info["dC"]) <= t.expectation and abs(r.exp_c.imag) <= t.expectation_imag
        p["moment_c"] = abs(r.m2_c - 2 * r.exp_c.real) <= r.bound_c + t.moment_floor
        p["detailed_c"] = r.detailed_residual_c <= t.detailed
        p["nonneg_dC"] = info["dC"] >= -t.nonnegative
    return {k: bool(v) for k, v in p.items()}


def _support_diagnostics(sc: Scenario) -> list:
    """Zero-probability initial outcomes. The integral and detailed relations
    need full support, so with any of these the relations are expected to fail
    by the excluded mass."""
    out = []
    for name, p in (("p_s", sc.p_s), ("p_k", sc.p_k)):
        zero = int(np.count_nonzero(p <= ZERO_WEIGHT))
        if zero:
            out.append({"support": f"{zero} initial outcome(s) with {name} = 0; relations need full support"})
    return out


def verify_scenario(sc: Scenario, instance_id: str = "", compute_quasi: bool = True,
                    tolerances: Tolerances | None = None) -> FTReport:
    """Evaluate every relation that applies to ``sc``.

    The coherence relations are evaluated only when the dynamics is
    completely dephasing; otherwise their fields stay ``None``.
    """
    tol = tolerances or Tolerances()
    info = info_summary(sc).to_dict()
    diagnostics = _support_diagnostics(sc)

    pf = forward_classical(sc)
    a_cl = aggregate(pf, delta_iota_cl_table(sc))
    report = FTReport(
        instance_id=instance_id,
        info=info,
        ift_cl=a_cl.ift,
        exp_cl=a_cl.m1,
        m2_cl=a_cl.m2.real,
        bound_cl=a_cl.taylor_bound(),
        detailed_residual_cl=detailed_ft_classical(sc),
        tolerances=tol,
    )
    dev = dephasing_deviation(sc)
    report.dephasing_deviation = dev
    if compute_quasi:
        qf = forward_quasi(sc)
        qb = backward_quasi(sc)
        a_q = aggregate(qf, delta_iota_table(sc))
        report.ift_q, report.exp_q = a_q.ift, a_q.m1
        report.m2_q, report.bound_q = a_q.m2.real, a_q.taylor_bound()
        report.detailed_residual_q = detailed_ft_quantum(sc, qf, qb)
        if a_q.m2.imag:
            diagnostics.append({"quantity": "q", "m2_imag": a_q.m2.imag})
        if dev <= tol.dephasing:
            a_c = aggregate(qf, delta_c_table(sc))
            report.ift_c, report.exp_c = a_c.ift, a_c.m1
            report.m2_c, report.bound_c = a_c.m2.real, a_c.taylor_bound()
            report.detailed_residual_c = detailed_ft_coherence(sc, tol.dephasing, qf, qb)
        else:
            diagnostics.append({"quantity": "c", "skipped": "not completely dephasing", "deviation": dev})
    report.support_diagnostics = diagnostics
    report.passes = evaluate_passes(report)
    return report
