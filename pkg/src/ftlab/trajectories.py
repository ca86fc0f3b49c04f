"""Two-point-measurement distributions, quasiprobabilities and stochastic observables.

Array conventions
-----------------
Every joint index is a flat index over sites (leftmost site slowest):

* ``TrajectoryDistribution.values`` has axes ``(s, n, s', n')`` with shape
  ``(D_S, D_E, D_S, D_E)``.
* ``QuasiDistribution`` blocks have axes ``(k, s, n, k', s', n')`` with shape
  ``(D_S, D_S, D_E, D_S, D_S, D_E)``.

``s``/``n`` index the product of the initial local eigenbases of the system
and environment sites, ``s'``/``n'`` the product of the final ones (of the
chosen pipeline), ``k``/``k'`` the joint eigenbases of the initial and final
system states.

Observables are returned as tables broadcastable against those shapes, with
NaN wherever a logarithm of a (numerically) zero probability is needed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import ArgumentError, SupportViolation
from .infomeasures import Scenario
from .qcore import kron, kron_all

SUPPORT_FLOOR = 1e-300
ZERO_WEIGHT = 1e-14
DENSE_MAX_SITES = 3


@dataclass(frozen=True)
class XiIndex:
    """Per-site outcome indices (s, n, s', n')."""

    s: tuple[int, ...]
    n: tuple[int, ...]
    s_t: tuple[int, ...]
    n_t: tuple[int, ...]

    def flat(self, sys_dims, env_dims) -> tuple[int, int, int, int]:
        for part, dims in ((self.s, sys_dims), (self.n, env_dims), (self.s_t, sys_dims), (self.n_t, env_dims)):
            if len(part) != len(dims) or any(not 0 <= i < d for i, d in zip(part, dims)):
                raise ArgumentError(f"index {part} out of range for dimensions {dims}")
        return (
            int(np.ravel_multi_index(self.s, sys_dims)),
            int(np.ravel_multi_index(self.n, env_dims)),
            int(np.ravel_multi_index(self.s_t, sys_dims)),
            int(np.ravel_multi_index(self.n_t, env_dims)),
        )

    @classmethod
    def from_flat(cls, flat, sys_dims, env_dims) -> "XiIndex":
        s, n, st, nt = flat
        return cls(
            tuple(int(i) for i in np.unravel_index(s, sys_dims)),
            tuple(int(i) for i in np.unravel_index(n, env_dims)),
            tuple(int(i) for i in np.unravel_index(st, sys_dims)),
            tuple(int(i) for i in np.unravel_index(nt, env_dims)),
        )

    def local(self, j: int) -> "XiIndex":
        return XiIndex((self.s[j],), (self.n[j],), (self.s_t[j],), (self.n_t[j],))


@dataclass(frozen=True)
class ZetaIndex:
    k: int
    xi: XiIndex
    k_p: int

    def flat(self, sys_dims, env_dims) -> tuple[int, ...]:
        dim = int(np.prod(sys_dims))
        if not (0 <= self.k < dim and 0 <= self.k_p < dim):
            raise ArgumentError(f"joint indices ({self.k}, {self.k_p}) out of range for dimension {dim}")
        s, n, st, nt = self.xi.flat(sys_dims, env_dims)
        return (self.k, s, n, self.k_p, st, nt)


@dataclass(frozen=True)
class TrajectoryDistribution:
    values: np.ndarray
    sys_dims: tuple[int, ...]
    env_dims: tuple[int, ...]
    kind: str = "forward"
    pipeline: str = "classical"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def site_view(self) -> np.ndarray:
        """Values with one axis per site: (s_1..s_N, n_1..n_N, s'_1.., n'_1..)."""
        return self.values.reshape(self.sys_dims + self.env_dims + self.sys_dims + self.env_dims)

    def total(self) -> float:
        from .summation import compensated_sum

        return compensated_sum(self.values)

    def __getitem__(self, xi: XiIndex) -> float:
        return float(self.values[xi.flat(self.sys_dims, self.env_dims)])

    def blocks(self, block_size: int | None = None) -> Iterator[tuple[slice, np.ndarray]]:
        yield slice(None), self.values


# ---------------------------------------------------------------- tables


def _safe_log(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    out = np.full(p.shape, np.nan)
    ok = p > SUPPORT_FLOOR
    out[ok] = np.log(p[ok])
    return out


def _site_log_sum(probs: Sequence[np.ndarray]) -> np.ndarray:
    """Flat vector over the joint index of sum_j ln p_j[i_j]."""
    out = np.zeros(1)
    for p in probs:
        out = np.add.outer(out, _safe_log(p)).ravel()
    return out


def local_amplitudes(sc: Scenario, pipeline: str = "quantum") -> list[np.ndarray]:
    """Per site j, the table <s'_j n'_j| U_j |s_j n_j> with axes (s'_j, n'_j, s_j, n_j)."""
    pl = sc.pipeline(pipeline)
    tables = []
    for j, gate in enumerate(sc.gates):
        d, e = sc.sys_dims[j], sc.env_dims[j]
        w_in = kron(sc.sys_initial[j].vectors, sc.env_initial[j].vectors)
        w_out = kron(pl.sys_final[j].vectors, pl.env_final[j].vectors)
        a = w_out.conj().T @ gate.matrix @ w_in
        tables.append(a.reshape(d, e, d, e))
    return tables


def _product_table(tables: Sequence[np.ndarray], sys_dims, env_dims) -> np.ndarray:
    """Combine per-site (s'_j, n'_j, s_j, n_j) tables into a flat (s, n, s', n') table."""
    n_sites = len(tables)
    operands = []
    for j, t in enumerate(tables):
        operands += [t, [2 * n_sites + j, 3 * n_sites + j, j, n_sites + j]]
    out = np.einsum(*operands, list(range(4 * n_sites)))
    ds, de = int(np.prod(sys_dims)), int(np.prod(env_dims))
    return out.reshape(ds, de, ds, de)


def _local_product(tables: Sequence[np.ndarray], sys_dims, env_dims) -> np.ndarray:
    """Product over sites of per-site (s_j, n_j, s'_j, n'_j) tables, flat (s, n, s', n')."""
    return _product_table([t.transpose(2, 3, 0, 1) for t in tables], sys_dims, env_dims)


def transition_probabilities(sc: Scenario, pipeline: str = "classical") -> np.ndarray:
    """|<s' n'|U|s n>|^2 as a flat (s, n, s', n') table."""
    t = [np.abs(a) ** 2 for a in local_amplitudes(sc, pipeline)]
    return _product_table(t, sc.sys_dims, sc.env_dims)


# ---------------------------------------------------------------- classical


def forward_classical(sc: Scenario, pipeline: str = "classical") -> TrajectoryDistribution:
    """P^F[s, n, s', n'] = p_s p_n |<s' n'|U|s n>|^2."""
    t = transition_probabilities(sc, pipeline)
    values = sc.p_s[:, None, None, None] * sc.p_n[None, :, None, None] * t
    return TrajectoryDistribution(values, sc.sys_dims, sc.env_dims, "forward", pipeline)


def backward_classical(sc: Scenario, pipeline: str = "classical") -> TrajectoryDistribution:
    """P^B[s, n, s', n'] = p_{s'} p^ref_{n'} |<s' n'|U|s n>|^2.

    The reversed process starts by measuring the final system state in the
    product final basis, so its first-point statistics are the diagonal
    ``p_s_final`` of the final state in that basis.
    """
    pl = sc.pipeline(pipeline)
    t = transition_probabilities(sc, pipeline)
    values = pl.p_s_final[None, None, :, None] * pl.p_n_final[None, None, None, :] * t
    return TrajectoryDistribution(values, sc.sys_dims, sc.env_dims, "backward", pipeline)


def marginal_local(dist: TrajectoryDistribution, j: int) -> TrajectoryDistribution:
    """Sum out every site except ``j``; result indexed by (s_j, n_j, s'_j, n'_j)."""
    n_sites = len(dist.sys_dims)
    if not 0 <= j < n_sites:
        raise ArgumentError(f"site index {j} out of range for {n_sites} sites")
    keep = [j, n_sites + j, 2 * n_sites + j, 3 * n_sites + j]
    axes = tuple(a for a in range(4 * n_sites) if a not in keep)
    values = dist.site_view().sum(axis=axes)
    return TrajectoryDistribution(
        values, (dist.sys_dims[j],), (dist.env_dims[j],), dist.kind, dist.pipeline
    )


def local_product(dist: TrajectoryDistribution) -> np.ndarray:
    """prod_j P_j[xi_j] as a flat (s, n, s', n') table."""
    tables = [marginal_local(dist, j).values for j in range(len(dist.sys_dims))]
    return _local_product(tables, dist.sys_dims, dist.env_dims)


# ---------------------------------------------------------------- quasi


class QuasiDistribution:
    """Forward or backward quasiprobability over zeta = (k, s, n, k', s', n').

    Entries are produced in blocks along ``k`` from precomputed amplitude and
    overlap tables. Up to three sites the full array is materialized on first
    access to ``values``; beyond that, consumers should iterate ``blocks()``.
    """

    def __init__(self, sc: Scenario, kind: str = "forward"):
        if kind not in ("forward", "backward"):
            raise ArgumentError(f"kind must be 'forward' or 'backward', got {kind!r}")
        self.kind = kind
        self.sys_dims = sc.sys_dims
        self.env_dims = sc.env_dims
        self.dense = sc.N <= DENSE_MAX_SITES
        ds, de = int(np.prod(sc.sys_dims)), int(np.prod(sc.env_dims))
        self.shape = (ds, ds, de, ds, ds, de)

        q = sc.quantum
        v_s = kron_all(b.vectors for b in sc.sys_initial)
        v_sp = kron_all(b.vectors for b in q.sys_final)
        v_n = kron_all(b.vectors for b in sc.env_initial)
        v_np = kron_all(b.vectors for b in q.env_final)
        v_k = np.asarray(sc.joint_initial.vectors)
        v_kp = np.asarray(sc.joint_final.vectors)

        # <s|k> as (k, s) and <k'|s'> as (k', s')
        self._ov_in = (v_s.conj().T @ v_k).T
        self._ov_out = v_kp.conj().T @ v_sp
        # <s'n'|U|sn> with axes (s, n, s', n')
        self._amp = _product_table(local_amplitudes(sc, "quantum"), sc.sys_dims, sc.env_dims)
        b = kron(v_kp, v_np).conj().T @ sc.U @ kron(v_k, v_n)
        # conj <k' n'|U|k n> with axes (k, n, k', n')
        self._amp_joint = b.reshape(ds, de, ds, de).transpose(2, 3, 0, 1).conj().copy()

        if kind == "forward":
            self._w_k = sc.p_k
            self._w_n = sc.p_n
            self._w_kp = np.ones(ds)
            self._w_np = np.ones(de)
        else:
            self._w_k = np.ones(ds)
            self._w_n = np.ones(de)
            self._w_kp = sc.p_k_final
            self._w_np = q.p_n_final

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def block(self, ks: slice) -> np.ndarray:
        w_k = self._w_k[ks][:, None, None, None, None, None]
        w_n = self._w_n[None, None, :, None, None, None]
        w_kp = self._w_kp[None, None, None, :, None, None]
        w_np = self._w_np[None, None, None, None, None, :]
        ov_in = self._ov_in[ks][:, :, None, None, None, None]
        ov_out = self._ov_out[None, None, None, :, :, None]
        amp = self._amp[None, :, :, None, :, :]
        amp_joint = self._amp_joint[ks][:, None, :, :, None, :]
        return (w_k * ov_in) * w_n * (w_kp * ov_out) * w_np * amp * amp_joint

    def blocks(self, block_size: int | None = None) -> Iterator[tuple[slice, np.ndarray]]:
        if self.dense and block_size is None:
            yield slice(None), self.values
            return
        dk = self.shape[0]
        if block_size is None:
            per_k = self.size // dk
            block_size = max(1, min(dk, (1 << 22) // per_k))
        for start in range(0, dk, block_size):
            ks = slice(start, min(start + block_size, dk))
            yield ks, self.block(ks)

    @cached_property
    def values(self) -> np.ndarray:
        out = self.block(slice(None))
        out.setflags(write=False)
        return out

    def total(self) -> complex:
        from .summation import compensated_sum

        return complex(compensated_sum([compensated_sum(b) for _, b in self.blocks()]))

    def __getitem__(self, zeta: ZetaIndex) -> complex:
        idx = zeta.flat(self.sys_dims, self.env_dims)
        return complex(self.block(slice(idx[0], idx[0] + 1))[(0,) + idx[1:]])


def forward_quasi(sc: Scenario) -> QuasiDistribution:
    """Q^F = p_k p_n <s|k> <k'|s'> <s'n'|U|sn> <kn|U^dag|k'n'>."""
    return QuasiDistribution(sc, "forward")


def backward_quasi(sc: Scenario) -> QuasiDistribution:
    """Q^B = p_{k'} p^ref_{n'} <s|k> <k'|s'> <s'n'|U|sn> <kn|U^dag|k'n'>."""
    return QuasiDistribution(sc, "backward")


# ---------------------------------------------------------------- observables


def delta_iota_cl_table(sc: Scenario, pipeline: str = "classical") -> np.ndarray:
    """Stochastic classical-correlation change, shape (D_S, 1, D_S, 1)."""
    pl = sc.pipeline(pipeline)
    initial = _safe_log(sc.p_s) - _site_log_sum(sc.p_sys_sites)
    final = _safe_log(pl.p_s_final) - _site_log_sum(pl.p_sys_final_sites)
    return (initial[:, None] - final[None, :])[:, None, :, None]


def delta_iota_table(sc: Scenario) -> np.ndarray:
    """Stochastic total-correlation change, shape (D_S, D_S, 1, D_S, D_S, 1)."""
    q = sc.quantum
    lk = _safe_log(sc.p_k)[:, None, None, None]
    ls = _site_log_sum(sc.p_sys_sites)[None, :, None, None]
    lkp = _safe_log(sc.p_k_final)[None, None, :, None]
    lsp = _site_log_sum(q.p_sys_final_sites)[None, None, None, :]
    return (lk - ls - (lkp - lsp))[:, :, None, :, :, None]


def delta_c_table(sc: Scenario) -> np.ndarray:
    """Stochastic coherence change, shape (D_S, D_S, 1, D_S, D_S, 1)."""
    q = sc.quantum
    lk = _safe_log(sc.p_k)[:, None, None, None]
    ls = _safe_log(sc.p_s)[None, :, None, None]
    lkp = _safe_log(sc.p_k_final)[None, None, :, None]
    lsp = _safe_log(q.p_s_final)[None, None, None, :]
    return (lk - ls - (lkp - lsp))[:, :, None, :, :, None]


def _log_prob(p: float, what: str, index) -> float:
    if not p > SUPPORT_FLOOR:
        raise SupportViolation(f"ln of zero probability {what} = {p:.3e}", index=index)
    return float(np.log(p))


def delta_iota_cl(xi: XiIndex, sc: Scenario, pipeline: str = "classical") -> float:
    """ln p_s - sum_j ln p_{s_j} - (ln p_{s'} - sum_l ln p_{s'_l}) at one index."""
    pl = sc.pipeline(pipeline)
    s, _, st, _ = xi.flat(sc.sys_dims, sc.env_dims)
    initial = _log_prob(sc.p_s[s], "p_s", xi) - sum(
        _log_prob(p[i], f"p_s{j + 1}", xi) for j, (p, i) in enumerate(zip(sc.p_sys_sites, xi.s))
    )
    final = _log_prob(pl.p_s_final[st], "p_s'", xi) - sum(
        _log_prob(p[i], f"p_s'{j + 1}", xi) for j, (p, i) in enumerate(zip(pl.p_sys_final_sites, xi.s_t))
    )
    return initial - final


def delta_iota(zeta: ZetaIndex, sc: Scenario) -> float:
    """ln p_k - sum_j ln p_{s_j} - (ln p_{k'} - sum_l ln p_{s'_l}) at one index."""
    zeta.flat(sc.sys_dims, sc.env_dims)
    xi = zeta.xi
    initial = _log_prob(sc.p_k[zeta.k], "p_k", zeta) - sum(
        _log_prob(p[i], f"p_s{j + 1}", zeta) for j, (p, i) in enumerate(zip(sc.p_sys_sites, xi.s))
    )
    final = _log_prob(sc.p_k_final[zeta.k_p], "p_k'", zeta) - sum(
        _log_prob(p[i], f"p_s'{j + 1}", zeta)
        for j, (p, i) in enumerate(zip(sc.quantum.p_sys_final_sites, xi.s_t))
    )
    return initial - final


def delta_c(zeta: ZetaIndex, sc: Scenario) -> float:
    """ln p_k - ln p_s - (ln p_{k'} - ln p_{s'}) at one index."""
    _, s, _, _, st, _ = zeta.flat(sc.sys_dims, sc.env_dims)
    return (
        _log_prob(sc.p_k[zeta.k], "p_k", zeta)
        - _log_prob(sc.p_s[s], "p_s", zeta)
        - _log_prob(sc.p_k_final[zeta.k_p], "p_k'", zeta)
        + _log_prob(sc.quantum.p_s_final[st], "p_s'", zeta)
    )


# ---------------------------------------------------------------- dumps


def _index_record(flat, sys_dims, env_dims, quasi: bool) -> list[int]:
    parts = []
    if quasi:
        k, s, n, kp, st, nt = flat
        xi_flat = (s, n, st, nt)
    else:
        xi_flat = flat
    xi = XiIndex.from_flat(xi_flat, sys_dims, env_dims)
    if quasi:
        parts.append(int(k))
    parts += list(xi.s) + list(xi.n)
    if quasi:
        parts.append(int(kp))
    parts += list(xi.s_t) + list(xi.n_t)
    return parts


def dump_jsonl(dist, fh) -> int:
    """Write one ``{"index": [...], "re": x, "im": y}`` line per entry.

    Index layout: ``[s_1..s_N, n_1..n_N, s'_1.., n'_1..]`` for trajectory
    distributions and ``[k, s_1.., n_1.., k', s'_1.., n'_1..]`` for
    quasiprobabilities. Returns the number of records written.
    """
    quasi = isinstance(dist, QuasiDistribution)
    count = 0
    for ks, block in dist.blocks():
        offset = ks.start or 0
        for local in np.ndindex(block.shape):
            z = complex(block[local])
            flat = (local[0] + offset,) + local[1:] if quasi else local
            rec = {"index": _index_record(flat, dist.sys_dims, dist.env_dims, quasi),
                   "re": z.real, "im": z.imag}
            fh.write(json.dumps(rec) + "\n")
            count += 1
    return count
