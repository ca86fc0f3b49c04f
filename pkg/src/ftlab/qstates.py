"""States, gates, random ensembles and the local dephasing map."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError, ValidationError
from .qcore import (
    HERMITIAN_TOL,
    Layout,
    Spectral,
    as_cmatrix,
    freeze,
    hermitian_eig,
    kron_all,
    partial_trace,
)

TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10
UNITARY_TOL = 1e-10
ORTHONORMAL_TOL = 1e-10
FULL_RANK_FLOOR = 1e-12
RNG_ALGORITHM = "numpy.Philox4x64(key=(seed, stream))"
STATE_MEASURE = "ginibre-induced (Hilbert-Schmidt)"


@dataclass(frozen=True)
class DensityState:
    matrix: np.ndarray
    layout: Layout

    def __post_init__(self):
        m = as_cmatrix(self.matrix, "rho")
        n = self.layout.total_dim
        if m.shape != (n, n):
            raise ValidationError(f"shape {m.shape} does not match layout dimension {n}", path="rho")
        asym = float(np.max(np.abs(m - m.conj().T)))
        if asym > HERMITIAN_TOL:
            raise ValidationError(f"not Hermitian (max |rho - rho^dag| = {asym:.3e})", path="rho")
        tr = np.trace(m)
        if abs(tr - 1) > TRACE_TOL:
            raise ValidationError(f"trace is {tr.real:.12g}, expected 1", path="rho")
        lam = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if lam[0] < -POSITIVITY_TOL:
            raise ValidationError(f"negative eigenvalue {lam[0]:.3e}", path="rho")
        object.__setattr__(self, "matrix", freeze(m))

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def reduce(self, keep) -> "DensityState":
        if isinstance(keep, str):
            keep = [keep]
        m, sub = partial_trace(self.matrix, self.layout, keep)
        return DensityState(m, sub)

    def marginals(self) -> list["DensityState"]:
        return [self.reduce(label) for label in self.layout.labels]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True)
class UnitaryGate:
    matrix: np.ndarray
    acts_on: tuple[str, str]

    def __post_init__(self):
        m = as_cmatrix(self.matrix, "U")
        if m.shape[0] != m.shape[1]:
            raise ValidationError(f"gate is not square: {m.shape}", path="U")
        dev = float(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))))
        if dev > UNITARY_TOL:
            raise ValidationError(f"not unitary (max |U U^dag - I| = {dev:.3e})", path="U")
        if len(self.acts_on) != 2:
            raise ArgumentError("a gate acts on exactly one system and one environment site")
        object.__setattr__(self, "matrix", freeze(m))
        object.__setattr__(self, "acts_on", tuple(self.acts_on))


@dataclass(frozen=True)
class RngSpec:
    """Key of a counter-based stream: the same (seed, stream) always gives
    the same draws, independent of how many other streams exist."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = int(getattr(self, name))
            if not 0 <= v < 2**64:
                raise ArgumentError(f"{name} must be a 64-bit unsigned integer, got {v}")
            object.__setattr__(self, name, v)

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise ArgumentError(f"expected RngSpec or numpy Generator, got {type(rng).__name__}")


def complex_gaussian(shape, rng) -> np.ndarray:
    g = _gen(rng)
    return (g.standard_normal(shape) + 1j * g.standard_normal(shape)) / np.sqrt(2)


def random_unitary(dim: int, rng) -> np.ndarray:
    """Haar-random unitary: QR of a Ginibre matrix with R's diagonal made positive."""
    if dim < 1:
        raise ArgumentError(f"dim must be >= 1, got {dim}")
    q, r = np.linalg.qr(complex_gaussian((dim, dim), rng))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_density(dim: int, rank: int | None = None, rng=None, layout: Layout | None = None,
                   full_rank_floor: float = FULL_RANK_FLOOR) -> DensityState:
    """Ginibre-induced mixed state G G^dag / Tr(G G^dag), G of shape (dim, rank).

    Full-rank draws whose smallest eigenvalue is below ``full_rank_floor`` are
    redrawn from the same generator.
    """
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise ArgumentError(f"rank must be in [1, {dim}], got {rank}")
    if layout is None:
        layout = Layout((("S1", dim),))
    if layout.total_dim != dim:
        raise ArgumentError(f"layout dimension {layout.total_dim} != {dim}")
    gen = _gen(rng if rng is not None else RngSpec(0))
    while True:
        g = complex_gaussian((dim, rank), gen)
        rho = g @ g.conj().T
        rho = rho / np.trace(rho).real
        rho = (rho + rho.conj().T) / 2
        if rank < dim or np.linalg.eigvalsh(rho)[0] >= full_rank_floor:
            return DensityState(rho, layout)


def pure_state(psi, layout: Layout) -> DensityState:
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    psi = psi / np.linalg.norm(psi)
    return DensityState(np.outer(psi, psi.conj()), layout)


def named_state(name: str, *args, labels: Sequence[str] | None = None) -> DensityState:
    """Textbook fixtures: ``named_state("bell")``, ``named_state("ghz", n)``,
    ``named_state("product", [rho_1, rho_2, ...])``."""
    if name == "bell":
        layout = Layout(tuple(zip(labels or ("S1", "S2"), (2, 2))))
        return pure_state([1, 0, 0, 1], layout)
    if name == "ghz":
        if len(args) != 1 or int(args[0]) < 1:
            raise ArgumentError("ghz needs a positive site count")
        n = int(args[0])
        layout = Layout(tuple(zip(labels or [f"S{j + 1}" for j in range(n)], [2] * n)))
        psi = np.zeros(2**n)
        psi[0] = psi[-1] = 1
        return pure_state(psi, layout)
    if name == "product":
        if len(args) != 1 or not args[0]:
            raise ArgumentError("product needs a non-empty list of single-site states")
        factors = [f.matrix if isinstance(f, DensityState) else as_cmatrix(f) for f in args[0]]
        dims = [f.shape[0] for f in factors]
        layout = Layout(tuple(zip(labels or [f"S{j + 1}" for j in range(len(dims))], dims)))
        return DensityState(kron_all(factors), layout)
    raise ArgumentError(f"unknown named state {name!r}")


def swap_gate(d: int, env_dim: int | None = None, acts_on=("S1", "E1")) -> UnitaryGate:
    if env_dim is not None and env_dim != d:
        raise ArgumentError(f"SWAP needs equal site dimensions, got {d} and {env_dim}")
    m = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            m[b * d + a, a * d + b] = 1
    return UnitaryGate(m, tuple(acts_on))


def identity_gate(d: int, e: int, acts_on=("S1", "E1")) -> UnitaryGate:
    return UnitaryGate(np.eye(d * e), tuple(acts_on))


def local_bases(rho: DensityState) -> list[Spectral]:
    """Eigenbasis of every single-site marginal, in layout order."""
    return [hermitian_eig(m.matrix) for m in rho.marginals()]


def product_basis(bases: Sequence[Spectral]) -> np.ndarray:
    """Columns are the product vectors |b_1 b_2 ...> in flat index order."""
    for j, b in enumerate(bases):
        v = np.asarray(b.vectors)
        dev = float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))))
        if v.shape[0] != v.shape[1] or dev > ORTHONORMAL_TOL:
            raise ValidationError(f"basis is not orthonormal (deviation {dev:.3e})", path=f"bases[{j}]")
    return kron_all(b.vectors for b in bases)


def diagonal_in(rho: DensityState, bases: Sequence[Spectral]) -> np.ndarray:
    """Joint distribution <b|rho|b> over the product basis, flat order."""
    v = product_basis(bases)
    return np.real(np.einsum("ij,ik,kj->j", v.conj(), rho.matrix, v))


def dephase(rho: DensityState, bases: Sequence[Spectral] | None = None) -> DensityState:
    """Drop every off-diagonal element in the product basis of ``bases``
    (default: the state's own local eigenbases)."""
    if bases is None:
        bases = local_bases(rho)
    if [np.asarray(b.vectors).shape[0] for b in bases] != list(rho.layout.dims):
        raise ArgumentError("basis dimensions do not match the state's layout")
    v = product_basis(bases)
    p = np.real(np.einsum("ij,ik,kj->j", v.conj(), rho.matrix, v))
    out = (v * p) @ v.conj().T
    return DensityState((out + out.conj().T) / 2, rho.layout)
