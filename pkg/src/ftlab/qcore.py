"""Dense complex linear algebra and multipartite bookkeeping.

Flattening convention, used by every module in the package: for a layout
with sites (A, B, C), the flat basis index of |a b c> is
``(a * dim_B + b) * dim_C + c``, i.e. the leftmost site varies slowest.
This is the same convention as ``np.kron`` and C-order ``reshape``.

Operators are plain ``complex128`` numpy arrays. Value types returned by
this module hold read-only arrays so that they can be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, NumericError, SizeError, ValidationError

MAX_TOTAL_DIM = 2**20
HERMITIAN_TOL = 1e-10
DEG_TOL = 1e-10
NEG_CLIP_TOL = 1e-10


def freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def as_cmatrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D complex128 array."""
    try:
        m = np.asarray(a, dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"not a complex matrix ({exc})", path=name) from None
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {m.shape}", path=name)
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries", path=name)
    return m


@dataclass(frozen=True)
class Layout:
    """Ordered list of (label, local dimension) pairs."""

    sites: tuple[tuple[str, int], ...]

    def __post_init__(self):
        sites = tuple((str(label), int(dim)) for label, dim in self.sites)
        labels = [label for label, _ in sites]
        if len(set(labels)) != len(labels):
            raise ArgumentError(f"duplicate site labels in {labels}")
        for label, dim in sites:
            if dim < 1:
                raise ArgumentError(f"site {label!r} has non-positive dimension {dim}")
        object.__setattr__(self, "sites", sites)

    @classmethod
    def from_dims(cls, prefix: str, dims: Sequence[int]) -> "Layout":
        return cls(tuple((f"{prefix}{j + 1}", d) for j, d in enumerate(dims)))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.sites)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.sites)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.sites else 1

    def __len__(self) -> int:
        return len(self.sites)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ArgumentError(f"unknown site label {label!r}; have {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.index(label)]

    def concat(self, other: "Layout") -> "Layout":
        return Layout(self.sites + other.sites)

    def subset(self, labels: Iterable[str]) -> "Layout":
        wanted = set(labels)
        for label in wanted:
            self.index(label)
        return Layout(tuple(site for site in self.sites if site[0] in wanted))

    def unravel(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.dims))

    def ravel(self, multi: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.dims))

    def to_dict(self) -> dict:
        return {"sites": [{"label": label, "dim": dim} for label, dim in self.sites]}

    @classmethod
    def from_dict(cls, data: dict) -> "Layout":
        return cls(tuple((s["label"], s["dim"]) for s in data["sites"]))


def kron(a, b, max_dim: int = MAX_TOTAL_DIM) -> np.ndarray:
    a = as_cmatrix(a, "A")
    b = as_cmatrix(b, "B")
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if max(rows, cols) > max_dim:
        raise SizeError(f"tensor product would be {rows}x{cols}, cap is {max_dim}")
    return np.kron(a, b)


def kron_all(mats: Iterable, max_dim: int = MAX_TOTAL_DIM) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = kron(out, m, max_dim=max_dim)
    return out


def _check_square(rho: np.ndarray, layout: Layout, name: str = "rho") -> None:
    n = layout.total_dim
    if rho.shape != (n, n):
        raise ArgumentError(f"{name} has shape {rho.shape}, layout needs {(n, n)}")


def partial_trace(rho, layout: Layout, keep: Iterable[str]) -> tuple[np.ndarray, Layout]:
    """Trace out every site not in ``keep``. Kept sites stay in layout order."""
    rho = as_cmatrix(rho, "rho")
    _check_square(rho, layout)
    keep = set(keep)
    for label in keep:
        layout.index(label)
    n = len(layout)
    kept = [i for i, label in enumerate(layout.labels) if label in keep]
    if len(kept) == n:
        return rho.copy(), layout
    t = rho.reshape(layout.dims + layout.dims)
    rows = list(range(n))
    cols = [i if i not in kept else n + i for i in range(n)]
    out_axes = kept + [n + i for i in kept]
    reduced = np.einsum(t, rows + cols, out_axes)
    sub = Layout(tuple(layout.sites[i] for i in kept))
    d = sub.total_dim
    return reduced.reshape(d, d), sub


def permute_sites(op, layout: Layout, new_order: Sequence[str]) -> tuple[np.ndarray, Layout]:
    """Reorder the tensor factors of an operator: a similarity transform by
    the basis permutation taking ``layout`` order to ``new_order``."""
    op = as_cmatrix(op, "operator")
    _check_square(op, layout, "operator")
    new_order = list(new_order)
    if sorted(new_order) != sorted(layout.labels) or len(set(new_order)) != len(new_order):
        raise ArgumentError(f"{new_order} is not a permutation of {list(layout.labels)}")
    perm = [layout.index(label) for label in new_order]
    n = len(layout)
    t = op.reshape(layout.dims + layout.dims)
    t = t.transpose(perm + [n + p for p in perm])
    new_layout = Layout(tuple(layout.sites[p] for p in perm))
    d = new_layout.total_dim
    return np.ascontiguousarray(t.reshape(d, d)), new_layout


@dataclass(frozen=True)
class Spectral:
    """Eigen-pairs sorted by descending value; ``vectors[:, i]`` pairs with ``values[i]``."""

    values: np.ndarray
    vectors: np.ndarray
    degeneracy_groups: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.values)

    def projector(self, i: int) -> np.ndarray:
        v = self.vectors[:, i]
        return np.outer(v, v.conj())

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate a vector so its largest-magnitude component (first one, on ties)
    is real positive."""
    mags = np.abs(v)
    top = mags.max()
    if top == 0:
        return v
    i = int(np.flatnonzero(mags >= top * (1 - 1e-9))[0])
    return v * (np.conj(v[i]) / mags[i])


def _canonical_basis(block: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(block): Gram-Schmidt on the
    projections of e_0, e_1, ... in order."""
    dim, m = block.shape
    proj = block @ block.conj().T
    chosen: list[np.ndarray] = []
    threshold = 1.0 / (2.0 * dim)
    for i in range(dim):
        if len(chosen) == m:
            break
        v = proj[:, i].copy()
        for _ in range(2):
            for u in chosen:
                v -= u * np.vdot(u, v)
        norm2 = float(np.vdot(v, v).real)
        if norm2 > threshold:
            chosen.append(v / np.sqrt(norm2))
    if len(chosen) != m:
        raise NumericError(f"could not build a {m}-dimensional basis for a degenerate eigenspace")
    return np.column_stack(chosen)


def hermitian_eig(h, deg_tol: float = DEG_TOL) -> Spectral:
    """Eigendecomposition with a deterministic basis.

    Values come out in descending order. Eigenvalues closer than ``deg_tol``
    (chained) form a degeneracy group whose basis is rebuilt from the
    canonical basis by Gram-Schmidt. Every vector then has its largest
    component made real positive.
    """
    h = as_cmatrix(h, "H")
    if h.shape[0] != h.shape[1]:
        raise ValidationError(f"matrix is not square: {h.shape}", path="H")
    asym = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    if asym > HERMITIAN_TOL:
        raise ValidationError(f"matrix is not Hermitian (max |H - H^dag| = {asym:.3e})", path="H")
    herm = (h + h.conj().T) / 2
    try:
        w, v = np.linalg.eigh(herm)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigh failed on a {h.shape[0]}x{h.shape[0]} matrix: {exc}") from exc
    w = w[::-1].copy()
    v = v[:, ::-1].copy()

    groups: list[list[int]] = []
    for i in range(len(w)):
        if groups and w[i - 1] - w[i] <= deg_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    for g in groups:
        if len(g) > 1:
            v[:, g] = _canonical_basis(v[:, g])
    for i in range(v.shape[1]):
        v[:, i] = fix_phase(v[:, i])
    return Spectral(freeze(w), freeze(v), tuple(tuple(g) for g in groups))


def clip_probabilities(values: np.ndarray, tol: float = NEG_CLIP_TOL) -> np.ndarray:
    """Clip tiny negative eigenvalues to zero; anything below ``-tol`` is an error."""
    values = np.asarray(values, dtype=np.float64)
    if values.size and values.min() < -tol:
        raise ValidationError(f"eigenvalue {values.min():.3e} below -{tol:g}")
    return np.where(values < 0, 0.0, values)


def matrix_to_json(m: np.ndarray) -> list:
    """Row-major nested list with [re, im] pairs."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def matrix_from_json(data, name: str = "matrix") -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"cannot parse matrix ({exc})", path=name) from None
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValidationError(
            f"expected rows x cols x [re, im], got shape {arr.shape}", path=name
        )
    return as_cmatrix(arr[..., 0] + 1j * arr[..., 1], name)
