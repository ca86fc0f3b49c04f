"""Entropies, correlation measures, and the system-environment scenario pipeline.

All quantities are in nats. Changes follow the "initial minus final" sign
convention, so data-processing inequalities read ``delta >= 0``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError
from .qcore import Layout, Spectral, clip_probabilities, freeze, hermitian_eig, kron, kron_all, permute_sites
from .qstates import DensityState, UnitaryGate, dephase, diagonal_in, local_bases, product_basis

DEPHASING_TOL = 1e-8


def _as_state(rho) -> DensityState:
    if isinstance(rho, DensityState):
        return rho
    m = np.asarray(rho)
    return DensityState(m, Layout((("S1", m.shape[0]),)))


def von_neumann_entropy(rho) -> float:
    rho = _as_state(rho)
    lam = clip_probabilities(np.linalg.eigvalsh(rho.matrix))
    lam = lam[lam > 0]
    return max(float(-np.sum(lam * np.log(lam))), 0.0)


def total_mutual_information(rho: DensityState) -> float:
    """Sum of single-site entropies minus the joint entropy."""
    rho = _as_state(rho)
    if len(rho.layout) == 1:
        return 0.0
    return sum(von_neumann_entropy(m) for m in rho.marginals()) - von_neumann_entropy(rho)


def classical_correlation(rho: DensityState) -> float:
    return total_mutual_information(dephase(_as_state(rho)))


def coherence(rho: DensityState) -> float:
    rho = _as_state(rho)
    return total_mutual_information(rho) - classical_correlation(rho)


def relative_entropy_of_coherence(rho: DensityState) -> float:
    """S(dephased rho) - S(rho), dephasing in the local eigenbases."""
    rho = _as_state(rho)
    return von_neumann_entropy(dephase(rho)) - von_neumann_entropy(rho)


@dataclass(frozen=True)
class Pipeline:
    """Everything derived from evolving one initial system state.

    ``sys_final``/``env_final`` are the local eigenbases of the final
    subsystem/subenvironment marginals; ``p_s_final`` is the diagonal of the
    final system state in the product of ``sys_final``; ``p_n_final`` is the
    diagonal of the reference environment state (product of final local
    environment spectra).
    """

    rho_S: DensityState
    rho_SE_final: DensityState
    rho_S_final: DensityState
    rho_S_final_sites: tuple[DensityState, ...]
    rho_E_final_sites: tuple[DensityState, ...]
    rho_E_ref: DensityState
    sys_final: tuple[Spectral, ...]
    env_final: tuple[Spectral, ...]
    p_s_final: np.ndarray
    p_n_final: np.ndarray

    @property
    def p_sys_final_sites(self) -> list[np.ndarray]:
        return [clip_probabilities(b.values) for b in self.sys_final]


@dataclass(frozen=True)
class Scenario:
    """One system-environment instance with both pipelines evaluated.

    ``quantum`` evolves rho_S itself; ``classical`` evolves the dephased
    initial state. ``joint_initial``/``joint_final`` hold the joint
    eigen-decompositions of rho_S and rho'_S (or, with
    ``joint_basis="product"``, the product local bases with the diagonal
    distributions in their place).
    """

    layout_S: Layout
    layout_E: Layout
    rho_S: DensityState
    rho_E_list: tuple[DensityState, ...]
    gates: tuple[UnitaryGate, ...]
    U: np.ndarray
    sys_initial: tuple[Spectral, ...]
    env_initial: tuple[Spectral, ...]
    p_s: np.ndarray
    p_n: np.ndarray
    rho_S_dephased: DensityState
    joint_initial: Spectral
    joint_final: Spectral
    joint_basis: str
    quantum: Pipeline
    classical: Pipeline

    @property
    def N(self) -> int:
        return len(self.layout_S)

    @property
    def sys_dims(self) -> tuple[int, ...]:
        return self.layout_S.dims

    @property
    def env_dims(self) -> tuple[int, ...]:
        return self.layout_E.dims

    @property
    def p_k(self) -> np.ndarray:
        return clip_probabilities(self.joint_initial.values)

    @property
    def p_k_final(self) -> np.ndarray:
        return clip_probabilities(self.joint_final.values)

    @property
    def p_sys_sites(self) -> list[np.ndarray]:
        return [clip_probabilities(b.values) for b in self.sys_initial]

    def pipeline(self, which: str) -> Pipeline:
        if which not in ("quantum", "classical"):
            raise ArgumentError(f"pipeline must be 'quantum' or 'classical', got {which!r}")
        return getattr(self, which)


def global_unitary(gates: Sequence[UnitaryGate], layout_S: Layout, layout_E: Layout) -> np.ndarray:
    """Assemble prod_j U_j in the (S-block, E-block) site order."""
    if len(gates) != len(layout_S) or len(layout_E) != len(layout_S):
        raise ArgumentError(
            f"need one gate per site: {len(gates)} gates, {len(layout_S)} system sites, "
            f"{len(layout_E)} environment sites"
        )
    pair_sites = []
    for j, gate in enumerate(gates):
        s_site, e_site = layout_S.sites[j], layout_E.sites[j]
        if tuple(gate.acts_on) != (s_site[0], e_site[0]):
            raise ArgumentError(f"gate {j} acts on {gate.acts_on}, expected {(s_site[0], e_site[0])}")
        if gate.matrix.shape[0] != s_site[1] * e_site[1]:
            raise ArgumentError(
                f"gate {j} has dimension {gate.matrix.shape[0]}, sites need {s_site[1] * e_site[1]}"
            )
        pair_sites += [s_site, e_site]
    pair_layout = Layout(tuple(pair_sites))
    u_pair = kron_all(g.matrix for g in gates)
    u, _ = permute_sites(u_pair, pair_layout, layout_S.labels + layout_E.labels)
    return u


def _evolve(rho_init: DensityState, rho_E: np.ndarray, U: np.ndarray,
            layout_S: Layout, layout_E: Layout) -> Pipeline:
    layout_SE = layout_S.concat(layout_E)
    rho0 = kron(rho_init.matrix, rho_E)
    rho_SE = DensityState(U @ rho0 @ U.conj().T, layout_SE)
    rho_S_final = rho_SE.reduce(layout_S.labels)
    s_sites = tuple(rho_S_final.marginals())
    e_sites = tuple(rho_SE.reduce(label) for label in layout_E.labels)
    sys_final = tuple(hermitian_eig(m.matrix) for m in s_sites)
    env_final = tuple(hermitian_eig(m.matrix) for m in e_sites)
    rho_ref = DensityState(kron_all(m.matrix for m in e_sites), layout_E)
    p_s_final = clip_probabilities(diagonal_in(rho_S_final, sys_final))
    p_n_final = kron_all(clip_probabilities(b.values)[None, :] for b in env_final).real.ravel()
    return Pipeline(
        rho_S=rho_init,
        rho_SE_final=rho_SE,
        rho_S_final=rho_S_final,
        rho_S_final_sites=s_sites,
        rho_E_final_sites=e_sites,
        rho_E_ref=rho_ref,
        sys_final=sys_final,
        env_final=env_final,
        p_s_final=freeze(p_s_final),
        p_n_final=freeze(p_n_final),
    )


def _product_spectral(bases: Sequence[Spectral], p: np.ndarray) -> Spectral:
    v = product_basis(bases)
    return Spectral(freeze(p), freeze(v), tuple((i,) for i in range(len(p))))


def run_scenario(rho_S: DensityState, rho_E_list: Sequence[DensityState],
                 gates: Sequence[UnitaryGate], joint_basis: str = "eigen") -> Scenario:
    """Evolve rho_S (quantum pipeline) and its local dephasing (classical
    pipeline) under prod_j U_{S_j E_j} with a product environment.

    ``joint_basis="product"`` replaces the joint eigenbases of the initial and
    final system states by the product local bases (k identified with s, k'
    with s'); this is the classical-reduction setting for dephased inputs.
    """
    if joint_basis not in ("eigen", "product"):
        raise ArgumentError(f"joint_basis must be 'eigen' or 'product', got {joint_basis!r}")
    rho_E_list = tuple(rho_E_list)
    gates = tuple(gates)
    layout_S = rho_S.layout
    env_sites = []
    for j, rho_e in enumerate(rho_E_list):
        if len(rho_e.layout) != 1:
            raise ArgumentError(f"environment state {j} must be single-site")
        env_sites.append(rho_e.layout.sites[0])
    layout_E = Layout(tuple(env_sites))
    if set(layout_S.labels) & set(layout_E.labels):
        raise ArgumentError("system and environment labels must be distinct")
    U = global_unitary(gates, layout_S, layout_E)

    sys_initial = tuple(local_bases(rho_S))
    env_initial = tuple(hermitian_eig(r.matrix) for r in rho_E_list)
    p_s = clip_probabilities(diagonal_in(rho_S, sys_initial))
    p_n = kron_all(clip_probabilities(b.values)[None, :] for b in env_initial).real.ravel()
    rho_S_dephased = dephase(rho_S, sys_initial)
    rho_E = kron_all(r.matrix for r in rho_E_list)

    quantum = _evolve(rho_S, rho_E, U, layout_S, layout_E)
    classical = _evolve(rho_S_dephased, rho_E, U, layout_S, layout_E)

    if joint_basis == "eigen":
        joint_initial = hermitian_eig(rho_S.matrix)
        joint_final = hermitian_eig(quantum.rho_S_final.matrix)
        clip_probabilities(joint_initial.values)
        clip_probabilities(joint_final.values)
    else:
        joint_initial = _product_spectral(sys_initial, p_s)
        joint_final = _product_spectral(quantum.sys_final, quantum.p_s_final)

    return Scenario(
        layout_S=layout_S,
        layout_E=layout_E,
        rho_S=rho_S,
        rho_E_list=rho_E_list,
        gates=gates,
        U=freeze(U),
        sys_initial=sys_initial,
        env_initial=env_initial,
        p_s=freeze(p_s),
        p_n=freeze(p_n),
        rho_S_dephased=rho_S_dephased,
        joint_initial=joint_initial,
        joint_final=joint_final,
        joint_basis=joint_basis,
        quantum=quantum,
        classical=classical,
    )


def dephasing_deviation(sc: Scenario) -> float:
    """max-norm distance of rho'_S from the completely dephased regime:
    rho'_S must equal the classical-pipeline final state and be diagonal in
    its own product local eigenbasis."""
    q = sc.quantum.rho_S_final.matrix
    to_classical = float(np.max(np.abs(q - sc.classical.rho_S_final.matrix)))
    to_dephased = float(np.max(np.abs(q - dephase(sc.quantum.rho_S_final, sc.quantum.sys_final).matrix)))
    return max(to_classical, to_dephased)


def is_completely_dephasing(sc: Scenario, tol: float = DEPHASING_TOL) -> bool:
    return dephasing_deviation(sc) <= tol


@dataclass(frozen=True)
class InfoSummary:
    I_initial: float
    I_final: float
    I_cl_initial: float
    I_cl_final: float
    C_initial: float
    C_final: float
    dI: float
    dI_cl: float
    dC: float

    def to_dict(self) -> dict:
        return asdict(self)


def info_summary(sc: Scenario) -> InfoSummary:
    """Correlation and coherence changes computed from entropies.

    The classical final value is I_cl of the classical-pipeline final state,
    i.e. the mutual information after dephasing it in its own final local
    eigenbases.
    """
    i0 = total_mutual_information(sc.rho_S)
    i1 = total_mutual_information(sc.quantum.rho_S_final)
    icl0 = total_mutual_information(sc.rho_S_dephased)
    icl1 = total_mutual_information(dephase(sc.classical.rho_S_final, sc.classical.sys_final))
    c0 = coherence(sc.rho_S)
    c1 = coherence(sc.quantum.rho_S_final)
    return InfoSummary(i0, i1, icl0, icl1, c0, c1, i0 - i1, icl0 - icl1, c0 - c1)

