"""Kraus measurements, channels, RINNOs (POVMs), dilation, purification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidEnsemble,
    InvalidKraus,
    NotDensityMatrix,
    QBNetError,
    ZeroProbabilityOutcome,
)
from .model import embed_state_space, embedding_indices
from .tensorcore import (
    DEFAULT_TOL,
    DensityMatrix,
    IndexedKet,
    Register,
    StateSpace,
    complete_at_slots,
    dagger,
    hermitian_deviation,
    is_psd,
    partial_trace,
)

ZERO_PROB_TOL = 1e-12
_EIG_DROP = 1e-12

TRACING = "tracing"
DEPHASING = "dephasing"
CLASSICAL_COMM = "classical_comm"
COHERENT_COMM = "coherent_comm"


@dataclass(frozen=True)
class Report:
    violations: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()
    deviation: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Operators ``K_mu : H_in -> H_out`` indexed by ``outcome_space``.

    Operator ``mu`` is an ``N_out x N_in`` matrix.
    """

    outcome_space: StateSpace
    in_register: Register
    out_register: Register
    operators: tuple[np.ndarray, ...]
    outcome_id: str = "mu"

    def __post_init__(self):
        ops = []
        for k in self.operators:
            k = np.array(k, dtype=np.complex128, copy=True)
            k.setflags(write=False)
            ops.append(k)
        object.__setattr__(self, "operators", tuple(ops))

    @property
    def outcome_register(self) -> Register:
        return Register(self.outcome_id, self.outcome_space)

    def operator(self, mu) -> np.ndarray:
        return self.operators[self.outcome_space.index(mu)]

    def completeness_deviation(self) -> float:
        n = self.in_register.size
        acc = np.zeros((n, n), dtype=np.complex128)
        for k in self.operators:
            acc += dagger(k) @ k
        return float(np.max(np.abs(acc - np.eye(n))))


def validate_kraus(ks: KrausSet, tol: float = DEFAULT_TOL) -> Report:
    """Shape consistency and completeness ``sum K^dag K = 1``.

    ``N_in > N_out`` (e.g. the tracing measurement) is recorded as a note:
    such a set is a valid measurement but cannot be dilated.
    """
    bad: list[str] = []
    notes: list[str] = []
    n_in, n_out = ks.in_register.size, ks.out_register.size
    if len(ks.operators) != ks.outcome_space.size:
        bad.append(f"{len(ks.operators)} operators for {ks.outcome_space.size} outcomes")
    for lab, k in zip(ks.outcome_space.labels, ks.operators):
        if k.shape != (n_out, n_in):
            bad.append(f"operator {lab} has shape {k.shape}, expected {(n_out, n_in)}")
        elif not np.all(np.isfinite(k)):
            bad.append(f"operator {lab} has non-finite entries")
    if n_in > n_out:
        notes.append(f"N_in={n_in} > N_out={n_out}; no unitary dilation")
    dev = 0.0
    if not bad:
        dev = ks.completeness_deviation()
        if dev > tol:
            bad.append(f"completeness deviation {dev:.6g} exceeds {tol:g}")
    return Report(tuple(bad), tuple(notes), dev)


def _require_kraus(ks: KrausSet, tol: float) -> None:
    rep = validate_kraus(ks, tol)
    if not rep.ok:
        raise InvalidKraus("; ".join(rep.violations))


def _require_input(ks: KrausSet, rho: DensityMatrix) -> None:
    if rho.dim != ks.in_register.size:
        raise DimensionMismatch(f"state has dimension {rho.dim}, operators expect {ks.in_register.size}")


def measurement_superop(
    ks: KrausSet, mu, rho: DensityMatrix, tol: float = ZERO_PROB_TOL
) -> tuple[DensityMatrix, float]:
    """Post-measurement state ``K rho K^dag / P(mu)`` and ``P(mu)``."""
    _require_input(ks, rho)
    k = ks.operator(mu)
    prob = float(np.trace(dagger(k) @ k @ rho.matrix).real)
    if prob <= tol:
        raise ZeroProbabilityOutcome(f"P({mu}) = {prob:.3g}")
    return DensityMatrix((ks.out_register,), k @ rho.matrix @ dagger(k) / prob), prob


def outcome_probabilities(ks: KrausSet, rho: DensityMatrix) -> dict[str, float]:
    _require_input(ks, rho)
    return {
        lab: float(np.trace(k @ rho.matrix @ dagger(k)).real)
        for lab, k in zip(ks.outcome_space.labels, ks.operators)
    }


def is_von_neumann(ks: KrausSet, tol: float = DEFAULT_TOL) -> bool:
    n = ks.in_register.size
    ops = ks.operators
    if any(k.shape != (n, n) for k in ops):
        return False
    for i, k in enumerate(ops):
        if hermitian_deviation(k) > tol:
            return False
        for j, k2 in enumerate(ops):
            target = k if i == j else np.zeros_like(k)
            if np.max(np.abs(k @ k2 - target)) > tol:
                return False
    return bool(np.max(np.abs(sum(ops) - np.eye(n))) <= tol)


def builtin_measurement(kind: str, space: StateSpace, in_id: str = "a", out_id: str = "b") -> KrausSet:
    """The four stock measurements on ``space``.

    Tracing maps onto a one-state register; dephasing stays on ``in_id``;
    the two communication kinds copy into a register ``out_id`` with the
    same labels.
    """
    n = space.size
    src = Register(in_id, space)
    if kind == TRACING:
        ops = [np.eye(n)[a:a + 1, :] for a in range(n)]
        return KrausSet(space, src, Register(out_id, StateSpace(("0",))), tuple(ops))
    if kind == DEPHASING:
        ops = [np.diag(np.eye(n)[a]) for a in range(n)]
        return KrausSet(space, src, src, tuple(ops))
    if kind == CLASSICAL_COMM:
        ops = [np.diag(np.eye(n)[a]) for a in range(n)]
        return KrausSet(space, src, Register(out_id, space), tuple(ops))
    if kind == COHERENT_COMM:
        return KrausSet(StateSpace(("0",)), src, Register(out_id, space), (np.eye(n),))
    raise ValueError(f"unknown measurement kind {kind!r}")


def channel_apply(ks: KrausSet, rho: DensityMatrix) -> DensityMatrix:
    _require_input(ks, rho)
    n = ks.out_register.size
    out = np.zeros((n, n), dtype=np.complex128)
    for k in ks.operators:
        out += k @ rho.matrix @ dagger(k)
    return DensityMatrix((ks.out_register,), out)


# -- RINNO ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Rinno:
    """Resolution of the identity by non-negative operators (a POVM)."""

    outcome_space: StateSpace
    elements: tuple[np.ndarray, ...]
    register: Register | None = None

    def __post_init__(self):
        els = []
        for e in self.elements:
            e = np.array(e, dtype=np.complex128, copy=True)
            e.setflags(write=False)
            els.append(e)
        object.__setattr__(self, "elements", tuple(els))


def rinno_from_kraus(ks: KrausSet) -> Rinno:
    return Rinno(ks.outcome_space, tuple(dagger(k) @ k for k in ks.operators), ks.in_register)


def validate_rinno(r: Rinno, tol: float = DEFAULT_TOL) -> Report:
    bad: list[str] = []
    if len(r.elements) != r.outcome_space.size:
        bad.append(f"{len(r.elements)} elements for {r.outcome_space.size} outcomes")
    if not r.elements:
        return Report(tuple(bad) or ("no elements",))
    n = r.elements[0].shape[0]
    for lab, e in zip(r.outcome_space.labels, r.elements):
        if e.shape != (n, n):
            bad.append(f"element {lab} has shape {e.shape}, expected {(n, n)}")
            continue
        if hermitian_deviation(e) > tol:
            bad.append(f"element {lab} is not Hermitian")
        elif not is_psd(e, tol):
            bad.append(f"element {lab} has a negative eigenvalue")
    dev = 0.0
    if not any("shape" in b for b in bad):
        dev = float(np.max(np.abs(sum(r.elements) - np.eye(n))))
        if dev > tol:
            bad.append(f"elements sum to identity only within {dev:.6g}")
    return Report(tuple(bad), (), dev)


def rinno_probabilities(r: Rinno, rho: DensityMatrix) -> dict[str, float]:
    for e in r.elements:
        if e.shape != (rho.dim, rho.dim):
            raise DimensionMismatch(f"element shape {e.shape} vs state dimension {rho.dim}")
    return {
        lab: float(np.trace(e @ rho.matrix).real)
        for lab, e in zip(r.outcome_space.labels, r.elements)
    }


# -- dilation ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DilationUnitary:
    """Unitary on (b, mu) extending a Kraus set.

    Joint indices put ``b`` slowest and ``mu`` fastest on both sides.  Column
    ``(embedding[a], 0)`` holds ``<b|K_mu|a>`` for every input state ``a``,
    where ``0`` is the first outcome label.
    """

    out_register: Register
    outcome_register: Register
    in_register: Register
    embedding: tuple[int, ...]
    matrix: np.ndarray
    source: KrausSet = field(repr=False)

    @property
    def registers(self) -> tuple[Register, Register]:
        return self.out_register, self.outcome_register

    def block(self) -> np.ndarray:
        """``U`` reshaped to ``[b, mu, A, mu']``."""
        nb, nm = self.out_register.size, self.outcome_register.size
        return self.matrix.reshape(nb, nm, nb, nm)


def extend_measurement_to_unitary(ks: KrausSet, tol: float = DEFAULT_TOL) -> DilationUnitary:
    _require_kraus(ks, tol)
    n_in, n_out, n_mu = ks.in_register.size, ks.out_register.size, ks.outcome_space.size
    if n_in > n_out:
        raise InvalidKraus(f"N_in={n_in} > N_out={n_out}; cannot dilate")
    emb = embedding_indices(ks.in_register.space, ks.out_register.space)
    dim = n_out * n_mu
    # column for input a: entry (b, mu) = <b|K_mu|a>, b slow, mu fast
    stacked = np.stack(ks.operators, axis=1)  # [b, mu, a]
    given = [stacked[:, :, a].reshape(dim) for a in range(n_in)]
    u = complete_at_slots(given, [e * n_mu for e in emb], dim)
    u.setflags(write=False)
    return DilationUnitary(
        ks.out_register, ks.outcome_register, ks.in_register, tuple(emb), u, ks
    )


def embed_density(rho: np.ndarray, embedding: Sequence[int], n: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=np.complex128)
    idx = np.asarray(embedding)
    out[np.ix_(idx, idx)] = rho
    return out


def stinespring_apply(du: DilationUnitary, rho: DensityMatrix) -> DensityMatrix:
    """``tr_mu[ U (embed(rho) (x) |0><0|_mu) U^dag ]``."""
    if rho.dim != du.in_register.size:
        raise DimensionMismatch(f"state has dimension {rho.dim}, dilation expects {du.in_register.size}")
    nb, nm = du.out_register.size, du.outcome_register.size
    ancilla = np.zeros((nm, nm), dtype=np.complex128)
    ancilla[0, 0] = 1.0
    joint = np.kron(embed_density(rho.matrix, du.embedding, nb), ancilla)
    full = DensityMatrix(du.registers, du.matrix @ joint @ dagger(du.matrix))
    return partial_trace(full, [du.outcome_register.id])


def complementary_channel(ks: KrausSet, tol: float = DEFAULT_TOL) -> KrausSet:
    """Kraus set ``L_b = <b|_b U |0>_A`` acting on the outcome register.

    ``|0>_A`` is the embedded first input label.  Completeness of the ``L_b``
    follows from unitarity of ``U``.
    """
    du = extend_measurement_to_unitary(ks, tol)
    zero = du.embedding[0]
    blocks = du.block()[:, :, zero, :]  # [b, mu, mu']
    mu_reg = ks.outcome_register
    return KrausSet(
        ks.out_register.space,
        mu_reg,
        mu_reg,
        tuple(blocks[b] for b in range(ks.out_register.size)),
        outcome_id=ks.out_register.id,
    )


# -- ensembles --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted, normalized (not necessarily orthogonal) kets on one register."""

    weights: tuple[float, ...]
    kets: tuple[IndexedKet, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "kets", tuple(self.kets))

    @property
    def register(self) -> Register:
        return self.kets[0].registers[0]

    def density(self) -> DensityMatrix:
        n = self.register.size
        m = np.zeros((n, n), dtype=np.complex128)
        for w, k in zip(self.weights, self.kets):
            m += w * np.outer(k.amplitudes, k.amplitudes.conj())
        return DensityMatrix((self.register,), m)


def validate_ensemble(e: Ensemble, tol: float = DEFAULT_TOL) -> None:
    if not e.kets or len(e.weights) != len(e.kets):
        raise InvalidEnsemble("need one weight per ket and at least one item")
    reg = e.kets[0].registers
    if len(reg) != 1:
        raise InvalidEnsemble("ensemble kets must live on a single register")
    for w, k in zip(e.weights, e.kets):
        if w < 0:
            raise InvalidEnsemble(f"negative weight {w}")
        if k.registers != reg:
            raise InvalidEnsemble("all kets must share one register")
        if not k.is_normalized(tol):
            raise InvalidEnsemble(f"ket with norm {k.norm():.6g} is not normalized")
    if abs(sum(e.weights) - 1.0) > tol:
        raise InvalidEnsemble(f"weights sum to {sum(e.weights):.6g}, not 1")


def purify(e: Ensemble, j_id: str = "j", tol: float = DEFAULT_TOL) -> IndexedKet:
    """Pure state on (x, j) with ``A(x, j) = <x|psi_j> sqrt(w_j)``; x slow, j fast."""
    validate_ensemble(e, tol)
    x = e.register
    if x.id == j_id:
        raise QBNetError(f"index register id {j_id!r} clashes with {x.id!r}")
    j = Register(j_id, StateSpace.range(len(e.kets)))
    cols = np.stack([k.amplitudes for k in e.kets], axis=1)  # [x, j]
    amps = cols * np.sqrt(np.asarray(e.weights))[None, :]
    return IndexedKet((x, j), amps.reshape(-1))


def canonical_ensemble(rho: DensityMatrix, tol: float = DEFAULT_TOL) -> Ensemble:
    """Eigen-ensemble: descending weights, tiny weights dropped, phases fixed."""
    if len(rho.registers) != 1:
        raise NotDensityMatrix("canonical_ensemble needs a single-register state")
    rho.check(tol)
    herm = 0.5 * (rho.matrix + dagger(rho.matrix))
    vals, vecs = np.linalg.eigh(herm)
    order = np.argsort(-vals, kind="stable")
    weights, kets = [], []
    for i in order:
        if vals[i] < _EIG_DROP:
            continue
        v = vecs[:, i].copy()
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size:
            z = v[nz[0]]
            v = v * (np.conj(z) / abs(z))
        weights.append(float(vals[i]))
        kets.append(IndexedKet(rho.registers, v))
    return Ensemble(tuple(weights), tuple(kets))


__all__ = [
    "CLASSICAL_COMM",
    "COHERENT_COMM",
    "DEPHASING",
    "TRACING",
    "DilationUnitary",
    "Ensemble",
    "KrausSet",
    "Report",
    "Rinno",
    "builtin_measurement",
    "canonical_ensemble",
    "channel_apply",
    "complementary_channel",
    "embed_density",
    "embed_state_space",
    "extend_measurement_to_unitary",
    "is_von_neumann",
    "measurement_superop",
    "outcome_probabilities",
    "purify",
    "rinno_from_kraus",
    "rinno_probabilities",
    "stinespring_apply",
    "validate_ensemble",
    "validate_kraus",
    "validate_rinno",
]
