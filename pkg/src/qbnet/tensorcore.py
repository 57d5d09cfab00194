"""Dense complex linear algebra over labeled register spaces.

Joint indices are row-major in register order: the leftmost register varies
slowest, so a ket over registers (a, b) stores amplitude (i, j) at
``i * N_b + j``.  ``np.kron`` follows the same convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionCapExceeded,
    DimensionMismatch,
    NotDensityMatrix,
    NotHermitian,
    NotOrthonormalInput,
    OverlappingRegisters,
    UnknownRegister,
    UnknownState,
)

DEFAULT_TOL = 1e-9
ORTHONORMAL_TOL = 1e-8
DEFAULT_CAP = 2**20

_PHASE_TOL = 1e-12
_SKIP_NORM = 1e-8


def split_composite(label: str) -> tuple[str, ...]:
    """``"(0,1)"`` -> ``("0", "1")``; plain labels come back as a 1-tuple."""
    if label.startswith("(") and label.endswith(")"):
        return tuple(part.strip() for part in label[1:-1].split(","))
    return (label,)


def join_composite(parts: Sequence[str]) -> str:
    return "(" + ",".join(parts) + ")"


@dataclass(frozen=True)
class StateSpace:
    """Ordered, finite set of state labels.

    Composite spaces (``components > 1``) hold tuple labels written
    ``"(l1,l2)"``; each component's own space is recovered with
    :meth:`component_space`.
    """

    labels: tuple[str, ...]
    components: int = 1

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ValueError("state space needs at least one label")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate state labels in {labels}")
        if self.components < 1:
            raise ValueError("components must be >= 1")
        if self.components > 1:
            for lab in labels:
                if len(split_composite(lab)) != self.components:
                    raise ValueError(
                        f"label {lab!r} is not a {self.components}-tuple"
                    )

    @classmethod
    def range(cls, n: int) -> "StateSpace":
        return cls(tuple(str(i) for i in range(n)))

    @property
    def size(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise UnknownState(f"state {label!r} not in {list(self.labels)}") from None

    def component_of(self, label: str, component: int) -> str:
        return split_composite(label)[component]

    def component_space(self, component: int) -> "StateSpace":
        if not 0 <= component < self.components:
            raise IndexError(f"component {component} out of range")
        seen: dict[str, None] = {}
        for lab in self.labels:
            seen.setdefault(split_composite(lab)[component], None)
        return StateSpace(tuple(seen))


@dataclass(frozen=True)
class Register:
    id: str
    space: StateSpace

    @property
    def size(self) -> int:
        return self.space.size


def joint_dim(registers: Iterable[Register]) -> int:
    return math.prod(r.size for r in registers)


def check_cap(dim: int, cap: int = DEFAULT_CAP) -> None:
    if dim > cap:
        raise DimensionCapExceeded(f"joint dimension {dim} exceeds cap {cap}")


def _check_unique(registers: Sequence[Register]) -> None:
    ids = [r.id for r in registers]
    if len(set(ids)) != len(ids):
        raise OverlappingRegisters(f"register ids not unique: {ids}")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


def basis_labels(registers: Sequence[Register]) -> list[str]:
    """Joint basis labels in index order, e.g. ``["0,0", "0,1", ...]``."""
    out = [""]
    for reg in registers:
        out = [f"{p},{lab}" if p else lab for p in out for lab in reg.space.labels]
    return out if registers else [""]


class _RegisterMixin:
    registers: tuple[Register, ...]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.size for r in self.registers)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.registers)

    def position(self, reg_id: str) -> int:
        try:
            return self.ids.index(reg_id)
        except ValueError:
            raise UnknownRegister(f"no register {reg_id!r} in {list(self.ids)}") from None

    def register(self, reg_id: str) -> Register:
        return self.registers[self.position(reg_id)]


@dataclass(frozen=True, eq=False)
class IndexedKet(_RegisterMixin):
    registers: tuple[Register, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        regs = tuple(self.registers)
        object.__setattr__(self, "registers", regs)
        _check_unique(regs)
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.shape[0] != joint_dim(regs):
            raise DimensionMismatch(
                f"{amps.shape[0]} amplitudes for joint dimension {joint_dim(regs)}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("non-finite amplitude")
        object.__setattr__(self, "amplitudes", amps)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = DEFAULT_TOL) -> bool:
        return abs(self.norm() ** 2 - 1.0) <= tol

    def projector(self) -> "DensityMatrix":
        a = self.amplitudes
        return DensityMatrix(self.registers, np.outer(a, a.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix(_RegisterMixin):
    """Square complex matrix over a register set.

    Construction only checks shape; intermediate unnormalized values are
    allowed and show up through :attr:`trace_deviation`.  Use :meth:`check`
    to enforce the Hermitian / PSD / unit-trace invariants.
    """

    registers: tuple[Register, ...]
    matrix: np.ndarray

    def __post_init__(self):
        regs = tuple(self.registers)
        object.__setattr__(self, "registers", regs)
        _check_unique(regs)
        m = _frozen(self.matrix)
        d = joint_dim(regs)
        if m.shape != (d, d):
            raise DimensionMismatch(f"matrix shape {m.shape} for joint dimension {d}")
        if not np.all(np.isfinite(m)):
            raise ValueError("non-finite matrix entry")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    @property
    def trace_deviation(self) -> float:
        return abs(self.trace() - 1.0)

    def is_hermitian(self, tol: float = DEFAULT_TOL) -> bool:
        return hermitian_deviation(self.matrix) <= tol

    def check(self, tol: float = DEFAULT_TOL) -> "DensityMatrix":
        if not self.is_hermitian(tol):
            raise NotDensityMatrix(
                f"not Hermitian (deviation {hermitian_deviation(self.matrix):.3g})"
            )
        if not is_psd(self.matrix, tol):
            raise NotDensityMatrix("not positive semidefinite")
        if self.trace_deviation > tol:
            raise NotDensityMatrix(f"trace deviates from 1 by {self.trace_deviation:.3g}")
        return self


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def hermitian_deviation(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - dagger(m)))) if m.size else 0.0


def tensor_product(a, b):
    """Tensor product of two kets or two density matrices.

    The result's registers are ``a``'s followed by ``b``'s.
    """
    regs = tuple(a.registers) + tuple(b.registers)
    overlap = set(r.id for r in a.registers) & set(r.id for r in b.registers)
    if overlap:
        raise OverlappingRegisters(f"registers {sorted(overlap)} appear on both sides")
    if isinstance(a, IndexedKet) and isinstance(b, IndexedKet):
        return IndexedKet(regs, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(regs, np.kron(a.matrix, b.matrix))
    raise TypeError("tensor_product needs two kets or two density matrices")


def partial_trace(rho: DensityMatrix, over: Iterable[str]) -> DensityMatrix:
    over = set(over)
    positions = sorted((rho.position(r) for r in over), reverse=True)
    n = len(rho.registers)
    t = rho.matrix.reshape(rho.dims + rho.dims)
    for k, pos in enumerate(positions):
        # each trace drops two axes; ket axes before `pos` are untouched
        m = n - k
        t = np.trace(t, axis1=pos, axis2=m + pos)
    keep = tuple(r for r in rho.registers if r.id not in over)
    d = joint_dim(keep)
    return DensityMatrix(keep, np.asarray(t).reshape(d, d))


def _fix_phase(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > _PHASE_TOL)
    if nz.size:
        z = v[nz[0]]
        v = v * (np.conj(z) / abs(z))
        v[nz[0]] = abs(z)
    return v


def gram_schmidt_extend(columns, n: int | None = None, tol: float = ORTHONORMAL_TOL) -> np.ndarray:
    """Complete ``k`` orthonormal columns to an ``n x n`` unitary.

    The inputs become the first ``k`` columns unchanged.  Canonical basis
    vectors ``e_0, e_1, ...`` are orthogonalized against everything collected
    so far (two classical passes), near-null candidates are skipped, and each
    appended column is rotated so its first nonzero entry is real and
    non-negative.
    """
    cols = [np.asarray(c, dtype=np.complex128).ravel() for c in columns]
    if n is None:
        if not cols:
            raise DimensionMismatch("need n when no columns are given")
        n = cols[0].shape[0]
    if any(c.shape[0] != n for c in cols):
        raise DimensionMismatch(f"all columns must have dimension {n}")
    k = len(cols)
    if k > n:
        raise DimensionMismatch(f"{k} columns cannot fit in dimension {n}")

    u = np.zeros((n, n), dtype=np.complex128)
    for i, c in enumerate(cols):
        u[:, i] = c
    if k:
        gram = dagger(u[:, :k]) @ u[:, :k]
        dev = float(np.max(np.abs(gram - np.eye(k))))
        if dev > tol:
            raise NotOrthonormalInput(f"input columns deviate from orthonormal by {dev:.3g}")

    filled = k
    for i in range(n):
        if filled == n:
            break
        v = np.zeros(n, dtype=np.complex128)
        v[i] = 1.0
        basis = u[:, :filled]
        for _ in range(2):
            v = v - basis @ (dagger(basis) @ v)
        norm = np.linalg.norm(v)
        if norm < _SKIP_NORM:
            continue
        u[:, filled] = _fix_phase(v / norm)
        filled += 1
    if filled != n:
        raise NotOrthonormalInput("could not complete basis; inputs are degenerate")
    return u


def complete_at_slots(columns, slots: Sequence[int], n: int, tol: float = ORTHONORMAL_TOL) -> np.ndarray:
    """Unitary whose column ``slots[i]`` is ``columns[i]``.

    Remaining slots receive the :func:`gram_schmidt_extend` completions in
    increasing slot order.
    """
    cols = [np.asarray(c, dtype=np.complex128).ravel() for c in columns]
    if len(set(slots)) != len(slots) or len(slots) != len(cols):
        raise DimensionMismatch("need one distinct slot per column")
    completed = gram_schmidt_extend(cols, n, tol)
    taken = set(slots)
    rest = [j for j in range(n) if j not in taken]
    u = np.empty((n, n), dtype=np.complex128)
    for c, j in zip(cols, slots):
        u[:, j] = c
    for src, j in zip(range(len(cols), n), rest):
        u[:, j] = completed[:, src]
    return u


def is_psd(m: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if hermitian_deviation(m) > tol:
        raise NotHermitian(f"matrix deviates from Hermitian by {hermitian_deviation(m):.3g}")
    herm = 0.5 * (m + dagger(m))
    return bool(np.linalg.eigvalsh(herm).min() >= -tol)


def basis_ket(register: Register, label) -> IndexedKet:
    amps = np.zeros(register.size, dtype=np.complex128)
    amps[register.space.index(label)] = 1.0
    return IndexedKet((register,), amps)
