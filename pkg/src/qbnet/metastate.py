"""Meta ket / meta density matrix of a QB net and the per-node operators.

Node operators:

* ``trace``      incoherent-scalar sum, removes the register
* ``classicize`` incoherent-vector sum (dephasing), keeps the register
* ``slash``      coherent-scalar sum ``sum_b <b|`` on both sides, removes it
* ``bra``        ``<b|`` on the ket, removes the register
* ``ketbra``     ``|b><b|`` on the ket, keeps the register
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidNet, InvalidPlan, UnknownNode
from .model import QBNet, validate_net
from .tensorcore import (
    DEFAULT_CAP,
    DEFAULT_TOL,
    DensityMatrix,
    IndexedKet,
    Register,
    check_cap,
    joint_dim,
    partial_trace,
)

KEEP = "keep"
TRACE = "trace"
CLASSICIZE = "classicize"
SLASH = "slash"
BRA = "bra"
KETBRA = "ketbra"


@dataclass(frozen=True)
class NodeOp:
    kind: str = KEEP
    value: str | None = None

    @classmethod
    def keep(cls):
        return cls(KEEP)

    @classmethod
    def trace(cls):
        return cls(TRACE)

    @classmethod
    def classicize(cls):
        return cls(CLASSICIZE)

    @classmethod
    def slash(cls):
        return cls(SLASH)

    @classmethod
    def bra(cls, value):
        return cls(BRA, str(value))

    @classmethod
    def ketbra(cls, value):
        return cls(KETBRA, str(value))


NodeOpPlan = Mapping[str, NodeOp]


def net_registers(net: QBNet) -> tuple[Register, ...]:
    return tuple(Register(n.label, n.space) for n in net.nodes)


def _require_valid(net: QBNet, tol: float) -> None:
    problems = validate_net(net, tol)
    if problems:
        raise InvalidNet("; ".join(str(p) for p in problems))


def total_amplitude(net: QBNet, x: Sequence) -> complex:
    """Product of table lookups for one assignment, in node order."""
    if len(x) != len(net.nodes):
        raise ValueError(f"assignment has {len(x)} labels for {len(net.nodes)} nodes")
    value = dict(zip(net.labels, (str(v) for v in x)))
    amp = 1 + 0j
    for n in net.nodes:
        amp *= n.table.get(value[n.label], [value[p] for p in n.parents])
    return amp


def build_meta_ket(
    net: QBNet, *, tol: float = DEFAULT_TOL, cap: int = DEFAULT_CAP, validate: bool = True
) -> IndexedKet:
    """Meta ket over all node registers in declaration order.

    Each table is broadcast onto the joint grid and multiplied in node order,
    so every entry is the same product :func:`total_amplitude` computes.
    """
    if validate:
        _require_valid(net, tol)
    regs = net_registers(net)
    dims = tuple(r.size for r in regs)
    check_cap(joint_dim(regs), cap)
    pos = {lab: i for i, lab in enumerate(net.labels)}
    psi = np.ones(dims, dtype=np.complex128)
    for n in net.nodes:
        axes = [pos[n.label]] + [pos[p] for p in n.parents]
        order = np.argsort(axes)
        t = np.transpose(n.table.amps, order)
        shape = [1] * len(dims)
        for ax in axes:
            shape[ax] = dims[ax]
        psi = psi * t.reshape(shape)
    return IndexedKet(regs, psi.reshape(-1))


def meta_density(net: QBNet, *, tol: float = DEFAULT_TOL, cap: int = DEFAULT_CAP) -> DensityMatrix:
    return build_meta_ket(net, tol=tol, cap=cap).projector()


def _axis_mask(rho: DensityMatrix, node: str) -> np.ndarray:
    """Boolean mask: True where row and column agree on ``node``'s label."""
    pos = rho.position(node)
    dims = rho.dims
    inner = int(np.prod(dims[pos + 1:], dtype=np.int64))
    label_of = (np.arange(rho.dim) // inner) % dims[pos]
    return label_of[:, None] == label_of[None, :]


def trace_node(rho: DensityMatrix, node: str) -> DensityMatrix:
    return partial_trace(rho, [node])


def classicize_node(rho: DensityMatrix, node: str) -> DensityMatrix:
    mask = _axis_mask(rho, node)
    return DensityMatrix(rho.registers, np.where(mask, rho.matrix, 0))


def slash_node(rho: DensityMatrix, node: str) -> DensityMatrix:
    """Apply ``sum_b <b|`` on the left and its conjugate on the right.

    The result is not renormalized; check ``trace_deviation``.
    """
    pos = rho.position(node)
    n = len(rho.registers)
    t = rho.matrix.reshape(rho.dims + rho.dims)
    t = t.sum(axis=n + pos).sum(axis=pos)
    keep = tuple(r for r in rho.registers if r.id != node)
    d = joint_dim(keep)
    return DensityMatrix(keep, t.reshape(d, d))


def bra_node(ket: IndexedKet, node: str, value) -> IndexedKet:
    pos = ket.position(node)
    idx = ket.registers[pos].space.index(value)
    t = np.take(ket.tensor(), idx, axis=pos)
    keep = ket.registers[:pos] + ket.registers[pos + 1:]
    return IndexedKet(keep, t.reshape(-1))


def ketbra_node(ket: IndexedKet, node: str, value) -> IndexedKet:
    pos = ket.position(node)
    idx = ket.registers[pos].space.index(value)
    t = np.zeros_like(ket.tensor())
    sl = [slice(None)] * len(ket.registers)
    sl[pos] = idx
    t[tuple(sl)] = ket.tensor()[tuple(sl)]
    return IndexedKet(ket.registers, t.reshape(-1))


def _slash_ket(ket: IndexedKet, node: str) -> IndexedKet:
    pos = ket.position(node)
    t = ket.tensor().sum(axis=pos)
    return IndexedKet(ket.registers[:pos] + ket.registers[pos + 1:], t.reshape(-1))


@dataclass(frozen=True, eq=False)
class EvalResult:
    density: DensityMatrix
    trace_deviation: float
    flagged: bool


def check_plan(net: QBNet, plan: NodeOpPlan) -> None:
    for label, op in plan.items():
        try:
            node = net.node(label)
        except UnknownNode as exc:
            raise InvalidPlan(str(exc)) from None
        if op.kind not in (KEEP, TRACE, CLASSICIZE, SLASH, BRA, KETBRA):
            raise InvalidPlan(f"unknown operation {op.kind!r} on {label!r}")
        if op.kind in (BRA, KETBRA):
            node.space.index(op.value)


def evaluate(
    net: QBNet,
    plan: NodeOpPlan | None = None,
    *,
    tol: float = DEFAULT_TOL,
    cap: int = DEFAULT_CAP,
) -> EvalResult:
    """Density matrix left after applying ``plan`` to the meta state.

    Bra / ketbra / slash act on the ket, in node order.  Trace registers are
    then contracted while forming the outer product, and classicize is
    applied last.  All of these act on distinct registers and commute.
    """
    plan = dict(plan or {})
    check_plan(net, plan)
    ket = build_meta_ket(net, tol=tol, cap=cap)
    for label in net.labels:
        op = plan.get(label, NodeOp.keep())
        if op.kind == BRA:
            ket = bra_node(ket, label, op.value)
        elif op.kind == KETBRA:
            ket = ketbra_node(ket, label, op.value)
        elif op.kind == SLASH:
            ket = _slash_ket(ket, label)

    traced = [lab for lab in net.labels if plan.get(lab, NodeOp.keep()).kind == TRACE]
    rho = _reduced_projector(ket, traced, cap)
    for label in net.labels:
        if plan.get(label, NodeOp.keep()).kind == CLASSICIZE:
            rho = classicize_node(rho, label)
    dev = rho.trace_deviation
    return EvalResult(rho, dev, dev > tol)


def _reduced_projector(ket: IndexedKet, traced: Sequence[str], cap: int) -> DensityMatrix:
    """``tr_traced |ket><ket|`` without building the full outer product."""
    kept_pos = [i for i, r in enumerate(ket.registers) if r.id not in traced]
    tr_pos = [ket.position(lab) for lab in traced]
    kept = tuple(ket.registers[i] for i in kept_pos)
    d_kept = joint_dim(kept)
    check_cap(d_kept, cap)
    m = np.transpose(ket.tensor(), kept_pos + tr_pos).reshape(d_kept, -1)
    return DensityMatrix(kept, m @ m.conj().T)


def brute_force_meta_ket(net: QBNet) -> np.ndarray:
    """Enumerate every assignment and call :func:`total_amplitude`."""
    spaces = [n.space.labels for n in net.nodes]
    return np.array([total_amplitude(net, x) for x in itertools.product(*spaces)], dtype=np.complex128)
