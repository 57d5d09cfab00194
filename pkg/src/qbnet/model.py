"""QB net data model: nodes, transition tables, decorations, validation."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NotDecoratedGrounded,
    NotDecoratedMarginalizer,
    UnknownNode,
)
from .tensorcore import DEFAULT_TOL, StateSpace

PLAIN = "plain"
MARGINALIZER = "marginalizer"
GROUNDED = "grounded"


@dataclass(frozen=True)
class Decoration:
    kind: str = PLAIN
    component: int | None = None
    ground: str | None = None

    @classmethod
    def plain(cls) -> "Decoration":
        return cls()

    @classmethod
    def marginalizer(cls, component: int) -> "Decoration":
        return cls(MARGINALIZER, component=int(component))

    @classmethod
    def grounded(cls, label) -> "Decoration":
        return cls(GROUNDED, ground=str(label))


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """Amplitudes ``A(child | parents)``.

    ``amps`` has shape ``(N_child, N_parent_1, ..., N_parent_k)`` with parent
    axes in declared parent order.  Entries never written are exactly zero.
    """

    child_space: StateSpace
    parent_spaces: tuple[StateSpace, ...]
    amps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parent_spaces", tuple(self.parent_spaces))
        amps = np.array(self.amps, dtype=np.complex128, copy=True)
        shape = (self.child_space.size,) + tuple(s.size for s in self.parent_spaces)
        if amps.shape != shape:
            raise DimensionMismatch(f"table shape {amps.shape}, expected {shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_entries(
        cls,
        child_space: StateSpace,
        parent_spaces: Sequence[StateSpace],
        entries: Mapping[tuple, complex],
    ) -> "TransitionTable":
        """Build from ``{(child_label, (parent_label, ...)): amplitude}``."""
        shape = (child_space.size,) + tuple(s.size for s in parent_spaces)
        amps = np.zeros(shape, dtype=np.complex128)
        for (child, parents), value in entries.items():
            parents = tuple(parents)
            if len(parents) != len(parent_spaces):
                raise DimensionMismatch(f"expected {len(parent_spaces)} parent labels")
            idx = (child_space.index(child),) + tuple(
                s.index(p) for s, p in zip(parent_spaces, parents)
            )
            amps[idx] = value
        return cls(child_space, tuple(parent_spaces), amps)

    @classmethod
    def delta(
        cls,
        child_space: StateSpace,
        parent_spaces: Sequence[StateSpace] = (),
        *,
        ground: str | None = None,
        component: int | None = None,
    ) -> "TransitionTable":
        """Grounded (``ground``) or marginalizer (``component``) delta table."""
        shape = (child_space.size,) + tuple(s.size for s in parent_spaces)
        amps = np.zeros(shape, dtype=np.complex128)
        if ground is not None:
            amps[(child_space.index(ground),) + (0,) * len(parent_spaces)] = 1.0
        elif component is not None:
            (parent,) = parent_spaces
            for j, lab in enumerate(parent.labels):
                part = parent.component_of(lab, component)
                if part in child_space.labels:
                    amps[child_space.index(part), j] = 1.0
        return cls(child_space, tuple(parent_spaces), amps)

    @property
    def n_columns(self) -> int:
        return int(np.prod(self.amps.shape[1:], dtype=np.int64))

    def column_matrix(self) -> np.ndarray:
        """``N_child x prod(N_parents)`` view, parent tuples row-major."""
        return self.amps.reshape(self.child_space.size, self.n_columns)

    def parent_tuples(self) -> Iterator[tuple[str, ...]]:
        return itertools.product(*(s.labels for s in self.parent_spaces))

    def get(self, child, parents: Sequence = ()) -> complex:
        idx = (self.child_space.index(child),) + tuple(
            s.index(p) for s, p in zip(self.parent_spaces, parents)
        )
        return complex(self.amps[idx])

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransitionTable):
            return NotImplemented
        return (
            self.child_space == other.child_space
            and self.parent_spaces == other.parent_spaces
            and self.amps.tobytes() == other.amps.tobytes()
        )

    __hash__ = None


@dataclass(frozen=True)
class Node:
    label: str
    space: StateSpace
    parents: tuple[str, ...]
    table: TransitionTable
    decoration: Decoration = Decoration()
    line: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))


@dataclass(frozen=True)
class QBNet:
    nodes: tuple[Node, ...] = ()
    name: str = "net"

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(n.label for n in self.nodes)

    def node(self, label: str) -> Node:
        for n in self.nodes:
            if n.label == label:
                return n
        raise UnknownNode(f"no node {label!r}")

    def topological_order(self) -> list[str] | None:
        """Kahn ordering that prefers declaration order; ``None`` on a cycle."""
        labels = self.labels
        indeg = {lab: 0 for lab in labels}
        children: dict[str, list[str]] = {lab: [] for lab in labels}
        for n in self.nodes:
            for p in n.parents:
                if p in children:
                    children[p].append(n.label)
                    indeg[n.label] += 1
        order: list[str] = []
        ready = [lab for lab in labels if indeg[lab] == 0]
        while ready:
            lab = ready.pop(0)
            order.append(lab)
            for c in children[lab]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
            ready.sort(key=labels.index)
        return order if len(order) == len(set(labels)) else None


@dataclass(frozen=True)
class Violation:
    kind: str
    node: str | None
    message: str
    column: tuple[str, ...] | None = None
    deviation: float | None = None
    line: int | None = None

    def __str__(self) -> str:
        parts = [self.kind]
        if self.node is not None:
            parts.append(f"node={self.node}")
        if self.line is not None:
            parts.append(f"line={self.line}")
        if self.column is not None:
            parts.append("column=(" + ",".join(self.column) + ")")
        if self.deviation is not None:
            parts.append(f"deviation={self.deviation:.6g}")
        parts.append(self.message)
        return " ".join(parts)


def _find_cycle(net: QBNet) -> list[str] | None:
    parents = {n.label: [p for p in n.parents if p in net.labels] for n in net.nodes}
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(lab: str) -> list[str] | None:
        state[lab] = 1
        stack.append(lab)
        for p in parents[lab]:
            if state.get(p) == 1:
                return stack[stack.index(p):] + [p]
            if p not in state:
                found = visit(p)
                if found:
                    return found
        stack.pop()
        state[lab] = 2
        return None

    for lab in net.labels:
        if lab not in state:
            found = visit(lab)
            if found:
                return found
    return None


def validate_net(net: QBNet, tol: float = DEFAULT_TOL) -> list[Violation]:
    """Collect every structural and numerical problem; empty means valid."""
    out: list[Violation] = []
    by_label: dict[str, Node] = {}
    for n in net.nodes:
        if n.label in by_label:
            out.append(Violation("DuplicateNode", n.label, "label declared twice", line=n.line))
        else:
            by_label[n.label] = n

    for n in net.nodes:
        v = lambda kind, msg, **kw: out.append(Violation(kind, n.label, msg, line=n.line, **kw))
        resolved = True
        if len(set(n.parents)) != len(n.parents):
            v("DuplicateParent", f"parent list {list(n.parents)} repeats a node")
        for p in n.parents:
            if p not in by_label:
                v("DanglingParent", f"parent {p!r} is not a node")
                resolved = False
        t = n.table
        if t.child_space != n.space:
            v("SpaceMismatch", "table child space differs from node space")
            resolved = False
        if len(t.parent_spaces) != len(n.parents):
            v("SpaceMismatch", f"table has {len(t.parent_spaces)} parent axes for {len(n.parents)} parents")
            resolved = False
        elif resolved:
            for p, ps in zip(n.parents, t.parent_spaces):
                if by_label[p].space != ps:
                    v("SpaceMismatch", f"table axis for parent {p!r} does not match its state space")
                    resolved = False
        if not np.all(np.isfinite(t.amps)):
            v("NonFiniteAmplitude", "table holds NaN or infinity")
            continue

        sums = np.sum(np.abs(t.column_matrix()) ** 2, axis=0)
        for cols, s in zip(t.parent_tuples(), sums):
            dev = abs(float(s) - 1.0)
            if dev > tol:
                v("ColumnNotNormalized", "sum of |amplitude|^2 over child states != 1",
                  column=cols, deviation=dev)

        for msg in _decoration_problems(n, by_label, resolved):
            v("DecorationViolation", msg)

    cycle = _find_cycle(net)
    if cycle:
        out.append(Violation("CycleDetected", cycle[0], "cycle " + " <- ".join(cycle)))
    return out


def _decoration_problems(n: Node, by_label: Mapping[str, Node], resolved: bool) -> list[str]:
    d = n.decoration
    probs: list[str] = []
    if d.kind == GROUNDED:
        if n.parents:
            probs.append("grounded node must be a root")
        if d.ground not in n.space.labels:
            probs.append(f"ground label {d.ground!r} not in state space")
        elif not n.parents and not _is_grounded_table(n):
            probs.append("grounded table is not a delta on the ground label")
    elif d.kind == MARGINALIZER:
        if len(n.parents) != 1:
            probs.append("marginalizer needs exactly one parent")
        elif resolved:
            parent = by_label[n.parents[0]]
            if d.component is None or not 0 <= d.component < parent.space.components:
                probs.append(
                    f"component {d.component} invalid for parent with "
                    f"{parent.space.components} component(s)"
                )
            elif not _is_marginalizer_table(n, parent):
                probs.append("marginalizer table is not the component delta")
    return probs


def _is_grounded_table(n: Node) -> bool:
    expected = np.zeros(n.space.size, dtype=np.complex128)
    expected[n.space.index(n.decoration.ground)] = 1.0
    return bool(np.array_equal(n.table.amps.reshape(-1), expected))


def _is_marginalizer_table(n: Node, parent: Node, tol: float = 0.0) -> bool:
    k = n.decoration.component
    cols = n.table.column_matrix()
    for j, plab in enumerate(parent.space.labels):
        part = parent.space.component_of(plab, k)
        for i, clab in enumerate(n.space.labels):
            if abs(cols[i, j] - (1.0 if clab == part else 0.0)) > tol:
                return False
    return True


def check_marginalizer(net: QBNet, node: str, tol: float = 0.0) -> bool:
    """Table is the Kronecker delta onto the declared parent component.

    The default ``tol=0`` demands exact 0/1 entries.
    """
    n = net.node(node)
    if n.decoration.kind != MARGINALIZER:
        raise NotDecoratedMarginalizer(f"node {node!r} is not a marginalizer")
    if len(n.parents) != 1:
        return False
    parent = net.node(n.parents[0])
    k = n.decoration.component
    if k is None or not 0 <= k < parent.space.components:
        return False
    if n.table.parent_spaces != (parent.space,) or n.table.child_space != n.space:
        return False
    return _is_marginalizer_table(n, parent, tol)


def check_grounded(net: QBNet, node: str) -> bool:
    n = net.node(node)
    if n.decoration.kind != GROUNDED:
        raise NotDecoratedGrounded(f"node {node!r} is not grounded")
    if n.parents or n.decoration.ground not in n.space.labels:
        return False
    return _is_grounded_table(n)


def is_isometry_node(net: QBNet, node: str, tol: float = DEFAULT_TOL) -> bool:
    """Columns of the node's table are orthonormal."""
    cols = net.node(node).table.column_matrix()
    gram = cols.conj().T @ cols
    return bool(np.max(np.abs(gram - np.eye(gram.shape[0]))) <= tol)


def embed_state_space(small: StateSpace, large: StateSpace) -> dict[str, str]:
    """Injection of ``small``'s labels into ``large``.

    Identity on labels when ``small`` is a subset of ``large``; otherwise the
    i-th label maps to the i-th label.
    """
    if small.size > large.size:
        raise DimensionMismatch(f"cannot embed {small.size} states into {large.size}")
    if set(small.labels) <= set(large.labels):
        return {lab: lab for lab in small.labels}
    return dict(zip(small.labels, large.labels))


def embedding_indices(small: StateSpace, large: StateSpace) -> tuple[int, ...]:
    mapping = embed_state_space(small, large)
    return tuple(large.index(mapping[lab]) for lab in small.labels)
