"""Text formats: QB net descriptions, matrix / Kraus / ensemble files, and
JSON result documents.

Net format::

    # Bell net
    net bell
    node c states 0 1
    amp c 0 | = 0.7071067811865476 0
    amp c 1 | = 0.7071067811865476 0
    node b states 0 1 parents c
    amp b 0 | 0 = 1 0
    amp b 1 | 1 = 1 0

Node clauses (any order after the label): ``states``, ``components K``,
``parents ...``, ``grounded <label>``, ``marginalizer <k>`` where ``k`` is the
0-based component of the single parent.  Decorated nodes with no ``amp``
lines get their delta table filled in.  Parents may be declared later in the
file; ``amp`` lines must follow their own node's declaration.

Matrix format::

    matrix rho registers a=2
    0.5,0 0.5,0
    0.5,0 0.5,0

A header with ``in a=2 out b=2`` instead of ``registers`` declares a
rectangular operator; followed by ``kraus <mu>`` blocks it is a Kraus file.
Square files may hold ``element <mu>`` blocks (a RINNO).

Ensemble format::

    ensemble mix register x=2
    item 0.5
    1,0 0,0
    item 0.5
    0.7071067811865476,0 0.7071067811865476,0
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    BadDecoration,
    DuplicateAmplitudeEntry,
    DuplicateNode,
    QBNSyntaxError,
    ShapeMismatch,
    SourceSpan,
    UndeclaredNode,
    UnknownParent,
)
from .model import GROUNDED, MARGINALIZER, Decoration, Node, QBNet, TransitionTable
from .tensorcore import (
    DensityMatrix,
    IndexedKet,
    Register,
    StateSpace,
    basis_labels,
    join_composite,
    split_composite,
)

_TOKEN = re.compile(r"\([^()]*\)|[|=]|[^\s|=()]+|[()]")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_INT = re.compile(r"[0-9]+\Z")
_FLOAT = re.compile(r"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?\Z")
_NODE_KEYWORDS = {"states", "components", "parents", "grounded", "marginalizer"}


@dataclass(frozen=True)
class Token:
    text: str
    span: SourceSpan


def _lines(text: str) -> Iterator[tuple[int, list[Token]]]:
    """Yield (line number, tokens) for non-blank lines, comments stripped."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = [Token(m.group(0), SourceSpan(lineno, m.start() + 1)) for m in _TOKEN.finditer(line)]
        if toks:
            yield lineno, toks


def _end_span(lineno: int, toks: Sequence[Token]) -> SourceSpan:
    last = toks[-1]
    return SourceSpan(lineno, last.span.column + len(last.text))


def _ident(tok: Token, what: str) -> str:
    if not _IDENT.match(tok.text):
        raise QBNSyntaxError(f"bad {what} {tok.text!r}", tok.span)
    return tok.text


def _state_label(tok: Token) -> str:
    t = tok.text
    if t.startswith("("):
        parts = [p.strip() for p in t[1:-1].split(",")]
        if len(parts) < 2 or not all(_IDENT.match(p) or _INT.match(p) for p in parts):
            raise QBNSyntaxError(f"bad tuple label {t!r}", tok.span)
        return join_composite(parts)
    if _IDENT.match(t) or _INT.match(t):
        return t
    raise QBNSyntaxError(f"bad state label {t!r}", tok.span)


def _float(tok: Token) -> float:
    if not _FLOAT.match(tok.text):
        raise QBNSyntaxError(f"bad number {tok.text!r}", tok.span)
    x = float(tok.text)
    if not math.isfinite(x):
        raise QBNSyntaxError(f"number out of range {tok.text!r}", tok.span)
    return x


def _int(tok: Token, what: str) -> int:
    if not _INT.match(tok.text):
        raise QBNSyntaxError(f"bad {what} {tok.text!r}", tok.span)
    return int(tok.text)


# ---------------------------------------------------------------------------
# nets


@dataclass
class _NodeDecl:
    label: str
    space: StateSpace
    parents: list[Token]
    decoration: Decoration
    span: SourceSpan
    entries: dict


def _parse_node(lineno: int, toks: list[Token]) -> _NodeDecl:
    if len(toks) < 2:
        raise QBNSyntaxError("node needs a label", _end_span(lineno, toks))
    label = _ident(toks[1], "node label")
    clauses: dict[str, list[Token]] = {}
    key_tok: dict[str, Token] = {}
    current = None
    for tok in toks[2:]:
        if tok.text in _NODE_KEYWORDS:
            if tok.text in clauses:
                raise QBNSyntaxError(f"repeated clause {tok.text!r}", tok.span)
            current = tok.text
            clauses[current] = []
            key_tok[current] = tok
        elif current is None:
            raise QBNSyntaxError(f"unexpected {tok.text!r}", tok.span)
        else:
            clauses[current].append(tok)

    if "states" not in clauses or not clauses["states"]:
        where = key_tok["states"].span if "states" in key_tok else toks[1].span
        raise QBNSyntaxError(f"node {label!r} declares no states", where)
    components = 1
    if "components" in clauses:
        ctoks = clauses["components"]
        if len(ctoks) != 1:
            raise QBNSyntaxError("components takes one integer", key_tok["components"].span)
        components = _int(ctoks[0], "component count")
        if components < 1:
            raise QBNSyntaxError("components must be >= 1", ctoks[0].span)
    labels = []
    for tok in clauses["states"]:
        lab = _state_label(tok)
        if lab in labels:
            raise QBNSyntaxError(f"duplicate state {lab!r}", tok.span)
        if len(split_composite(lab)) != components:
            raise QBNSyntaxError(f"state {lab!r} does not have {components} component(s)", tok.span)
        labels.append(lab)
    space = StateSpace(tuple(labels), components)

    parents = clauses.get("parents", [])
    if "parents" in clauses and not parents:
        raise QBNSyntaxError("empty parents clause", key_tok["parents"].span)
    for p in parents:
        _ident(p, "parent label")

    decoration = Decoration.plain()
    if "grounded" in clauses and "marginalizer" in clauses:
        raise BadDecoration("node cannot be both grounded and a marginalizer", key_tok["marginalizer"].span)
    if "grounded" in clauses:
        g = clauses["grounded"]
        if len(g) != 1:
            raise BadDecoration("grounded takes one state label", key_tok["grounded"].span)
        ground = _state_label(g[0])
        if ground not in labels:
            raise BadDecoration(f"ground state {ground!r} not in node states", g[0].span)
        decoration = Decoration.grounded(ground)
    if "marginalizer" in clauses:
        m = clauses["marginalizer"]
        if len(m) != 1 or not _INT.match(m[0].text):
            raise BadDecoration("marginalizer takes one component index", (m[0] if m else key_tok["marginalizer"]).span)
        decoration = Decoration.marginalizer(int(m[0].text))
    return _NodeDecl(label, space, parents, decoration, toks[0].span, {})


def parse_net(text: str) -> QBNet:
    """Parse a net description; structure only, no numerical validation."""
    name = None
    decls: dict[str, _NodeDecl] = {}
    amp_lines: list[tuple[int, list[Token]]] = []

    for lineno, toks in _lines(text):
        head = toks[0].text
        if name is None:
            if head != "net" or len(toks) != 2:
                raise QBNSyntaxError("file must start with 'net <name>'", toks[0].span)
            name = _ident(toks[1], "net name")
        elif head == "node":
            decl = _parse_node(lineno, toks)
            if decl.label in decls:
                raise DuplicateNode(f"node {decl.label!r} already declared", toks[1].span)
            decls[decl.label] = decl
        elif head == "amp":
            if len(toks) < 2:
                raise QBNSyntaxError("amp needs a node label", _end_span(lineno, toks))
            if toks[1].text not in decls:
                raise UndeclaredNode(f"amp for undeclared node {toks[1].text!r}", toks[1].span)
            amp_lines.append((lineno, toks))
        else:
            raise QBNSyntaxError(f"unknown statement {head!r}", toks[0].span)
    if name is None:
        raise QBNSyntaxError("empty file; expected 'net <name>'", SourceSpan(1, 1))

    for decl in decls.values():
        for p in decl.parents:
            if p.text not in decls:
                raise UnknownParent(f"parent {p.text!r} is not declared", p.span)

    for lineno, toks in amp_lines:
        _parse_amp(lineno, toks, decls)

    nodes = []
    for decl in decls.values():
        pspaces = tuple(decls[p.text].space for p in decl.parents)
        parents = tuple(p.text for p in decl.parents)
        d = decl.decoration
        if not decl.entries and d.kind == GROUNDED:
            table = TransitionTable.delta(decl.space, pspaces, ground=d.ground)
        elif not decl.entries and d.kind == MARGINALIZER and len(pspaces) == 1 and d.component < pspaces[0].components:
            table = TransitionTable.delta(decl.space, pspaces, component=d.component)
        else:
            table = TransitionTable.from_entries(decl.space, pspaces, decl.entries)
        nodes.append(Node(decl.label, decl.space, parents, table, d, line=decl.span.line))
    return QBNet(tuple(nodes), name)


def _parse_amp(lineno: int, toks: list[Token], decls: dict[str, _NodeDecl]) -> None:
    decl = decls[toks[1].text]
    texts = [t.text for t in toks]
    if "|" not in texts or "=" not in texts:
        raise QBNSyntaxError("amp line needs '<child> | <parents> = <re> <im>'", _end_span(lineno, toks))
    bar, eq = texts.index("|"), texts.index("=")
    if bar != 3 or eq < bar:
        where = toks[min(bar, len(toks) - 1)].span if bar != 3 else toks[eq].span
        raise QBNSyntaxError("amp line needs exactly one child label before '|'", where)
    child_tok = toks[2]
    child = _state_label(child_tok)
    if child not in decl.space.labels:
        raise QBNSyntaxError(f"state {child!r} not in node {decl.label!r}", child_tok.span)
    ptoks = toks[bar + 1:eq]
    if len(ptoks) != len(decl.parents):
        where = ptoks[0].span if ptoks else toks[bar].span
        raise QBNSyntaxError(f"expected {len(decl.parents)} parent label(s), got {len(ptoks)}", where)
    plabs = []
    for p, ptok in zip(decl.parents, ptoks):
        lab = _state_label(ptok)
        if lab not in decls[p.text].space.labels:
            raise QBNSyntaxError(f"state {lab!r} not in parent {p.text!r}", ptok.span)
        plabs.append(lab)
    vals = toks[eq + 1:]
    if len(vals) != 2:
        where = vals[2].span if len(vals) > 2 else _end_span(lineno, toks)
        raise QBNSyntaxError("amplitude must be two numbers 're im'", where)
    value = complex(_float(vals[0]), _float(vals[1]))
    key = (child, tuple(plabs))
    if key in decl.entries:
        raise DuplicateAmplitudeEntry(f"amplitude {key} already given", child_tok.span)
    decl.entries[key] = value


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _is_written(z: complex) -> bool:
    # keep signed zeros so the roundtrip stays bit-identical
    return z.real != 0 or z.imag != 0 or math.copysign(1, z.real) < 0 or math.copysign(1, z.imag) < 0


def serialize_net(net: QBNet) -> str:
    """Canonical text: declaration order, entries by (child, parent tuple)."""
    out = [f"net {net.name}"]
    for n in net.nodes:
        parts = ["node", n.label]
        if n.space.components > 1:
            parts += ["components", str(n.space.components)]
        parts += ["states", *n.space.labels]
        if n.parents:
            parts += ["parents", *n.parents]
        if n.decoration.kind == GROUNDED:
            parts += ["grounded", n.decoration.ground]
        elif n.decoration.kind == MARGINALIZER:
            parts += ["marginalizer", str(n.decoration.component)]
        out.append(" ".join(parts))
        t = n.table
        cols = t.column_matrix()
        for i, child in enumerate(n.space.labels):
            for j, ptuple in enumerate(t.parent_tuples()):
                z = complex(cols[i, j])
                if _is_written(z):
                    lhs = " ".join(["amp", n.label, child, "|", *ptuple])
                    out.append(f"{lhs} = {format_float(z.real)} {format_float(z.imag)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# matrices


@dataclass(frozen=True, eq=False)
class MatrixFile:
    """Parsed matrix file.

    ``registers`` is set for square files, ``in_register``/``out_register``
    for operator files.  ``blocks`` holds ``(label, matrix)`` pairs; a plain
    body is a single block labeled ``None``.
    """

    name: str
    registers: tuple[Register, ...] | None
    in_register: Register | None
    out_register: Register | None
    blocks: tuple[tuple[str | None, np.ndarray], ...]
    block_keyword: str | None = None

    @property
    def matrix(self) -> np.ndarray:
        if len(self.blocks) != 1 or self.blocks[0][0] is not None:
            raise ShapeMismatch("file holds blocks, not a single matrix")
        return self.blocks[0][1]

    @property
    def matrices(self) -> list[np.ndarray]:
        return [m for _, m in self.blocks]

    @property
    def labels(self) -> list[str | None]:
        return [lab for lab, _ in self.blocks]

    @property
    def shape(self) -> tuple[int, int]:
        if self.registers is not None:
            d = math.prod(r.size for r in self.registers)
            return d, d
        return self.out_register.size, self.in_register.size

    def density(self) -> DensityMatrix:
        if self.registers is None:
            raise ShapeMismatch("operator file is not a density matrix")
        return DensityMatrix(self.registers, self.matrix)


def _reg_decl(tok: Token) -> Register:
    m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)=([0-9]+)", tok.text)
    if not m or int(m.group(2)) < 1:
        raise QBNSyntaxError(f"bad register declaration {tok.text!r}, expected name=N", tok.span)
    return Register(m.group(1), StateSpace.range(int(m.group(2))))


def _complex_entry(tok: Token) -> complex:
    parts = tok.text.split(",")
    if len(parts) != 2:
        raise QBNSyntaxError(f"bad entry {tok.text!r}, expected re,im", tok.span)
    return complex(
        _float(Token(parts[0], tok.span)),
        _float(Token(parts[1], SourceSpan(tok.span.line, tok.span.column + len(parts[0]) + 1))),
    )


_ENTRY_TOKEN = re.compile(r"\S+")


def _entry_lines(text: str) -> Iterator[tuple[int, list[Token]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = [Token(m.group(0), SourceSpan(lineno, m.start() + 1)) for m in _ENTRY_TOKEN.finditer(line)]
        if toks:
            yield lineno, toks


def parse_matrix_file(text: str) -> MatrixFile:
    lines = list(_entry_lines(text))
    if not lines:
        raise QBNSyntaxError("empty file; expected 'matrix <name> ...'", SourceSpan(1, 1))
    lineno, head = lines[0]
    if head[0].text != "matrix" or len(head) < 4:
        raise QBNSyntaxError("header must be 'matrix <name> registers ...' or 'matrix <name> in ... out ...'", head[0].span)
    name = _ident(head[1], "matrix name")
    registers = in_reg = out_reg = None
    if head[2].text == "registers":
        registers = tuple(_reg_decl(t) for t in head[3:])
        ids = [r.id for r in registers]
        if len(set(ids)) != len(ids):
            raise QBNSyntaxError("duplicate register name", head[3].span)
        d = math.prod(r.size for r in registers)
        rows, cols = d, d
    elif head[2].text == "in":
        if len(head) != 6 or head[4].text != "out":
            raise QBNSyntaxError("expected 'in <reg>=<N> out <reg>=<N>'", head[2].span)
        in_reg, out_reg = _reg_decl(head[3]), _reg_decl(head[5])
        rows, cols = out_reg.size, in_reg.size
    else:
        raise QBNSyntaxError(f"expected 'registers' or 'in', got {head[2].text!r}", head[2].span)

    body = lines[1:]
    block_kw = None
    if body and body[0][1][0].text in ("kraus", "element"):
        block_kw = body[0][1][0].text
    if block_kw == "kraus" and in_reg is None:
        raise QBNSyntaxError("kraus blocks need an 'in ... out ...' header", body[0][1][0].span)
    if block_kw == "element" and registers is None:
        raise QBNSyntaxError("element blocks need a 'registers' header", body[0][1][0].span)

    groups: list[tuple[str | None, SourceSpan, list[tuple[int, list[Token]]]]] = []
    if block_kw is None:
        groups.append((None, head[0].span, body))
    else:
        for ln, toks in body:
            if toks[0].text in ("kraus", "element"):
                if toks[0].text != block_kw:
                    raise QBNSyntaxError(f"mixed block keywords {block_kw!r} and {toks[0].text!r}", toks[0].span)
                if len(toks) != 2:
                    raise QBNSyntaxError(f"'{block_kw}' takes one outcome label", toks[0].span)
                label = _state_label(toks[1])
                if any(g[0] == label for g in groups):
                    raise QBNSyntaxError(f"duplicate block label {label!r}", toks[1].span)
                groups.append((label, toks[0].span, []))
            else:
                groups[-1][2].append((ln, toks))

    blocks = []
    for label, span, rows_toks in groups:
        if len(rows_toks) != rows:
            where = rows_toks[rows][1][0].span if len(rows_toks) > rows else span
            raise ShapeMismatch(f"expected {rows} row(s), found {len(rows_toks)}", where)
        m = np.zeros((rows, cols), dtype=np.complex128)
        for r, (ln, toks) in enumerate(rows_toks):
            if len(toks) != cols:
                where = toks[cols].span if len(toks) > cols else toks[0].span
                raise ShapeMismatch(f"row has {len(toks)} entries, expected {cols}", where)
            for c, tok in enumerate(toks):
                m[r, c] = _complex_entry(tok)
        m.setflags(write=False)
        blocks.append((label, m))
    return MatrixFile(name, registers, in_reg, out_reg, tuple(blocks), block_kw)


@dataclass(frozen=True, eq=False)
class EnsembleFile:
    name: str
    register: Register
    weights: tuple[float, ...]
    kets: tuple[np.ndarray, ...]


def parse_ensemble_file(text: str) -> EnsembleFile:
    lines = list(_entry_lines(text))
    if not lines:
        raise QBNSyntaxError("empty file; expected 'ensemble <name> register <reg>=<N>'", SourceSpan(1, 1))
    _, head = lines[0]
    if head[0].text != "ensemble" or len(head) != 4 or head[2].text != "register":
        raise QBNSyntaxError("header must be 'ensemble <name> register <reg>=<N>'", head[0].span)
    name = _ident(head[1], "ensemble name")
    reg = _reg_decl(head[3])
    weights, kets = [], []
    body = lines[1:]
    i = 0
    while i < len(body):
        ln, toks = body[i]
        if toks[0].text != "item" or len(toks) != 2:
            raise QBNSyntaxError("expected 'item <weight>'", toks[0].span)
        weights.append(_float(toks[1]))
        if i + 1 >= len(body) or body[i + 1][1][0].text == "item":
            raise ShapeMismatch("item without an amplitude row", toks[0].span)
        _, row = body[i + 1]
        if len(row) != reg.size:
            raise ShapeMismatch(f"ket has {len(row)} entries, expected {reg.size}", row[0].span)
        kets.append(np.array([_complex_entry(t) for t in row], dtype=np.complex128))
        i += 2
    if not weights:
        raise ShapeMismatch("ensemble has no items", head[0].span)
    return EnsembleFile(name, reg, tuple(weights), tuple(kets))


# ---------------------------------------------------------------------------
# result documents


def _pairs(a: np.ndarray) -> list:
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [_pairs(row) for row in a]


def _register_doc(regs: Sequence[Register]) -> list[dict]:
    return [{"id": r.id, "labels": list(r.space.labels)} for r in regs]


def density_document(rho: DensityMatrix, tol: float | None = None) -> dict:
    doc = {
        "kind": "density_matrix",
        "registers": _register_doc(rho.registers),
        "basis": basis_labels(rho.registers),
        "entries": _pairs(rho.matrix),
        "trace": [rho.trace().real, rho.trace().imag],
    }
    if tol is not None:
        doc["trace_deviation"] = rho.trace_deviation
        doc["flagged"] = rho.trace_deviation > tol
    return doc


def ket_document(ket: IndexedKet) -> dict:
    return {
        "kind": "ket",
        "registers": _register_doc(ket.registers),
        "basis": basis_labels(ket.registers),
        "amplitudes": _pairs(ket.amplitudes),
    }


def operator_document(kind: str, matrix: np.ndarray, rows: Sequence[Register], cols: Sequence[Register]) -> dict:
    return {
        "kind": kind,
        "row_registers": _register_doc(rows),
        "column_registers": _register_doc(cols),
        "row_basis": basis_labels(rows),
        "column_basis": basis_labels(cols),
        "entries": _pairs(np.asarray(matrix)),
    }


def probabilities_document(outcomes: Sequence[str], values: Sequence[float]) -> dict:
    return {
        "kind": "probabilities",
        "outcomes": list(outcomes),
        "values": [float(v) for v in values],
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def document_matrix(doc: dict) -> np.ndarray:
    """Inverse of the ``entries`` encoding."""
    a = np.asarray(doc["entries"] if "entries" in doc else doc["amplitudes"], dtype=float)
    return a[..., 0] + 1j * a[..., 1]
