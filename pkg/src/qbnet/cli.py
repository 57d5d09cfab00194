"""``qbnet`` command line.

Exit codes: 0 success, 1 domain error, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import channels as ch
from .errors import ParseError, QBNetError, ShapeMismatch
from .metastate import NodeOp, evaluate
from .model import embedding_indices, validate_net
from .netlang import (
    density_document,
    dumps,
    ket_document,
    operator_document,
    parse_ensemble_file,
    parse_matrix_file,
    parse_net,
    probabilities_document,
)
from .tensorcore import (
    DEFAULT_CAP,
    DEFAULT_TOL,
    DensityMatrix,
    IndexedKet,
    Register,
    StateSpace,
    complete_at_slots,
    partial_trace,
)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    tol: float = DEFAULT_TOL
    cap: int = DEFAULT_CAP
    out: Path | None = None
    deterministic: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.cap < 1:
            raise UsageError("--cap must be >= 1")


def _default_tol() -> float:
    raw = os.environ.get("QBNET_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"QBNET_TOL={raw!r} is not a number") from None


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _emit(doc: dict, cfg: RunConfig) -> None:
    text = dumps(doc)
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text, encoding="utf-8")


# -- commands ---------------------------------------------------------------


def cmd_validate(args, cfg: RunConfig) -> int:
    net = parse_net(_read(args.file))
    problems = validate_net(net, cfg.tol)
    for p in problems:
        print(p)
    if cfg.out is not None:
        doc = {
            "kind": "validation",
            "net": net.name,
            "valid": not problems,
            "violations": [
                {"kind": p.kind, "node": p.node, "line": p.line, "message": p.message,
                 "column": list(p.column) if p.column is not None else None,
                 "deviation": p.deviation}
                for p in problems
            ],
        }
        _emit(doc, cfg)
    if problems:
        return 1
    print(f"{net.name}: valid ({len(net.nodes)} nodes)")
    return 0


def _plan_from_args(args) -> dict[str, NodeOp]:
    plan: dict[str, NodeOp] = {}

    def put(label: str, op: NodeOp, flag: str) -> None:
        if label in plan:
            raise UsageError(f"node {label!r} given more than one operation ({flag})")
        plan[label] = op

    for flag, factory in (("--trace", NodeOp.trace), ("--cl", NodeOp.classicize), ("--sl", NodeOp.slash)):
        for label in getattr(args, flag[2:]) or []:
            put(label, factory(), flag)
    for flag, factory in (("--bra", NodeOp.bra), ("--ketbra", NodeOp.ketbra)):
        for item in getattr(args, flag[2:]) or []:
            label, sep, value = item.partition("=")
            if not sep or not label or not value:
                raise UsageError(f"{flag} expects node=value, got {item!r}")
            put(label, factory(value), flag)
    return plan


def cmd_eval(args, cfg: RunConfig) -> int:
    plan = _plan_from_args(args)
    net = parse_net(_read(args.file))
    result = evaluate(net, plan, tol=cfg.tol, cap=cfg.cap)
    _emit(density_document(result.density, cfg.tol), cfg)
    if result.flagged:
        print(f"trace deviation: {result.trace_deviation:.6g}", file=sys.stderr)
    return 0


def kraus_from_file(text: str) -> ch.KrausSet:
    mf = parse_matrix_file(text)
    if mf.block_keyword != "kraus":
        raise ShapeMismatch("Kraus file needs 'kraus <mu>' blocks")
    in_reg, out_reg = mf.in_register, mf.out_register
    if in_reg.id == out_reg.id and in_reg.size == out_reg.size:
        out_reg = in_reg
    return ch.KrausSet(StateSpace(tuple(mf.labels)), in_reg, out_reg, tuple(mf.matrices))


def _density_from_file(text: str, tol: float) -> DensityMatrix:
    return parse_matrix_file(text).density().check(tol)


def cmd_channel(args, cfg: RunConfig) -> int:
    ks = kraus_from_file(_read(args.kraus))
    rep = ch.validate_kraus(ks, cfg.tol)
    if not rep.ok:
        raise ch.InvalidKraus("; ".join(rep.violations))
    if args.rho is None and not args.dilate:
        raise UsageError("--rho is required unless only --dilate is given")
    doc: dict = {"kind": "channel"}
    if args.rho is not None:
        rho = _density_from_file(_read(args.rho), cfg.tol)
        applied = ch.complementary_channel(ks, cfg.tol) if args.complement else ks
        doc["result"] = density_document(ch.channel_apply(applied, rho), cfg.tol)
        if args.probs:
            probs = ch.outcome_probabilities(applied, rho)
            doc["probabilities"] = probabilities_document(list(probs), list(probs.values()))
    if args.dilate:
        du = ch.extend_measurement_to_unitary(ks, cfg.tol)
        in_side = (Register(du.out_register.id + "_in", du.out_register.space),
                   Register(du.outcome_register.id + "_in", du.outcome_register.space))
        d = operator_document("dilation_unitary", du.matrix, du.registers, in_side)
        d["embedding"] = list(du.embedding)
        doc["dilation"] = d
    _emit(doc, cfg)
    return 0


def cmd_purify(args, cfg: RunConfig) -> int:
    if args.ensemble is not None:
        ef = parse_ensemble_file(_read(args.ensemble))
        kets = tuple(IndexedKet((ef.register,), k) for k in ef.kets)
        ens = ch.Ensemble(ef.weights, kets)
        ch.validate_ensemble(ens, cfg.tol)
        target = ens.density()
    else:
        target = _density_from_file(_read(args.rho), cfg.tol)
        ens = ch.canonical_ensemble(target, cfg.tol)
    ket = ch.purify(ens, tol=cfg.tol)
    back = partial_trace(ket.projector(), [ket.registers[1].id])
    deviation = float(np.max(np.abs(back.matrix - target.matrix)))
    doc = ket_document(ket)
    doc["roundtrip_deviation"] = deviation
    _emit(doc, cfg)
    print(f"roundtrip deviation: {deviation:.3g}", file=sys.stderr)
    return 0


def cmd_extend_isometry(args, cfg: RunConfig) -> int:
    mf = parse_matrix_file(_read(args.matrix))
    if mf.in_register is None or mf.block_keyword is not None:
        raise ShapeMismatch("isometry file needs an 'in ... out ...' header and a single body")
    a, b = mf.in_register, mf.out_register
    emb = embedding_indices(a.space, b.space)
    m = mf.matrix
    u = complete_at_slots([m[:, i] for i in range(a.size)], emb, b.size)
    col_reg = Register(b.id + "_in", b.space)
    doc = operator_document("unitary", u, (b,), (col_reg,))
    doc["embedding"] = list(emb)
    _emit(doc, cfg)
    return 0


# -- entry point ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS, help="numerical tolerance (default $QBNET_TOL or 1e-9)")
    common.add_argument("--cap", type=int, default=argparse.SUPPRESS, help="joint dimension cap (default 2**20)")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="write the result document here")

    p = _Parser(prog="qbnet", description="Quantum Bayesian net tools", parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", parents=[common], help="check a net file")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("eval", parents=[common], help="meta density matrix with node operations")
    e.add_argument("file")
    e.add_argument("--trace", nargs="+", action="extend", metavar="NODE")
    e.add_argument("--cl", nargs="+", action="extend", metavar="NODE")
    e.add_argument("--sl", nargs="+", action="extend", metavar="NODE")
    e.add_argument("--bra", nargs="+", action="extend", metavar="NODE=STATE")
    e.add_argument("--ketbra", nargs="+", action="extend", metavar="NODE=STATE")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("channel", parents=[common], help="apply a Kraus channel")
    c.add_argument("--kraus", required=True)
    c.add_argument("--rho")
    c.add_argument("--complement", action="store_true", help="apply the complementary channel; --rho lives on the outcome space")
    c.add_argument("--dilate", action="store_true", help="include the dilation unitary")
    c.add_argument("--probs", action="store_true", help="include outcome probabilities")
    c.set_defaults(func=cmd_channel)

    u = sub.add_parser("purify", parents=[common], help="purify an ensemble or density matrix")
    g = u.add_mutually_exclusive_group(required=True)
    g.add_argument("--ensemble")
    g.add_argument("--rho")
    u.set_defaults(func=cmd_purify)

    x = sub.add_parser("extend-isometry", parents=[common], help="complete an isometry to a unitary")
    x.add_argument("--matrix", required=True)
    x.set_defaults(func=cmd_extend_isometry)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = RunConfig(
            tol=args.tol if hasattr(args, "tol") else _default_tol(),
            cap=getattr(args, "cap", DEFAULT_CAP),
            out=getattr(args, "out", None),
        )
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"qbnet: usage error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        where = f"{exc.span.line}:{exc.span.column}: " if exc.span else ""
        print(f"qbnet: {where}{exc.kind}: {exc.message}", file=sys.stderr)
        return 2
    except QBNetError as exc:
        print(f"qbnet: {exc.kind}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
