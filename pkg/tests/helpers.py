"""Random instance generators and brute-force oracles shared by the tests.

Oracles here loop over explicit indices and never call into the code path
they check.
"""
import itertools
import math

import numpy as np

from qbnet.channels import KrausSet
from qbnet.model import Decoration, Node, QBNet, TransitionTable
from qbnet.tensorcore import DensityMatrix, Register, StateSpace

SQ = 1 / math.sqrt(2)


def bell_net() -> QBNet:
    two = StateSpace(("0", "1"))
    c = TransitionTable.from_entries(two, (), {("0", ()): SQ, ("1", ()): SQ})
    b = TransitionTable.from_entries(two, (two,), {("0", ("0",)): 1, ("1", ("1",)): 1})
    return QBNet((Node("c", two, (), c), Node("b", two, ("c",), b)), "bell")


def random_table(rng, child: StateSpace, parents, real_sqrt=False):
    shape = (child.size,) + tuple(p.size for p in parents)
    if real_sqrt:
        probs = rng.random(shape) + 0.05
        probs /= probs.sum(axis=0, keepdims=True)
        return TransitionTable(child, tuple(parents), np.sqrt(probs)), probs
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    a /= np.sqrt(np.sum(np.abs(a) ** 2, axis=0, keepdims=True))
    return TransitionTable(child, tuple(parents), a)


def random_net(rng, max_nodes=6, max_states=3, max_parents=2, shuffle=True) -> QBNet:
    n = int(rng.integers(1, max_nodes + 1))
    labels = [f"x{i}" for i in range(n)]
    spaces = []
    for _ in range(n):
        k = int(rng.integers(1, max_states + 1))
        if rng.random() < 0.3:
            spaces.append(StateSpace(tuple(f"s{j}" for j in range(k))))
        else:
            spaces.append(StateSpace.range(k))
    nodes = []
    for i in range(n):
        npar = int(rng.integers(0, min(i, max_parents) + 1))
        parents = sorted(rng.choice(i, size=npar, replace=False).tolist()) if npar else []
        rng.shuffle(parents)
        table = random_table(rng, spaces[i], [spaces[p] for p in parents])
        nodes.append(Node(labels[i], spaces[i], tuple(labels[p] for p in parents), table))
    if shuffle:
        order = rng.permutation(n)
        nodes = [nodes[i] for i in order]
    return QBNet(tuple(nodes), "rand")


def oracle_meta_ket(net: QBNet) -> np.ndarray:
    """Enumerate assignments; multiply raw table entries by explicit index."""
    spaces = [n.space for n in net.nodes]
    pos = {n.label: i for i, n in enumerate(net.nodes)}
    out = []
    for idx in itertools.product(*(range(s.size) for s in spaces)):
        amp = 1 + 0j
        for n in net.nodes:
            key = (idx[pos[n.label]],) + tuple(idx[pos[p]] for p in n.parents)
            amp *= complex(n.table.amps[key])
        out.append(amp)
    return np.array(out)


def oracle_partial_trace(m: np.ndarray, dims, keep) -> np.ndarray:
    """Explicit index loop: sum over traced labels of <b|m|b>."""
    dims = list(dims)
    keep = list(keep)
    kd = [dims[i] for i in keep]
    out = np.zeros((math.prod(kd), math.prod(kd)), dtype=complex)
    all_idx = list(itertools.product(*(range(d) for d in dims)))
    flat = {t: i for i, t in enumerate(all_idx)}
    for r in all_idx:
        for c in all_idx:
            if any(r[i] != c[i] for i in range(len(dims)) if i not in keep):
                continue
            rk = tuple(r[i] for i in keep)
            ck = tuple(c[i] for i in keep)
            ri = int(np.ravel_multi_index(rk, kd)) if kd else 0
            ci = int(np.ravel_multi_index(ck, kd)) if kd else 0
            out[ri, ci] += m[flat[r], flat[c]]
    return out


def random_density(rng, n, rank=None) -> np.ndarray:
    rank = rank or int(rng.integers(1, n + 1))
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_isometry(rng, rows, cols) -> np.ndarray:
    g = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    q, _ = np.linalg.qr(g)
    return q


def random_kraus(rng, max_dim=4, max_outcomes=4) -> KrausSet:
    n_in = int(rng.integers(1, max_dim + 1))
    n_out = int(rng.integers(n_in, max_dim + 1))
    m = int(rng.integers(1, max_outcomes + 1))
    v = random_isometry(rng, m * n_out, n_in)
    ops = tuple(v[mu * n_out:(mu + 1) * n_out, :] for mu in range(m))
    return KrausSet(
        StateSpace.range(m),
        Register("a", StateSpace.range(n_in)),
        Register("b", StateSpace.range(n_out)),
        ops,
    )


def dm(reg_id, m) -> DensityMatrix:
    m = np.asarray(m, dtype=complex)
    return DensityMatrix((Register(reg_id, StateSpace.range(m.shape[0])),), m)
