import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import SQ, dm, oracle_partial_trace, random_density, random_kraus
from qbnet.channels import (
    CLASSICAL_COMM,
    COHERENT_COMM,
    DEPHASING,
    TRACING,
    Ensemble,
    KrausSet,
    Rinno,
    builtin_measurement,
    canonical_ensemble,
    channel_apply,
    complementary_channel,
    extend_measurement_to_unitary,
    is_von_neumann,
    measurement_superop,
    outcome_probabilities,
    purify,
    rinno_from_kraus,
    rinno_probabilities,
    stinespring_apply,
    validate_ensemble,
    validate_kraus,
    validate_rinno,
)
from qbnet.errors import DimensionMismatch, InvalidEnsemble, InvalidKraus, NotDensityMatrix, ZeroProbabilityOutcome
from qbnet.tensorcore import IndexedKet, Register, StateSpace

TWO = StateSpace.range(2)
A = Register("a", TWO)
PLUS = np.full((2, 2), 0.5)
ZERO = np.diag([1.0, 0.0])
DEPH = builtin_measurement(DEPHASING, TWO)
DAMP = KrausSet(TWO, A, A, (np.array([[1, 0], [0, math.sqrt(0.5)]]), np.array([[0, math.sqrt(0.5)], [0, 0]])))


def single(k, n_out=None):
    k = np.asarray(k, dtype=complex)
    out = Register("a", StateSpace.range(k.shape[0])) if n_out is None else n_out
    return KrausSet(StateSpace(("0",)), Register("a", StateSpace.range(k.shape[1])), out, (k,))


def ket(*amps, rid="x"):
    return IndexedKet((Register(rid, StateSpace.range(len(amps))),), amps)


def test_validate_kraus_examples():
    assert validate_kraus(DEPH).ok
    rep = validate_kraus(single(np.eye(2) / 2))
    assert not rep.ok
    assert rep.deviation == pytest.approx(0.75, abs=1e-15)
    assert validate_kraus(DAMP).deviation <= 1e-15


def test_validate_kraus_shapes():
    bad = KrausSet(TWO, A, A, (np.eye(2), np.eye(3)))
    assert not validate_kraus(bad).ok
    short = KrausSet(TWO, A, A, (np.eye(2),))
    assert not validate_kraus(short).ok


def test_measurement_superop_examples():
    out, p = measurement_superop(DEPH, "0", dm("a", PLUS))
    assert p == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(out.matrix, ZERO, atol=1e-15)
    out, p = measurement_superop(DEPH, "0", dm("a", ZERO))
    assert p == 1
    np.testing.assert_array_equal(out.matrix, ZERO)
    with pytest.raises(ZeroProbabilityOutcome):
        measurement_superop(DEPH, "1", dm("a", ZERO))


def test_outcome_probabilities_examples(rng):
    assert outcome_probabilities(DEPH, dm("a", PLUS)) == pytest.approx({"0": 0.5, "1": 0.5}, abs=1e-15)
    assert outcome_probabilities(DEPH, dm("a", ZERO)) == {"0": 1.0, "1": 0.0}
    coh = builtin_measurement(COHERENT_COMM, StateSpace.range(3))
    probs = outcome_probabilities(coh, dm("a", random_density(rng, 3)))
    assert list(probs) == ["0"] and probs["0"] == pytest.approx(1, abs=1e-12)
    with pytest.raises(DimensionMismatch):
        outcome_probabilities(DEPH, dm("a", np.eye(3) / 3))


def test_von_neumann_examples():
    assert is_von_neumann(DEPH)
    assert not is_von_neumann(DAMP)
    assert is_von_neumann(single(np.eye(2)))


def test_builtins():
    np.testing.assert_array_equal(DEPH.operators[0], ZERO)
    np.testing.assert_array_equal(DEPH.operators[1], np.diag([0, 1]))
    tr = builtin_measurement(TRACING, TWO)
    assert [k.tolist() for k in tr.operators] == [[[1, 0]], [[0, 1]]]
    coh = builtin_measurement(COHERENT_COMM, TWO)
    assert len(coh.operators) == 1
    np.testing.assert_array_equal(coh.operators[0], np.eye(2))
    cc = builtin_measurement(CLASSICAL_COMM, TWO)
    assert cc.out_register.id == "b" and cc.in_register.id == "a"
    for kind in (TRACING, DEPHASING, CLASSICAL_COMM, COHERENT_COMM):
        rep = validate_kraus(builtin_measurement(kind, StateSpace.range(3)), tol=0.0)
        assert rep.ok and rep.deviation == 0
    assert validate_kraus(tr).notes
    with pytest.raises(ValueError):
        builtin_measurement("bogus", TWO)


def test_channel_apply_examples(rng):
    np.testing.assert_allclose(channel_apply(DEPH, dm("a", PLUS)).matrix, np.eye(2) / 2, atol=1e-15)
    rho = random_density(rng, 3)
    np.testing.assert_allclose(channel_apply(single(np.eye(3)), dm("a", rho)).matrix, rho, atol=1e-15)
    # K0|1> = sqrt(.5)|1>, K1|1> = sqrt(.5)|0>
    out = channel_apply(DAMP, dm("a", np.diag([0, 1])))
    np.testing.assert_allclose(out.matrix, np.diag([0.5, 0.5]), atol=1e-15)


def test_rinno_examples(rng):
    r = rinno_from_kraus(DEPH)
    np.testing.assert_array_equal(r.elements[0], ZERO)
    rd = rinno_from_kraus(DAMP)
    np.testing.assert_allclose(rd.elements[0], np.diag([1, 0.5]), atol=1e-15)
    np.testing.assert_allclose(rd.elements[1], np.diag([0, 0.5]), atol=1e-15)
    rc = rinno_from_kraus(builtin_measurement(COHERENT_COMM, TWO))
    np.testing.assert_array_equal(rc.elements[0], np.eye(2))
    assert validate_rinno(Rinno(TWO, (np.eye(2) / 2, np.eye(2) / 2))).ok
    assert not validate_rinno(Rinno(TWO, (np.eye(2), np.eye(2)))).ok
    neg = validate_rinno(Rinno(TWO, (np.diag([1.2, 0]), np.diag([-0.2, 1]))))
    assert any("negative" in v for v in neg.violations)
    assert rinno_probabilities(r, dm("a", PLUS)) == pytest.approx({"0": 0.5, "1": 0.5}, abs=1e-15)
    one = Rinno(StateSpace(("0",)), (np.eye(3),))
    assert rinno_probabilities(one, dm("a", random_density(rng, 3)))["0"] == pytest.approx(1, abs=1e-12)
    with pytest.raises(DimensionMismatch):
        rinno_probabilities(r, dm("a", np.eye(3) / 3))


def test_rinno_matches_outcomes(rng):
    for _ in range(30):
        ks = random_kraus(rng)
        r = rinno_from_kraus(ks)
        assert validate_rinno(r, 1e-10).ok
        rho = dm("a", random_density(rng, ks.in_register.size))
        p, q = rinno_probabilities(r, rho), outcome_probabilities(ks, rho)
        assert max(abs(p[k] - q[k]) for k in p) <= 1e-10


def test_dilation_identity():
    du = extend_measurement_to_unitary(single(np.eye(3)))
    np.testing.assert_array_equal(du.matrix, np.eye(3))


def test_dilation_dephasing():
    du = extend_measurement_to_unitary(DEPH)
    u = du.matrix
    assert u.shape == (4, 4)
    assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-10
    blk = du.block()
    for a in range(2):
        for b in range(2):
            for mu in range(2):
                assert blk[b, mu, a, 0] == DEPH.operators[mu][b, a]


def test_dilation_single_input():
    # N_a = 1: K_mu = sqrt(w_mu) |c_mu>, column (b, mu) = sqrt(w_mu) c_mu[b]
    w = np.array([0.2, 0.3, 0.5])
    cols = [np.array([1, 0]), np.array([SQ, SQ]), np.array([0.6, 0.8j])]
    ops = tuple(math.sqrt(wi) * c.reshape(2, 1) for wi, c in zip(w, cols))
    ks = KrausSet(StateSpace.range(3), Register("a", StateSpace.range(1)), Register("b", TWO), ops)
    du = extend_measurement_to_unitary(ks)
    expected = [math.sqrt(w[mu]) * cols[mu][b] for b in range(2) for mu in range(3)]
    np.testing.assert_array_equal(du.matrix[:, 0], expected)
    assert np.max(np.abs(du.matrix.conj().T @ du.matrix - np.eye(6))) <= 1e-10


def test_dilation_rejects():
    with pytest.raises(InvalidKraus):
        extend_measurement_to_unitary(single(np.eye(2) / 2))
    with pytest.raises(InvalidKraus):
        extend_measurement_to_unitary(builtin_measurement(TRACING, TWO))


def test_stinespring_examples(rng):
    du = extend_measurement_to_unitary(DEPH)
    np.testing.assert_allclose(stinespring_apply(du, dm("a", PLUS)).matrix, np.eye(2) / 2, atol=1e-12)
    rho = random_density(rng, 3)
    du = extend_measurement_to_unitary(single(np.eye(3)))
    np.testing.assert_allclose(stinespring_apply(du, dm("a", rho)).matrix, rho, atol=1e-15)
    with pytest.raises(DimensionMismatch):
        stinespring_apply(du, dm("a", PLUS))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stinespring_matches_channel(seed):
    rng = np.random.default_rng(seed)
    ks = random_kraus(rng)
    du = extend_measurement_to_unitary(ks)
    u = du.matrix
    assert np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= 1e-10
    rho = dm("a", random_density(rng, ks.in_register.size))
    diff = stinespring_apply(du, rho).matrix - channel_apply(ks, rho).matrix
    assert np.max(np.abs(diff)) <= 1e-9


def complement_oracle(ks, rho_mu):
    """tr_b[U (|0><0|_A (x) rho_mu) U^dag] with A the embedded first input label."""
    du = extend_measurement_to_unitary(ks)
    nb, nm = ks.out_register.size, ks.outcome_space.size
    proj = np.zeros((nb, nb))
    proj[du.embedding[0], du.embedding[0]] = 1
    full = du.matrix @ np.kron(proj, rho_mu) @ du.matrix.conj().T
    return oracle_partial_trace(full, (nb, nm), keep=[1])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_complementary_channel(seed):
    rng = np.random.default_rng(seed)
    ks = random_kraus(rng)
    comp = complementary_channel(ks)
    assert comp.in_register.id == "mu" and comp.out_register.id == "mu"
    assert comp.completeness_deviation() <= 1e-10
    assert validate_kraus(comp, 1e-10).ok
    rho_mu = random_density(rng, ks.outcome_space.size)
    got = channel_apply(comp, dm("mu", rho_mu)).matrix
    assert np.max(np.abs(got - complement_oracle(ks, rho_mu))) <= 1e-9


def test_complementary_identity_scalars():
    comp = complementary_channel(single(np.eye(3)))
    assert all(k.shape == (1, 1) for k in comp.operators)
    assert sum(abs(k[0, 0]) ** 2 for k in comp.operators) == pytest.approx(1, abs=1e-15)


def test_probabilities_and_conditional_states(rng):
    for _ in range(30):
        ks = random_kraus(rng)
        rho = dm("a", random_density(rng, ks.in_register.size))
        probs = outcome_probabilities(ks, rho)
        assert min(probs.values()) >= -1e-15
        assert abs(sum(probs.values()) - 1) <= 1e-10
        mix = np.zeros((ks.out_register.size,) * 2, dtype=complex)
        for mu, p in probs.items():
            if p > 1e-12:
                state, p2 = measurement_superop(ks, mu, rho)
                assert abs(state.trace() - 1) <= 1e-10
                mix += p2 * state.matrix
        assert np.max(np.abs(mix - channel_apply(ks, rho).matrix)) <= 1e-10


def test_purify_examples():
    e = Ensemble((1.0,), (ket(1, 0),))
    np.testing.assert_array_equal(purify(e).amplitudes, [1, 0])
    e = Ensemble((0.5, 0.5), (ket(1, 0), ket(0, 1)))
    np.testing.assert_allclose(purify(e).amplitudes, [SQ, 0, 0, SQ], atol=1e-16)
    e = Ensemble((0.5, 0.5), (ket(1, 0), ket(SQ, SQ)))
    psi = purify(e)
    assert psi.ids == ("x", "j")
    np.testing.assert_allclose(psi.amplitudes, [SQ, 0.5, 0, 0.5], atol=1e-15)
    back = oracle_partial_trace(np.outer(psi.amplitudes, psi.amplitudes.conj()), (2, 2), keep=[0])
    np.testing.assert_allclose(back, e.density().matrix, atol=1e-12)


def test_ensemble_validation():
    with pytest.raises(InvalidEnsemble):
        validate_ensemble(Ensemble((0.5, 0.4), (ket(1, 0), ket(0, 1))))
    with pytest.raises(InvalidEnsemble):
        validate_ensemble(Ensemble((1.0,), (ket(1, 1),)))
    with pytest.raises(InvalidEnsemble):
        validate_ensemble(Ensemble((1.5, -0.5), (ket(1, 0), ket(0, 1))))
    with pytest.raises(InvalidEnsemble):
        purify(Ensemble((), ()))


def test_canonical_ensemble_examples():
    e = canonical_ensemble(dm("x", ZERO))
    assert e.weights == (1.0,)
    np.testing.assert_array_equal(e.kets[0].amplitudes, [1, 0])
    e = canonical_ensemble(dm("x", np.eye(2) / 2))
    assert e.weights == pytest.approx((0.5, 0.5), abs=1e-15)
    np.testing.assert_allclose(e.density().matrix, np.eye(2) / 2, atol=1e-12)
    e = canonical_ensemble(dm("x", np.diag([0.25, 0.75])))
    assert e.weights == pytest.approx((0.75, 0.25), abs=1e-15)
    np.testing.assert_allclose(np.abs(e.kets[0].amplitudes), [0, 1], atol=1e-15)
    with pytest.raises(NotDensityMatrix):
        canonical_ensemble(dm("x", np.eye(2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_canonical_purify_roundtrip(seed, n):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, n)
    e = canonical_ensemble(dm("x", rho))
    assert list(e.weights) == sorted(e.weights, reverse=True)
    for k in e.kets:
        amps = k.amplitudes
        first = amps[np.flatnonzero(np.abs(amps) > 1e-12)[0]]
        assert first.imag == 0 and first.real >= 0
    psi = purify(e).amplitudes
    back = oracle_partial_trace(np.outer(psi, psi.conj()), (n, len(e.kets)), keep=[0])
    assert np.max(np.abs(back - rho)) <= 1e-9
