import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from nvqr import qstate
from nvqr.layout import Protocol
from nvqr.pauli_engine import Tally
from nvqr.protocols import (
    RepeaterConfig, SystemParams, build_schedule, decode, elementary_link_state,
    evaluate, mediated_bsm_instrument, remote_cnot_encode, run_chain,
)
from nvqr.protocols import analytic, dense
from nvqr.protocols.decode import FinalStateSummary, tally_from_distribution
from nvqr.qstate import DensityMatrix, QubitLabel

NOMINAL = SystemParams(beta=1e-3, eta_c=0.3, L_tot=100)
NOISY = SystemParams(beta=5e-3, delta=1e-3, eta_c=0.5, L_tot=200, tau_n=0.5)


def pairs(m, F0=1.0, beta=0.0, delta=0.0):
    A, B = dense.bank(0, m), dense.bank(1, m)
    return [elementary_link_state(F0, beta, delta, (A[i], B[i])) for i in range(m)]


# -- circuit pinning ------------------------------------------------------------


def test_noiseless_link_is_bell_pair():
    rho = elementary_link_state(1.0, 0.0, 0.0)
    assert qstate.fidelity(rho, qstate.bell_vector()) == pytest.approx(1, abs=1e-12)


def test_link_fidelity_drops_with_noise():
    clean = elementary_link_state(0.95, 0.0, 0.0)
    noisy = elementary_link_state(0.95, 1e-2, 1e-2)
    f_clean = qstate.fidelity(clean, qstate.bell_vector())
    assert f_clean == pytest.approx(0.95)
    assert qstate.fidelity(noisy, qstate.bell_vector()) < f_clean


def test_noiseless_encoding_gives_encoded_pair():
    rho = remote_cnot_encode(pairs(3), 0.0, 0.0)
    assert qstate.fidelity(rho, qstate.encoded_bell_vector()) >= 1 - 1e-10


def test_encoding_needs_three_pairs():
    with pytest.raises(ValueError):
        remote_cnot_encode(pairs(2), 0.0, 0.0)


@pytest.mark.parametrize("m", [1, 3])
def test_noiseless_swap_preserves_fidelity(m):
    link = pairs(1)[0] if m == 1 else remote_cnot_encode(pairs(3), 0.0, 0.0)
    target = qstate.bell_vector() if m == 1 else qstate.encoded_bell_vector()
    out, acc = dense.swap_links(link, link, mediated_bsm_instrument(0.0, 0.0), m)
    assert acc == pytest.approx(1)
    assert qstate.fidelity(out, target) == pytest.approx(1, abs=1e-10)


def test_instrument_is_bell_measurement_when_noiseless():
    inst = mediated_bsm_instrument(0.0, 0.0)
    assert len(inst) == 4
    for (p, f), effect in inst.outcomes.items():
        # each outcome projects onto one Bell state
        assert np.linalg.matrix_rank(effect, tol=1e-9) == 1
        assert np.trace(effect).real == pytest.approx(1)


@pytest.mark.parametrize("protocol", list(Protocol))
@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("engine", ["dense", "approx-analytic", "pauli"])
def test_noiseless_chains_are_error_free(protocol, n, engine):
    prm = SystemParams.noiseless(eta_c=0.3, L_tot=100)
    res = evaluate(RepeaterConfig(protocol, n, engine, "majority", samples=2000, seed=1), prm)
    assert res.decoded.Q_z == pytest.approx(0, abs=1e-10)
    assert res.decoded.Q_x == pytest.approx(0, abs=1e-10)
    assert res.decoded.acceptance == pytest.approx(1)


# -- engine equivalence ---------------------------------------------------------


@pytest.mark.parametrize("params", [NOMINAL, NOISY], ids=["nominal", "noisy"])
@pytest.mark.parametrize("protocol,n", [("P1", 1), ("P2", 1), ("P2", 2), ("P3", 1),
                                        ("P3", 3), ("P4", 1), ("P4", 3)])
def test_dense_and_class_engines_agree(params, protocol, n):
    sched = build_schedule(protocol, n, params)
    d = dense.run_dense(sched).tally
    a = analytic.run_analytic(sched).tally
    for field in ("accept", "accept_z", "z_err", "z_err_detect", "x_err"):
        assert getattr(a, field) == pytest.approx(getattr(d, field), abs=1e-9)


@given(st.floats(0, 2e-2), st.floats(0, 2e-3), st.floats(0.05, 2.0))
@settings(max_examples=8)
def test_engines_agree_on_random_parameters(beta, delta, tau_n):
    prm = SystemParams(beta=beta, delta=delta, tau_n=tau_n, eta_c=0.4, L_tot=150)
    sched = build_schedule("P2", 2, prm)
    d = dense.run_dense(sched).tally
    a = analytic.run_analytic(sched).tally
    assert a.z_err == pytest.approx(d.z_err, abs=1e-9)
    assert a.x_err == pytest.approx(d.x_err, abs=1e-9)
    assert a.accept == pytest.approx(d.accept, abs=1e-9)


@pytest.mark.parametrize("protocol,n,decoder", [("P1", 2, "error-detect"), ("P2", 2, "majority"),
                                                ("P4", 2, "majority")])
def test_monte_carlo_matches_class_engine(protocol, n, decoder):
    cfg = RepeaterConfig(protocol, n, "pauli", decoder, samples=40_000, seed=9)
    mc = evaluate(cfg, NOISY).decoded
    ex = evaluate(RepeaterConfig(protocol, n, "approx-analytic", decoder), NOISY).decoded
    assert abs(mc.Q_z - ex.Q_z) <= 4 * mc.stderr_z + 1e-12
    assert abs(mc.Q_x - ex.Q_x) <= 4 * mc.stderr_x + 1e-12
    assert abs(mc.acceptance - ex.acceptance) <= 4 * mc.stderr_acceptance + 1e-12


# -- physical trends ------------------------------------------------------------


@pytest.mark.parametrize("protocol", list(Protocol))
def test_errors_grow_with_gate_noise(protocol):
    q = [evaluate(RepeaterConfig(protocol, 2), NOMINAL.with_(beta=b)).decoded for b in (1e-4, 1e-3, 1e-2)]
    assert q[0].Q_x < q[1].Q_x < q[2].Q_x
    assert q[0].Q_z <= q[1].Q_z <= q[2].Q_z


@pytest.mark.parametrize("protocol", list(Protocol))
def test_errors_shrink_with_coherence(protocol):
    short = evaluate(RepeaterConfig(protocol, 2), NOMINAL.with_(tau_n=0.2)).decoded
    long = evaluate(RepeaterConfig(protocol, 2), NOMINAL.with_(tau_n=5.0)).decoded
    assert long.Q_x < short.Q_x


def test_unencoded_chains_never_reject():
    for protocol in ("P3", "P4"):
        res = evaluate(RepeaterConfig(protocol, 3, decoder="error-detect"), NOISY).decoded
        assert res.acceptance == 1 and res.decoder == "error-detect"


def test_encoded_chains_reject_some_rounds():
    res = evaluate(RepeaterConfig("P1", 2, decoder="majority"), NOISY).decoded
    assert 0 < res.acceptance < 1


def test_unencoded_chain_is_symmetric_under_end_exchange():
    rho = dense.run_dense(build_schedule("P3", 2, NOISY)).payload
    swapped = rho.reorder(rho.labels[1:] + rho.labels[:1])
    assert np.max(np.abs(swapped.data - rho.data)) < 1e-12


def test_swap_acceptance_compounds_over_tree():
    sched = build_schedule("P1", 2, NOISY)
    link = analytic.link_classes(sched)
    r = analytic.bsm_outcome_noise(sched.mediator_fidelity, sched.beta, sched.delta)
    p1, a1 = analytic.swap_classes(link, link, r, 3)
    _, a2 = analytic.swap_classes(p1, p1, r, 3)
    _, acc = analytic.chain_classes(sched)
    # two swaps at the first level and one at the second
    assert acc == pytest.approx(a1**2 * a2)


def test_schedule_read_out_errors():
    for protocol in Protocol:
        s = build_schedule(protocol, 2, NOMINAL)
        assert s.alice_flip == pytest.approx(1.1e-3)
        assert s.bob_flip == pytest.approx(1e-4 if protocol.remote_mediator else 1.1e-3)
        assert s.mediator_fidelity == (s.F0 if protocol.remote_mediator else 1.0)
        assert s.m == (3 if protocol.encoded else 1)


# -- decoders --------------------------------------------------------------------


def _perfect(m):
    pz = np.zeros((2**m, 2**m))
    pz[0, 0] = pz[-1, -1] = 0.5
    return pz


def test_decoders_on_perfect_correlation():
    t = tally_from_distribution(_perfect(3), 0.0, 1.0, 3)
    for dec in ("majority", "error-detect"):
        res = decode(FinalStateSummary(t, 3, "test", True), dec)
        assert (res.Q_z, res.Q_x, res.acceptance) == (0, 0, 1)


def test_single_flip_is_corrected_or_rejected():
    pz = np.zeros((8, 8))
    pz[0b000, 0b001] = 0.5
    pz[0b111, 0b111] = 0.5
    t = tally_from_distribution(pz, 0.0, 1.0, 3)
    maj = decode(FinalStateSummary(t, 3, "test", True), "majority")
    det = decode(FinalStateSummary(t, 3, "test", True), "error-detect")
    assert maj.Q_z == 0 and maj.acceptance == 1
    assert det.Q_z == 0 and det.acceptance == pytest.approx(0.5)


def test_double_flip_fools_majority_but_not_detection():
    pz = np.zeros((8, 8))
    pz[0b000, 0b011] = 0.2
    pz[0b000, 0b000] = 0.3
    pz[0b111, 0b111] = 0.5
    t = tally_from_distribution(pz, 0.0, 0.9, 3)
    maj = decode(FinalStateSummary(t, 3, "test", True), "majority")
    det = decode(FinalStateSummary(t, 3, "test", True), "error-detect")
    assert maj.Q_z == pytest.approx(0.2) and maj.acceptance == pytest.approx(0.9)
    assert det.Q_z == 0 and det.acceptance == pytest.approx(0.9 * 0.8)


def test_best_of_both_picks_more_secret_bits():
    from nvqr.qkd import secret_fraction
    pz = np.zeros((8, 8))
    pz[0b000, 0b011] = 0.04
    pz[0b000, 0b000] = 0.46
    pz[0b111, 0b111] = 0.5
    final = FinalStateSummary(tally_from_distribution(pz, 0.01, 1.0, 3), 3, "test", True)
    best = decode(final, "best-of-both")
    scores = {d: (r := decode(final, d)).acceptance * secret_fraction(r.Q_z, r.Q_x)
              for d in ("majority", "error-detect")}
    assert best.decoder == max(scores, key=scores.get)
    assert best.decoder == "error-detect"


def test_best_of_both_on_single_qubit_banks_is_majority():
    final = FinalStateSummary(tally_from_distribution(_perfect(1), 0.05, 1.0, 1), 1, "test", True)
    assert decode(final).decoder == "majority"
    with pytest.raises(ValueError):
        decode(final, "vote")


def test_config_validation():
    with pytest.raises(ValueError):
        RepeaterConfig("P1", 0)
    with pytest.raises(ValueError):
        RepeaterConfig("P1", 1, engine="tensor")
    with pytest.raises(ValueError):
        RepeaterConfig("P1", 1, decoder="vote")
    with pytest.raises(ValueError):
        RepeaterConfig("P1", 1, samples=0)
    with pytest.raises(ValueError):
        SystemParams(beta=0.4, delta=0.2)
    with pytest.raises(ValueError):
        SystemParams(eta_c=-0.1)


def test_run_chain_reports_engine():
    final = run_chain(RepeaterConfig("P3", 1, "pauli", samples=100, seed=0), NOMINAL)
    assert final.engine == "pauli" and not final.exact
    assert final.tally.total == 100
