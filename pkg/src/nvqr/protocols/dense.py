"""Dense density-matrix pipelines.

Registers are kept small by compiling every measurement-and-correct
sequence into a channel or instrument on the qubits that survive it:

* the elementary link is built on four qubits and leaves a nuclear pair;
* the mediated Bell measurement becomes a four-outcome instrument on the
  two nuclear spins it consumes;
* the final hop of remote-mediator chains becomes a one-qubit channel.

With identical links, a chain of ``2**k`` links is built by swapping two
copies of the ``2**(k-1)`` chain, so the largest register is two banks of
two ends each (12 qubits for the repetition code).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .. import noise, qstate
from ..qstate import DensityMatrix, MeasurementInstrument, QubitLabel
from .config import Schedule
from .decode import FinalStateSummary, apply_bit_flips, parity_flip_probability, tally_from_distribution

def bank(node: int, m: int, spin: str = "n") -> tuple[QubitLabel, ...]:
    return tuple(QubitLabel(node, i, spin) for i in range(m))


def _sum_states(labels, parts) -> DensityMatrix:
    return DensityMatrix(labels, sum(parts))


def _mix_branches(branches, correct) -> DensityMatrix:
    """``sum_k p_k C_k(rho_k)`` for measurement branches and a correction rule."""
    parts = []
    labels = None
    for outcome, prob, state in branches:
        state = correct(outcome, state)
        labels = state.labels
        parts.append(prob * state.data)
    return _sum_states(labels, parts)


def elementary_link_state(F0: float, beta: float, delta: float,
                          labels=(QubitLabel(0, 0, "n"), QubitLabel(1, 0, "n"))) -> DensityMatrix:
    """Nuclear Bell pair obtained by transferring a Werner electron pair.

    Each electron controls a noisy CNOT onto its nuclear spin (prepared in
    ``|0>``) and is then read out in the X basis; the parity of the two
    outcomes decides a Z correction on the first nuclear spin.
    """
    A, B = labels
    a, b = QubitLabel(A.node, A.nv_index, "e"), QubitLabel(B.node, B.nv_index, "e")
    rho = qstate.tensor(qstate.werner((a, b), F0), DensityMatrix.basis((A, B), "00"))
    rho = qstate.apply_cnot_noisy(rho, a, A, beta)
    rho = qstate.apply_cnot_noisy(rho, b, B, beta)
    parts = []
    for sa, pa, ra in qstate.measure_noisy(rho, a, "X", delta):
        for sb, pb, rb in qstate.measure_noisy(ra, b, "X", delta):
            if sa ^ sb:
                rb = qstate.apply_unitary(rb, qstate.Z, [A])
            parts.append(pa * pb * rb.data)
    return _sum_states((A, B), parts)


def decohered_link(schedule: Schedule, labels=None) -> DensityMatrix:
    """Elementary nuclear pair after waiting for the other links (T1)."""
    labels = labels or (QubitLabel(0, 0, "n"), QubitLabel(1, 0, "n"))
    rho = elementary_link_state(schedule.F0, schedule.beta, schedule.delta, labels)
    return noise.depolarize_pair_approx(rho, labels, schedule.link_fidelity)


def remote_cnot_encode(pairs, beta: float, delta: float, link_fidelity: float = 1.0) -> DensityMatrix:
    """Turn three nuclear Bell pairs into the encoded pair ``|000,000> + |111,111>``.

    Circuit (a fan-out teleportation): three electrons at node A start in
    ``(|000> + |111>)/sqrt(2)``. Each nuclear spin ``A_i`` controls a noisy
    CNOT onto electron ``a_i``, which is then measured in Z; outcome ``m_i``
    triggers X on both ``A_i`` and ``B_i``. Only electrons are measured and
    the encoded pair ends on the nuclear spins. The ``|000>`` codeword that
    the logical CNOT targets at node B is absorbed into the B spins, so no
    electron measurement is needed there.

    ``pairs`` are three two-qubit states labelled ``(A_i, B_i)``; each first
    receives the two-qubit block map with ``link_fidelity``.
    """
    pairs = list(pairs)
    if len(pairs) != 3:
        raise ValueError("the repetition code needs exactly three pairs")
    A = [p.labels[0] for p in pairs]
    B = [p.labels[1] for p in pairs]
    pairs = [noise.depolarize_pair_approx(p, p.labels, link_fidelity) for p in pairs]
    elec = [QubitLabel(lab.node, lab.nv_index, "e") for lab in A]
    rho = qstate.tensor(DensityMatrix.from_pure(elec, qstate.ghz_vector(3)), qstate.tensor_all(*pairs))
    for Ai, Bi, ai in zip(A, B, elec):
        rho = qstate.apply_cnot_noisy(rho, Ai, ai, beta)

        def correct(m, state, Ai=Ai, Bi=Bi):
            return qstate.apply_unitary(state, qstate.pauli_string("XX"), [Ai, Bi]) if m else state

        rho = _mix_branches(qstate.measure_noisy(rho, ai, "Z", delta), correct)
    return rho.reorder(A + B)


def _choi_register(nqubits: int):
    """Reference qubits maximally entangled with the spins to be consumed."""
    refs = [f"R{i}" for i in range(nqubits)]
    spins = [f"S{i}" for i in range(nqubits)]
    parts = [DensityMatrix.from_pure((r, s), qstate.bell_vector()) for r, s in zip(refs, spins)]
    return refs, spins, qstate.tensor_all(*parts)


@lru_cache(maxsize=64)
def mediated_bsm_instrument(beta: float, delta: float, mediator_fidelity: float = 1.0) -> MeasurementInstrument:
    """Four-outcome instrument on two nuclear spins ``(J, K)`` realising a Bell measurement.

    An electron pair ``(j, k)`` in the Werner state of ``mediator_fidelity``
    mediates: noisy CNOT ``J -> j`` and ``K -> k``, Z read-out of both
    electrons (flip ``delta``) and X read-out of both nuclear spins (flip
    ``beta + delta``). The outcome ``(p, f)`` is the XOR of the two Z bits and
    of the two X bits; the partner of ``K`` must then receive ``X^p Z^f``.
    The instrument is compiled on a reference register: its effect for
    outcome ``c`` is ``4 rho_R(c)^T``.
    """
    refs, (J, K), rho = _choi_register(2)
    rho = qstate.tensor(rho, qstate.werner(("j", "k"), mediator_fidelity))
    rho = qstate.apply_cnot_noisy(rho, J, "j", beta)
    rho = qstate.apply_cnot_noisy(rho, K, "k", beta)
    nuc = beta + delta
    branches = {(0, 0): 0, (0, 1): 0, (1, 0): 0, (1, 1): 0}
    for pj, w1, r1 in qstate.measure_noisy(rho, "j", "Z", delta):
        for pk, w2, r2 in qstate.measure_noisy(r1, "k", "Z", delta):
            for fJ, w3, r3 in qstate.measure_noisy(r2, J, "X", nuc):
                for fK, w4, r4 in qstate.measure_noisy(r3, K, "X", nuc):
                    branches[(pj ^ pk, fJ ^ fK)] = branches[(pj ^ pk, fJ ^ fK)] + w1 * w2 * w3 * w4 * r4.data
    effects = {c: 4 * np.asarray(v).T for c, v in branches.items() if not np.isscalar(v)}
    return MeasurementInstrument(("J", "K"), effects)


@lru_cache(maxsize=64)
def teleport_kraus(beta: float, delta: float, mediator_fidelity: float) -> tuple[np.ndarray, ...]:
    """Kraus operators of the hop from a nuclear spin onto a remote electron.

    A local Bell measurement between the nuclear spin ``J`` and electron
    ``j`` (same sequence as the mediated measurement) teleports ``J`` onto
    the electron ``k`` paired with ``j``; ``k`` is corrected with ``X^p Z^f``.
    """
    refs, (J,), rho = _choi_register(1)
    rho = qstate.tensor(rho, qstate.werner(("j", "k"), mediator_fidelity))
    rho = qstate.apply_cnot_noisy(rho, J, "j", beta)
    parts = []
    for p, w1, r1 in qstate.measure_noisy(rho, "j", "Z", delta):
        for f, w2, r2 in qstate.measure_noisy(r1, J, "X", beta + delta):
            if p:
                r2 = qstate.apply_unitary(r2, qstate.X, ["k"])
            if f:
                r2 = qstate.apply_unitary(r2, qstate.Z, ["k"])
            parts.append(w1 * w2 * r2.data)
    choi = 2 * sum(parts)  # rows/cols ordered (R, k)
    vals, vecs = np.linalg.eigh(choi)
    return tuple(
        np.sqrt(v) * vecs[:, i].reshape(2, 2).T for i, v in enumerate(vals) if v > 1e-14
    )


def swap_links(left: DensityMatrix, right: DensityMatrix, instrument: MeasurementInstrument,
               m: int) -> tuple[DensityMatrix, float]:
    """Swap two identical-layout links ``(A bank, B bank)`` at the B/A junction.

    Returns the post-selected end-to-end state on (left A bank, right B bank)
    and the acceptance probability. For ``m = 3`` the three parity outcomes
    must agree; the common value ``c`` and the phase parity ``F`` select the
    logical correction ``X^c`` on all of the far bank and ``Z^F`` on one of
    its qubits.
    """
    A, B = left.labels[:m], left.labels[m:]
    C = tuple(QubitLabel(l.node + 1000, l.nv_index, l.spin) for l in right.labels[:m])
    D = tuple(QubitLabel(l.node + 1000, l.nv_index, l.spin) for l in right.labels[m:])
    right = right.relabel(dict(zip(right.labels, C + D)))
    states = {(None, 0): qstate.tensor(left, right).data}
    labels = A + B + C + D
    for i in range(m):
        nxt: dict = {}
        inst = instrument.relabel((B[i], C[i]))
        for (c, F), data in states.items():
            rho = DensityMatrix(labels, data, check=False)
            for (p, f), prob, raw in inst.branches(rho, normalize=False):
                if c is not None and p != c:
                    continue
                key = (p, F ^ f)
                nxt[key] = nxt.get(key, 0) + raw
        labels = tuple(l for l in labels if l not in (B[i], C[i]))
        states = nxt
    parts = []
    for (c, F), data in states.items():
        rho = DensityMatrix(labels, data, check=False)
        if c:
            rho = qstate.apply_unitary(rho, qstate.pauli_string("X" * m), list(D))
        if F:
            rho = qstate.apply_unitary(rho, qstate.Z, [D[0]])
        parts.append(rho.data)
    total = sum(parts)
    acc = float(np.real(np.trace(total)))
    out = DensityMatrix(labels, total / acc)
    out = out.relabel(dict(zip(D, B)))
    return out, acc


def link_state(schedule: Schedule) -> DensityMatrix:
    """Memory link right before swapping: physical or encoded, after all waiting."""
    m = schedule.m
    A, B = bank(0, m), bank(1, m)
    if m == 1:
        rho = decohered_link(schedule, (A[0], B[0]))
        return noise.depolarize_pair_approx(rho, A + B, schedule.pre_swap_fidelity)
    pairs = [
        elementary_link_state(schedule.F0, schedule.beta, schedule.delta, (A[i], B[i]))
        for i in range(m)
    ]
    rho = remote_cnot_encode(pairs, schedule.beta, schedule.delta, schedule.link_fidelity)
    return noise.depolarize_encoded_approx(rho, A + B, schedule.pre_swap_fidelity)


def chain_state(schedule: Schedule) -> tuple[DensityMatrix, float]:
    """End-to-end state over (Alice bank, Bob bank) and the overall swap acceptance."""
    m = schedule.m
    protocol = schedule.protocol
    levels = schedule.n - (1 if protocol.remote_mediator else 0)
    inst = mediated_bsm_instrument(schedule.beta, schedule.delta, schedule.mediator_fidelity)
    rho = link_state(schedule)
    acceptance = 1.0
    for level in range(levels):
        rho, acc = swap_links(rho, rho, inst, m)
        # every swap of this tree level must pass independently
        acceptance *= acc ** (2 ** (levels - 1 - level))
    if protocol.remote_mediator:
        kraus = teleport_kraus(schedule.beta, schedule.delta, schedule.mediator_fidelity)
        for lab in rho.labels[m:]:
            rho = qstate.apply_kraus(rho, kraus, [lab])
    return rho, acceptance


def dense_outcome_distributions(rho: DensityMatrix, m: int, alice_flip: float, bob_flip: float):
    """Z-outcome distribution ``p[a, b]`` and the X-parity error probability."""
    k = 2 * m
    flips = [alice_flip] * m + [bob_flip] * m
    pz = np.real(np.diag(rho.data)).reshape((2,) * k)
    pz = apply_bit_flips(pz, flips)
    rot = rho
    for lab in rho.labels:
        rot = qstate.apply_unitary(rot, qstate.H, [lab])
    px = np.real(np.diag(rot.data)).reshape((2,) * k)
    parity = np.indices(px.shape).sum(axis=0) % 2
    x_err = float(px[parity == 1].sum())
    e = parity_flip_probability(flips)
    x_err = x_err * (1 - e) + (1 - x_err) * e
    return pz.reshape(2**m, 2**m), x_err


def run_dense(schedule: Schedule) -> FinalStateSummary:
    rho, acc = chain_state(schedule)
    pz, x_err = dense_outcome_distributions(rho, schedule.m, schedule.alice_flip, schedule.bob_flip)
    tally = tally_from_distribution(pz, x_err, acc, schedule.m)
    return FinalStateSummary(tally, schedule.m, "dense", True, rho)
