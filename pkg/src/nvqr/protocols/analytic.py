"""Exact Pauli-class propagation through the chain.

Every stage is Clifford with Pauli noise, so the end-to-end state is a
mixture of Pauli errors on the ideal (encoded) Bell pair, and the decoders
only need the distribution of error classes

    p[xA, xB, z]

where ``xA`` / ``xB`` are the X-error patterns on Alice's and Bob's banks
(``m`` bits each, first qubit most significant) and ``z`` is the parity of
all Z errors. Small gadgets (one link, one encoding position, one Bell
measurement, one teleport hop) are enumerated exactly with the Pauli
engine; swapping identical links is then an exact convolution, so the cost
is independent of the chain length.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .. import noise
from ..pauli_engine import enumerate_frame
from . import circuits
from .circuits import CircuitBuilder
from .config import Schedule
from .decode import FinalStateSummary, apply_bit_flips, parity_flip_probability, tally_from_distribution


@lru_cache(maxsize=256)
def position_classes(F0: float, beta: float, delta: float, link_fidelity: float,
                     pre_swap: float | None, encoded: bool) -> np.ndarray:
    """Class distribution ``q[xA, xB, z]`` of one code position (shape 2x2x2).

    For physical links ``pre_swap`` is the two-qubit block fidelity applied
    before swapping; encoded positions get their six-qubit map later.
    """
    b = CircuitBuilder()
    NA, NB = b.alloc(1), b.alloc(1)
    circuits.link_transfer(b, NA, NB, F0, beta, delta, "link")
    b.noise("pair", link_fidelity, NA, NB)
    if encoded:
        circuits.encode(b, NA, NB, beta, delta, "enc")
    elif pre_swap is not None:
        b.noise("pair", pre_swap, NA, NB)
    frame = enumerate_frame(b.spec())
    q = np.zeros((2, 2, 2))
    a, bb = NA[0], NB[0]
    np.add.at(q, (frame.x[a].astype(int), frame.x[bb].astype(int),
                  (frame.z[a] ^ frame.z[bb]).astype(int)), frame.weights)
    return q


def combine_positions(q: np.ndarray, m: int) -> np.ndarray:
    """Joint classes of ``m`` independent positions, shape ``(2**m, 2**m, 2)``."""
    out = q
    for _ in range(m - 1):
        # out[xa, xb, z] x q[ya, yb, w] -> [(xa,ya), (xb,yb), z^w]
        t = np.einsum("abz,cdw->acbdzw", out, q)
        da, db = t.shape[0] * t.shape[1], t.shape[2] * t.shape[3]
        t = t.reshape(da, db, 2, 2)
        out = np.stack([t[..., 0, 0] + t[..., 1, 1], t[..., 0, 1] + t[..., 1, 0]], axis=-1)
    return out


def mix_uniform(p: np.ndarray, fidelity: float, d: int) -> np.ndarray:
    """Block depolarisation: with the mixing probability every class is equally likely."""
    mix = noise.block_depolarizing_probability(fidelity, d)
    return (1 - mix) * p + mix * p.sum() / p.size


@lru_cache(maxsize=256)
def bsm_outcome_noise(mediator_fidelity: float, beta: float, delta: float) -> np.ndarray:
    """Distribution ``r[ep, ef]`` of outcome deviations of one mediated Bell measurement."""
    b = CircuitBuilder()
    J, K = b.alloc(1), b.alloc(1)
    circuits.bsm(b, J, K, mediator_fidelity, beta, delta, "s")
    frame = enumerate_frame(b.spec())
    rec = frame.records
    ep = (rec["s/pj"][0] ^ rec["s/pk"][0]).astype(int)
    ef = (rec["s/fJ"][0] ^ rec["s/fK"][0]).astype(int)
    r = np.zeros((2, 2))
    np.add.at(r, (ep, ef), frame.weights)
    return r


@lru_cache(maxsize=256)
def teleport_noise(mediator_fidelity: float, beta: float, delta: float) -> np.ndarray:
    """Distribution ``t[x, z]`` of the Pauli error a teleport hop adds."""
    b = CircuitBuilder()
    J = b.alloc(1)
    k = circuits.teleport(b, J, mediator_fidelity, beta, delta, "hop")
    frame = enumerate_frame(b.spec())
    t = np.zeros((2, 2))
    np.add.at(t, (frame.x[k[0]].astype(int), frame.z[k[0]].astype(int)), frame.weights)
    return t


def _pattern_noise(r: np.ndarray, m: int) -> np.ndarray:
    """Per-position ``r[x, z]`` noise as ``R[x pattern, z parity]``."""
    q = np.zeros((1, 2, 2))
    q[0] = r
    return combine_positions(q, m)[0] if m > 1 else r


def swap_classes(left: np.ndarray, right: np.ndarray, outcome_noise: np.ndarray, m: int):
    """Class distribution after swapping two links, and the acceptance.

    The parity outcome deviations ``xB ^ xC ^ ep`` must be all-equal; they
    then equal the X correction pattern, so Bob's pattern becomes
    ``xD ^ dp``. The phase parity of the output is ``zL ^ zR ^ ef``.
    """
    dim = 2**m
    full = dim - 1
    R = _pattern_noise(outcome_noise, m)
    out = np.zeros((dim, dim, 2))
    xD = np.arange(dim)
    for xB in range(dim):
        for xC in range(dim):
            for ep in range(dim):
                dp = xB ^ xC ^ ep
                if dp not in (0, full):
                    continue
                # sum over z-parities: zL ^ zR ^ ef
                lz = left[:, xB, :]          # [xA, zL]
                rz = right[xC, :, :]         # [xD, zR]
                w = R[ep]                    # [ef]
                comb = np.einsum("az,dw,f->adzwf", lz, rz, w)
                par = np.zeros((dim, dim, 2))
                for zl in (0, 1):
                    for zr in (0, 1):
                        for ef in (0, 1):
                            par[:, :, zl ^ zr ^ ef] += comb[:, :, zl, zr, ef]
                out[:, xD ^ dp, :] += par
    acc = float(out.sum())
    return out / acc, acc


def hop_classes(p: np.ndarray, hop: np.ndarray, m: int) -> np.ndarray:
    """Apply an independent teleport hop to every qubit of Bob's bank."""
    T = _pattern_noise(hop, m)  # [x pattern, z parity]
    dim = 2**m
    out = np.zeros_like(p)
    for xb in range(dim):
        for e in range(dim):
            for z in (0, 1):
                for w in (0, 1):
                    out[:, xb ^ e, z ^ w] += p[:, xb, z] * T[e, w]
    return out


def link_classes(schedule: Schedule) -> np.ndarray:
    m = schedule.m
    if m == 1:
        return position_classes(schedule.F0, schedule.beta, schedule.delta,
                                schedule.link_fidelity, schedule.pre_swap_fidelity, False)
    q = position_classes(schedule.F0, schedule.beta, schedule.delta,
                         schedule.link_fidelity, None, True)
    return mix_uniform(combine_positions(q, m), schedule.pre_swap_fidelity, 64)


def chain_classes(schedule: Schedule) -> tuple[np.ndarray, float]:
    """End-to-end class distribution and swap acceptance."""
    m = schedule.m
    protocol = schedule.protocol
    p = link_classes(schedule)
    r = bsm_outcome_noise(schedule.mediator_fidelity, schedule.beta, schedule.delta)
    acceptance = 1.0
    levels = schedule.n - (1 if protocol.remote_mediator else 0)
    for level in range(levels):
        p, acc = swap_classes(p, p, r, m)
        # every swap of this tree level must pass independently
        acceptance *= acc ** (2 ** (levels - 1 - level))
    if protocol.remote_mediator:
        p = hop_classes(p, teleport_noise(schedule.mediator_fidelity, schedule.beta, schedule.delta), m)
    return p, acceptance


def class_outcome_distributions(p: np.ndarray, m: int, alice_flip: float, bob_flip: float):
    """Z-outcome distribution ``pz[a, b]`` and X-parity error from the classes."""
    pz = p.sum(axis=2).reshape((2,) * (2 * m))
    pz = apply_bit_flips(pz, [alice_flip] * m + [bob_flip] * m).reshape(2**m, 2**m)
    z1 = float(p[..., 1].sum() / p.sum())
    e = parity_flip_probability([alice_flip] * m + [bob_flip] * m)
    return pz, z1 * (1 - e) + (1 - z1) * e


def run_analytic(schedule: Schedule) -> FinalStateSummary:
    p, acc = chain_classes(schedule)
    pz, x_err = class_outcome_distributions(p, schedule.m, schedule.alice_flip, schedule.bob_flip)
    tally = tally_from_distribution(pz, x_err, acc, schedule.m)
    return FinalStateSummary(tally, schedule.m, "approx-analytic", True, p)
