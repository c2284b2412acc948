"""Logical read-out of the end-to-end state and the two decoders.

Both end users measure every physical qubit of their bank in one basis.
For a three-qubit bank the logical Z bit is the majority of the Z outcomes
and the logical X bit is the parity of the X outcomes. The error-detecting
decoder additionally drops Z rounds in which a bank's outcomes disagree.
Single-qubit banks compare raw outcomes.

Every engine reduces its end state to a :class:`~nvqr.pauli_engine.Tally`
(exact probabilities or sample counts), and the decoders read the error
rates off that tally.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..pauli_engine import Tally, qber_from_tally

_MAJ_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _bank_tables(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Majority bit and consistency flag of every ``m``-bit pattern (MSB first)."""
    if m not in _MAJ_CACHE:
        pats = np.array(list(itertools.product((0, 1), repeat=m)))
        maj = pats.sum(axis=1) * 2 > m
        consistent = (pats.min(axis=1) == pats.max(axis=1))
        _MAJ_CACHE[m] = (maj, consistent)
    return _MAJ_CACHE[m]


def apply_bit_flips(p: np.ndarray, flips) -> np.ndarray:
    """Pass a distribution over bit strings (one axis per bit) through flips."""
    p = np.asarray(p, dtype=float)
    for axis, e in enumerate(flips):
        if e:
            p = (1 - e) * p + e * np.flip(p, axis=axis)
    return p


def parity_flip_probability(flips) -> float:
    """Probability that an odd number of independent flips occur."""
    prod = 1.0
    for e in flips:
        prod *= 1 - 2 * e
    return (1 - prod) / 2


def tally_from_distribution(pz: np.ndarray, x_err: float, swap_acceptance: float, m: int) -> Tally:
    """Exact tally from the Z-outcome distribution ``pz[a, b]`` and the X error.

    ``pz`` is indexed by the Alice and Bob ``m``-bit patterns and already
    includes read-out flips; it is conditional on swap acceptance.
    """
    pz = np.asarray(pz, dtype=float).reshape(2**m, 2**m)
    pz = pz / pz.sum()
    maj, consistent = _bank_tables(m)
    discord = maj[:, None] != maj[None, :]
    both = consistent[:, None] & consistent[None, :]
    # rounding in the swap normalisation can overshoot 1 by a few ulp
    a = min(max(float(swap_acceptance), 0.0), 1.0)
    return Tally(
        total=1.0,
        accept=a,
        accept_z=a * float(pz[both].sum()),
        z_err=a * float(pz[discord].sum()),
        z_err_detect=a * float(pz[discord & both].sum()),
        x_err=a * float(x_err),
    )


@dataclass(frozen=True)
class FinalStateSummary:
    """End-to-end result of one chain before decoding.

    ``payload`` keeps the engine's raw end state (density matrix, class
    distribution) for inspection; decoding only needs ``tally``.
    """

    tally: Tally
    m: int
    engine: str
    exact: bool
    payload: Any = None


@dataclass(frozen=True)
class DecodeResult:
    Q_z: float
    Q_x: float
    acceptance: float
    swap_acceptance: float
    decoder: str
    stderr_z: float = 0.0
    stderr_x: float = 0.0
    stderr_acceptance: float = 0.0


def _decode_one(final: FinalStateSummary, decoder: str) -> DecodeResult:
    est = qber_from_tally(final.tally, decoder)
    swap = final.tally.accept / final.tally.total if final.tally.total else 0.0
    if final.exact:
        return DecodeResult(est.Q_z, est.Q_x, est.acceptance, swap, decoder)
    return DecodeResult(est.Q_z, est.Q_x, est.acceptance, swap, decoder,
                        est.stderr_z, est.stderr_x, est.stderr_acceptance)


def decode(final: FinalStateSummary, decoder: str = "best-of-both") -> DecodeResult:
    """Error rates among accepted rounds plus the overall acceptance.

    ``best-of-both`` keeps whichever decoder yields more secret bits per
    round, i.e. the larger ``acceptance * r_inf``; ties go to majority.
    Single-qubit banks always report ``majority``.
    """
    if decoder in ("majority", "error-detect"):
        return _decode_one(final, decoder)
    if decoder != "best-of-both":
        raise ValueError(f"unknown decoder {decoder!r}")
    from ..qkd import secret_fraction_safe

    maj = _decode_one(final, "majority")
    if final.m == 1:
        return maj
    det = _decode_one(final, "error-detect")

    def score(r: DecodeResult) -> float:
        if not r.acceptance > 0:
            return -1.0
        return r.acceptance * secret_fraction_safe(r.Q_z, r.Q_x)

    return det if score(det) > score(maj) else maj
