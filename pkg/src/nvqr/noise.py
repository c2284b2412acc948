"""Memory decoherence and depolarising channels.

Two families live here. The closed forms (``lambda2``, ``lambda4``,
``lambda64``) and the block approximations used by the repeater pipelines, and
the exact qubit-wise Pauli channel that serves as their reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qstate
from .qstate import DensityMatrix


@dataclass(frozen=True)
class DecoherenceParams:
    """Coherence times in seconds of the electron and nuclear spins."""

    tau_e: float = 10e-3
    tau_n: float = 1.0

    def __post_init__(self):
        if not (self.tau_e > 0 and self.tau_n > 0):
            raise ValueError("coherence times must be positive")


@dataclass(frozen=True)
class PauliWeights:
    w_i: float
    w_x: float
    w_y: float
    w_z: float

    def __post_init__(self):
        w = self.as_array()
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError(f"invalid Pauli weights {w}")

    def as_array(self) -> np.ndarray:
        return np.array([self.w_i, self.w_x, self.w_y, self.w_z])


def _check_lam2(lam2: float) -> None:
    if not 0.5 - 1e-15 <= lam2 <= 1 + 1e-15:
        raise ValueError(f"lambda2={lam2} outside [1/2, 1]")


def lambda2(t_w: float, tau: float) -> float:
    """Single-qubit fidelity after waiting ``t_w`` with coherence time ``tau``."""
    if t_w < 0:
        raise ValueError("negative waiting time")
    if tau <= 0:
        raise ValueError("coherence time must be positive")
    return 0.5 + 0.5 * math.exp(-t_w / tau)


def lambda4(lam2: float) -> float:
    """Bell-pair fidelity when both qubits decohere with ``lam2``."""
    _check_lam2(lam2)
    return 0.25 * (3 * lam2 - 1) ** 2 + 0.75 * (1 - lam2) ** 2


def lambda64(lam2: float) -> float:
    """Encoded Bell-pair fidelity when all six qubits decohere with ``lam2``."""
    _check_lam2(lam2)
    a = 3 * lam2 - 1
    b = 1 - lam2
    return (a**6 + 33 * b**6 + 15 * a**2 * b**4 + 15 * a**4 * b**2) / 64


def pauli_weights(lam2: float) -> PauliWeights:
    _check_lam2(lam2)
    w = (1 - lam2) / 2
    return PauliWeights((3 * lam2 - 1) / 2, w, w, w)


def depolarize_qubitwise_exact(rho: DensityMatrix, targets, lam2) -> DensityMatrix:
    """Independent single-qubit Pauli channel on every target.

    ``lam2`` is either one value for all targets or one value per target.
    """
    targets = list(targets)
    lams = np.broadcast_to(np.asarray(lam2, dtype=float), (len(targets),))
    out = rho
    for target, lam in zip(targets, lams):
        w = pauli_weights(float(lam)).as_array()
        kraus = [math.sqrt(wi) * P for wi, P in zip(w, (qstate.I2, qstate.X, qstate.Y, qstate.Z))]
        out = qstate.apply_kraus(out, kraus, [target])
    return out


def _block_fidelity_map(rho: DensityMatrix, targets: Sequence, lam: float, d: int):
    # lam*rho + (1-lam)(I-rho)/(d-1) rewritten as p*rho + (1-p)*I/d
    p = (d * lam - 1) / (d - 1)
    return qstate.depolarize_block(rho, targets, p)


def depolarize_pair_approx(rho: DensityMatrix, pair, lam4: float) -> DensityMatrix:
    """``lam4 rho + (1-lam4)(I - rho)/3`` on a two-qubit block."""
    pair = list(pair)
    if len(pair) != 2:
        raise ValueError("pair must name exactly two qubits")
    if not 0 <= lam4 <= 1:
        raise ValueError(f"lambda4={lam4} outside [0, 1]")
    return _block_fidelity_map(rho, pair, lam4, 4)


def depolarize_encoded_approx(rho: DensityMatrix, six_qubits, lam64: float) -> DensityMatrix:
    """``lam64 rho + (1-lam64)(I - rho)/63`` on a six-qubit block."""
    six_qubits = list(six_qubits)
    if len(six_qubits) != 6:
        raise ValueError("encoded block must have six qubits")
    if not 0 <= lam64 <= 1:
        raise ValueError(f"lambda64={lam64} outside [0, 1]")
    return _block_fidelity_map(rho, six_qubits, lam64, 64)


def block_depolarizing_probability(lam: float, d: int) -> float:
    """Probability that the block channel with fidelity ``lam`` fully randomises.

    The block maps are ``p rho + (1-p) I/d``, i.e. with probability ``1-p`` a
    uniformly random Pauli string hits the block.
    """
    return 1 - (d * lam - 1) / (d - 1)


def werner_weights(f: float) -> PauliWeights:
    """Weights of the one-sided Pauli channel that turns ``|phi+>`` into Werner(F)."""
    if not 0 <= f <= 1:
        raise ValueError(f"fidelity {f} outside [0, 1]")
    e = (1 - f) / 3
    return PauliWeights(f, e, e, e)
