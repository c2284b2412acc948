"""Pauli-frame versions of the repeater gadgets and the full-chain trajectory spec.

Each gadget acts on arrays of qubit indices, so one call builds the same
gadget on every link (or swap node) at once. Record rows follow the
flattened order of the qubit arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..pauli_engine import Feedforward, Gate, Measure, Noise, Readout, TrajectorySpec, compile_noise
from .config import Schedule


class CircuitBuilder:
    def __init__(self):
        self.num_qubits = 0
        self.events: list = []

    def alloc(self, *shape: int) -> np.ndarray:
        size = int(np.prod(shape))
        out = np.arange(self.num_qubits, self.num_qubits + size).reshape(shape)
        self.num_qubits += size
        return out

    def noise(self, channel: str, value: float, *groups) -> None:
        table = compile_noise(channel, value)
        if not table.is_identity():
            self.events.append(Noise(table, tuple(np.ravel(g) for g in groups)))

    def cnot(self, controls, targets, beta: float) -> None:
        c, t = np.ravel(controls), np.ravel(targets)
        self.events.append(Gate("CNOT", (c, t)))
        self.noise("cnot", beta, c, t)

    def measure(self, qubits, basis: str, flip: float, key: str) -> None:
        self.events.append(Measure(np.ravel(qubits), basis, flip, key))

    def feedforward(self, targets, pauli: str, *keys: str, rows=None) -> None:
        t = np.ravel(targets)
        rows = np.arange(t.size) if rows is None else np.ravel(rows)
        self.events.append(Feedforward(t, pauli, tuple((k, rows) for k in keys)))

    def readout(self, qubits, flip: float, key: str) -> None:
        self.events.append(Readout(np.ravel(qubits), flip, key))

    def spec(self, postprocess=None) -> TrajectorySpec:
        return TrajectorySpec(self.num_qubits, list(self.events), postprocess)


# -- gadgets ------------------------------------------------------------------


def link_transfer(b: CircuitBuilder, NA, NB, F0: float, beta: float, delta: float, key: str) -> None:
    """Werner electron pairs moved onto the nuclear spins ``NA``, ``NB``."""
    ea, eb = b.alloc(*np.shape(NA)), b.alloc(*np.shape(NB))
    b.noise("werner", F0, eb)
    b.cnot(np.concatenate([ea.ravel(), eb.ravel()]), np.concatenate([np.ravel(NA), np.ravel(NB)]), beta)
    b.measure(ea, "X", delta, key + "/sa")
    b.measure(eb, "X", delta, key + "/sb")
    b.feedforward(NA, "Z", key + "/sa", key + "/sb")


def encode(b: CircuitBuilder, NA, NB, beta: float, delta: float, key: str) -> None:
    """Fan-out teleportation onto the repetition code.

    The GHZ electrons are prepared error-free, so in the frame picture
    they start clean; one electron per nuclear spin of bank A.
    """
    g = b.alloc(*np.shape(NA))
    b.cnot(NA, g, beta)
    b.measure(g, "Z", delta, key)
    # outcome i corrects both A_i and B_i
    rows = np.tile(np.arange(np.size(NA)), 2)
    b.feedforward(np.concatenate([np.ravel(NA), np.ravel(NB)]), "X", key, rows=rows)


def bsm(b: CircuitBuilder, J, K, mediator_fidelity: float, beta: float, delta: float, key: str) -> None:
    """Electron-mediated Bell measurement of nuclear spins ``J`` and ``K``."""
    j, k = b.alloc(*np.shape(J)), b.alloc(*np.shape(K))
    b.noise("werner", mediator_fidelity, k)
    b.cnot(np.concatenate([np.ravel(J), np.ravel(K)]), np.concatenate([j.ravel(), k.ravel()]), beta)
    b.measure(j, "Z", delta, key + "/pj")
    b.measure(k, "Z", delta, key + "/pk")
    b.measure(J, "X", beta + delta, key + "/fJ")
    b.measure(K, "X", beta + delta, key + "/fK")


def teleport(b: CircuitBuilder, J, mediator_fidelity: float, beta: float, delta: float, key: str) -> np.ndarray:
    """Move nuclear spins ``J`` onto remote electrons; returns the electrons."""
    j, k = b.alloc(*np.shape(J)), b.alloc(*np.shape(J))
    b.noise("werner", mediator_fidelity, k)
    b.cnot(J, j, beta)
    b.measure(j, "Z", delta, key + "/p")
    b.measure(J, "X", beta + delta, key + "/f")
    b.feedforward(k, "X", key + "/p")
    b.feedforward(k, "Z", key + "/f")
    return k


# -- full chain ---------------------------------------------------------------


def _majority(bits: np.ndarray) -> np.ndarray:
    return bits.sum(axis=0) * 2 > bits.shape[0]


def _consistent(bits: np.ndarray) -> np.ndarray:
    return np.all(bits == bits[:1], axis=0)


@dataclass(frozen=True)
class ChainReadout:
    """Resolves swap outcomes and end read-outs into per-trajectory flags."""

    m: int
    swaps: int

    def __call__(self, records: dict, x=None, z=None) -> dict:
        m, ns = self.m, self.swaps
        az, ax = records["alice/Z"], records["alice/X"]
        bz, bx = records["bob/Z"], records["bob/X"]
        S = az.shape[1]
        accept = np.ones(S, bool)
        c = np.zeros(S, bool)
        F = np.zeros(S, bool)
        if ns:
            dp = (records["swap/pj"] ^ records["swap/pk"]).reshape(ns, m, S)
            df = (records["swap/fJ"] ^ records["swap/fK"]).reshape(ns, m, S)
            if m > 1:
                accept = np.all(dp == dp[:, :1], axis=(0, 1))
            c = np.bitwise_xor.reduce(dp[:, 0], axis=0)
            F = np.bitwise_xor.reduce(df.reshape(ns * m, S), axis=0)
        bz = bz ^ c
        return {
            "accept": accept,
            "z_err": _majority(az) != _majority(bz),
            "z_reject": ~(_consistent(az) & _consistent(bz)),
            "x_err": np.bitwise_xor.reduce(np.concatenate([ax, bx]), axis=0) ^ F,
        }


def memory_links(b: CircuitBuilder, schedule: Schedule, count: int):
    """All memory links of the chain, ready for swapping."""
    m = schedule.m
    NA, NB = b.alloc(count, m), b.alloc(count, m)
    link_transfer(b, NA, NB, schedule.F0, schedule.beta, schedule.delta, "link")
    b.noise("pair", schedule.link_fidelity, NA, NB)
    if m == 1:
        b.noise("pair", schedule.pre_swap_fidelity, NA, NB)
    else:
        encode(b, NA, NB, schedule.beta, schedule.delta, "enc")
        b.noise("encoded", schedule.pre_swap_fidelity, *NA.T, *NB.T)
    return NA, NB


def chain_spec(schedule: Schedule) -> TrajectorySpec:
    """Trajectory spec of the full chain of one protocol at one nesting level."""
    protocol = schedule.protocol
    count = protocol.memory_links(schedule.n)
    b = CircuitBuilder()
    NA, NB = memory_links(b, schedule, count)
    if count > 1:
        bsm(b, NB[:-1], NA[1:], schedule.mediator_fidelity, schedule.beta, schedule.delta, "swap")
    bob = NB[-1]
    if protocol.remote_mediator:
        bob = teleport(b, bob, schedule.mediator_fidelity, schedule.beta, schedule.delta, "hop")
    b.readout(NA[0], schedule.alice_flip, "alice")
    b.readout(bob, schedule.bob_flip, "bob")
    return b.spec(ChainReadout(schedule.m, count - 1))
