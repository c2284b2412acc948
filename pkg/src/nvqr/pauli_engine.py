"""Pauli-frame Monte Carlo for Clifford circuits with Pauli noise.

A frame stores, per qubit and per trajectory, whether an X and/or Z error
sits on top of the ideal state. Measurement records hold the deviation of
each outcome from the ideal outcome, so corrections computed from records
become Pauli errors on the frame when a record is wrong.

All arrays are laid out ``(qubit, trajectory)`` so that one event updates a
whole batch of trajectories with a handful of numpy operations. The same
propagation code runs in two modes: sampling (random noise draws) and
enumeration (every noise branch kept, with its probability as a weight).
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import noise as noise_mod

BLOCK = 4096

_PAULI_XZ = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


class FrameError(ValueError):
    """Invalid frame operation, e.g. touching a retired qubit."""


@dataclass(frozen=True)
class NoiseTable:
    """Probability table over Pauli strings acting on ``k`` qubits."""

    words: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if len(self.words) != len(probs):
            raise ValueError("one probability per Pauli word")
        if np.any(probs < -1e-15) or abs(probs.sum() - 1) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        k = {len(w) for w in self.words}
        if len(k) != 1:
            raise ValueError("all words must have the same length")
        object.__setattr__(self, "probs", np.clip(probs, 0, None))

    @property
    def k(self) -> int:
        return len(self.words[0])

    @property
    def xz(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.array([[_PAULI_XZ[c][0] for c in w] for w in self.words], dtype=bool)
        z = np.array([[_PAULI_XZ[c][1] for c in w] for w in self.words], dtype=bool)
        return x, z

    def is_identity(self) -> bool:
        ident = "I" * self.k
        return all(p == 0 or w == ident for w, p in zip(self.words, self.probs))


def _all_words(k: int) -> list[str]:
    return ["".join(w) for w in itertools.product("IXYZ", repeat=k)]


def uniform_block_table(k: int, p_mix: float) -> NoiseTable:
    """With probability ``p_mix`` a uniformly random ``k``-qubit Pauli string."""
    words = _all_words(k)
    probs = np.full(len(words), p_mix / len(words))
    probs[0] += 1 - p_mix
    return NoiseTable(tuple(words), probs)


def single_qubit_table(w: noise_mod.PauliWeights) -> NoiseTable:
    return NoiseTable(("I", "X", "Y", "Z"), w.as_array())


def compile_noise(channel: str, value: float) -> NoiseTable:
    """Pauli sampling table of one of the repeater noise channels.

    ``channel`` is one of ``"cnot"`` (value = beta), ``"decoherence"``
    (lambda2 of a single qubit), ``"werner"`` (fidelity, applied to one half of
    a pair), ``"pair"`` (lambda4 block map) or ``"encoded"`` (lambda64).
    """
    if channel == "cnot":
        if not 0 <= value <= 1:
            raise ValueError(f"beta={value} outside [0, 1]")
        return uniform_block_table(2, value)
    if channel == "decoherence":
        return single_qubit_table(noise_mod.pauli_weights(value))
    if channel == "werner":
        return single_qubit_table(noise_mod.werner_weights(value))
    if channel == "pair":
        return uniform_block_table(2, noise_mod.block_depolarizing_probability(value, 4))
    if channel == "encoded":
        return uniform_block_table(6, noise_mod.block_depolarizing_probability(value, 64))
    raise ValueError(f"channel {channel!r} is not a Pauli channel known to the engine")


# -- events -------------------------------------------------------------------


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple  # (targets,) or (controls, targets) as int arrays


@dataclass(frozen=True)
class Noise:
    table: NoiseTable
    qubits: tuple  # k arrays of equal length, one group per index


@dataclass(frozen=True)
class Measure:
    qubits: np.ndarray
    basis: str
    flip: float
    key: str


@dataclass(frozen=True)
class Readout:
    """Final non-destructive readout recording both Z- and X-basis deviations.

    Only meaningful as the last touch of a qubit: it yields the marginal
    outcome statistics of either basis choice from one trajectory.
    """

    qubits: np.ndarray
    flip: float
    key: str


@dataclass(frozen=True)
class Feedforward:
    """Apply ``pauli`` to ``targets`` where the XOR of the given records is set."""

    targets: np.ndarray
    pauli: str
    sources: tuple  # ((key, rows), ...) with rows aligned to targets


@dataclass(frozen=True)
class Retire:
    qubits: np.ndarray


def _arr(q) -> np.ndarray:
    return np.atleast_1d(np.asarray(q, dtype=np.intp))


@dataclass
class TrajectorySpec:
    """Ordered event list plus the routine that turns records into tallies.

    ``postprocess(records, x, z, weights)`` must return a dict of boolean
    per-trajectory arrays with keys ``accept``, ``z_reject``, ``z_err`` and
    ``x_err``.
    """

    num_qubits: int
    events: list = field(default_factory=list)
    postprocess: Callable | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        retired: set[int] = set()

        def touch(qs):
            qs = _arr(qs)
            if qs.size and (qs.min() < 0 or qs.max() >= self.num_qubits):
                raise FrameError("qubit index out of range")
            bad = retired.intersection(qs.tolist())
            if bad:
                raise FrameError(f"event references retired qubits {sorted(bad)[:5]}")
            return qs

        for ev in self.events:
            if isinstance(ev, Gate):
                flat = np.concatenate([_arr(q) for q in ev.qubits])
                touch(flat)
                if len(set(flat.tolist())) != flat.size:
                    raise FrameError("overlapping gate targets in one event")
            elif isinstance(ev, Noise):
                if len(ev.qubits) != ev.table.k:
                    raise FrameError("noise table arity does not match qubit groups")
                for q in ev.qubits:
                    touch(q)
            elif isinstance(ev, (Measure, Retire)):
                retired.update(touch(ev.qubits).tolist())
            elif isinstance(ev, Readout):
                retired.update(touch(ev.qubits).tolist())
            elif isinstance(ev, Feedforward):
                touch(ev.targets)
            else:
                raise FrameError(f"unknown event {ev!r}")


# -- frame --------------------------------------------------------------------


@dataclass
class PauliFrame:
    """Batch of Pauli frames, arrays shaped ``(num_qubits, trajectories)``."""

    x: np.ndarray
    z: np.ndarray
    records: dict = field(default_factory=dict)
    retired: set = field(default_factory=set)
    weights: np.ndarray | None = None

    @classmethod
    def clean(cls, num_qubits: int, trajectories: int = 1) -> "PauliFrame":
        shape = (num_qubits, trajectories)
        return cls(np.zeros(shape, bool), np.zeros(shape, bool))

    @property
    def trajectories(self) -> int:
        return self.x.shape[1]

    def copy(self) -> "PauliFrame":
        return PauliFrame(
            self.x.copy(),
            self.z.copy(),
            {k: v.copy() for k, v in self.records.items()},
            set(self.retired),
            None if self.weights is None else self.weights.copy(),
        )

    def _check_live(self, qubits) -> None:
        bad = self.retired.intersection(_arr(qubits).tolist())
        if bad:
            raise FrameError(f"qubits {sorted(bad)} already measured")


def _gate_inplace(frame: PauliFrame, name: str, qubits) -> None:
    x, z = frame.x, frame.z
    if name == "CNOT":
        c, t = _arr(qubits[0]), _arr(qubits[1])
        x[t] ^= x[c]
        z[c] ^= z[t]
    elif name == "H":
        q = _arr(qubits[0])
        x[q], z[q] = z[q].copy(), x[q].copy()
    elif name in ("X", "Z", "Y", "I"):
        pass  # Pauli gates commute with the frame up to a global sign
    else:
        raise FrameError(f"unsupported gate {name!r}")


def propagate(frame: PauliFrame, gate: str, targets) -> PauliFrame:
    """Conjugate the frame by a Clifford gate. ``targets`` is ``[q]`` or ``[c, t]``."""
    frame._check_live(np.concatenate([_arr(t) for t in targets]))
    out = frame.copy()
    if gate == "CNOT":
        _gate_inplace(out, gate, (targets[0], targets[1]))
    else:
        _gate_inplace(out, gate, (targets[0],))
    return out


def sample_measurement(frame: PauliFrame, qubit: int, basis: str, flip_prob: float,
                       ideal_outcome=0, rng=None) -> np.ndarray:
    """Outcome bits = ideal XOR frame flip XOR Bernoulli(flip_prob); retires the qubit.

    The frame is modified in place (the qubit is retired).
    """
    frame._check_live([qubit])
    rng = np.random.default_rng() if rng is None else rng
    flipped = frame.x[qubit] if basis == "Z" else frame.z[qubit]
    if basis not in ("Z", "X"):
        raise ValueError(f"unknown basis {basis!r}")
    noise = rng.random(frame.trajectories) < flip_prob
    frame.retired.add(int(qubit))
    return np.asarray(ideal_outcome, dtype=bool) ^ flipped ^ noise


# -- execution ----------------------------------------------------------------


def _apply_noise_sample(frame: PauliFrame, ev: Noise, rng) -> None:
    table = ev.table
    if table.is_identity():
        return
    groups = len(_arr(ev.qubits[0]))
    S = frame.trajectories
    cdf = np.cumsum(table.probs)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random((groups, S)), side="right")
    np.minimum(idx, len(cdf) - 1, out=idx)
    tx, tz = table.xz
    for j, q in enumerate(ev.qubits):
        q = _arr(q)
        frame.x[q] ^= tx[idx, j]
        frame.z[q] ^= tz[idx, j]


def _expand(frame: PauliFrame, branches: int) -> None:
    frame.x = np.repeat(frame.x, branches, axis=1)
    frame.z = np.repeat(frame.z, branches, axis=1)
    frame.records = {k: np.repeat(v, branches, axis=-1) for k, v in frame.records.items()}
    frame.weights = np.repeat(frame.weights, branches)


def _apply_noise_enumerate(frame: PauliFrame, ev: Noise) -> None:
    table = ev.table
    keep = np.flatnonzero(table.probs > 0)
    tx, tz = table.xz
    tx, tz, probs = tx[keep], tz[keep], table.probs[keep]
    for g in range(len(_arr(ev.qubits[0]))):
        S = frame.trajectories
        K = len(probs)
        _expand(frame, K)
        choice = np.tile(np.arange(K), S)
        frame.weights = frame.weights * probs[choice]
        for j, q in enumerate(ev.qubits):
            qi = _arr(q)[g]
            frame.x[qi] ^= tx[choice, j]
            frame.z[qi] ^= tz[choice, j]
        _merge_branches(frame)


def _flip_bits(frame: PauliFrame, rows: int, p: float, rng, enumerate_: bool) -> np.ndarray:
    """Classical flip noise for ``rows`` measured bits."""
    if p == 0:
        return np.zeros((rows, frame.trajectories), bool)
    if not enumerate_:
        return rng.random((rows, frame.trajectories)) < p
    flips = []
    for _ in range(rows):
        S = frame.trajectories
        _expand(frame, 2)
        bit = np.tile([False, True], S)
        frame.weights = frame.weights * np.where(bit, p, 1 - p)
        flips = [np.repeat(f, 2) for f in flips] + [bit]
    return np.array(flips, dtype=bool)


def _retire(frame: PauliFrame, q: np.ndarray) -> None:
    # clearing retired bits lets enumeration merge branches that differ only there
    frame.x[q] = False
    frame.z[q] = False
    frame.retired.update(q.tolist())


def _merge_branches(frame: PauliFrame) -> None:
    """Sum the weights of enumeration branches with identical frames and records."""
    keys = sorted(frame.records)
    bits = np.concatenate([frame.x, frame.z] + [frame.records[k] for k in keys], axis=0)
    uniq, inverse = np.unique(bits, axis=1, return_inverse=True)
    if uniq.shape[1] == bits.shape[1]:
        return
    inverse = inverse.ravel()
    frame.weights = np.bincount(inverse, weights=frame.weights, minlength=uniq.shape[1])
    nq = frame.x.shape[0]
    frame.x = uniq[:nq]
    frame.z = uniq[nq : 2 * nq]
    row = 2 * nq
    for k in keys:
        r = frame.records[k].shape[0]
        frame.records[k] = uniq[row : row + r]
        row += r


def run_events(spec: TrajectorySpec, frame: PauliFrame, rng=None) -> PauliFrame:
    """Run every event on ``frame`` in place. ``rng=None`` selects enumeration."""
    enumerate_ = rng is None
    if enumerate_ and frame.weights is None:
        frame.weights = np.ones(frame.trajectories)
    for ev in spec.events:
        if isinstance(ev, Gate):
            _gate_inplace(frame, ev.name, ev.qubits)
        elif isinstance(ev, Noise):
            if enumerate_:
                _apply_noise_enumerate(frame, ev)
            else:
                _apply_noise_sample(frame, ev, rng)
        elif isinstance(ev, Measure):
            q = _arr(ev.qubits)
            if ev.basis not in ("Z", "X"):
                raise ValueError(f"unknown basis {ev.basis!r}")
            flips = _flip_bits(frame, len(q), ev.flip, rng, enumerate_)
            src = frame.x if ev.basis == "Z" else frame.z
            frame.records[ev.key] = src[q] ^ flips
            _retire(frame, q)
        elif isinstance(ev, Readout):
            q = _arr(ev.qubits)
            # one call keeps both flip sets aligned with the expanded branches
            flips = _flip_bits(frame, 2 * len(q), ev.flip, rng, enumerate_)
            fz, fx = flips[: len(q)], flips[len(q):]
            frame.records[ev.key + "/Z"] = frame.x[q] ^ fz
            frame.records[ev.key + "/X"] = frame.z[q] ^ fx
            _retire(frame, q)
        elif isinstance(ev, Feedforward):
            cond = None
            for key, rows in ev.sources:
                r = frame.records[key][_arr(rows)]
                cond = r if cond is None else cond ^ r
            t = _arr(ev.targets)
            if ev.pauli in ("X", "Y"):
                frame.x[t] ^= cond
            if ev.pauli in ("Z", "Y"):
                frame.z[t] ^= cond
        elif isinstance(ev, Retire):
            _retire(frame, _arr(ev.qubits))
        if enumerate_:
            _merge_branches(frame)
    return frame


@dataclass
class Tally:
    """Weighted counts of the events the decoders need."""

    total: float = 0.0
    accept: float = 0.0
    accept_z: float = 0.0
    z_err: float = 0.0
    z_err_detect: float = 0.0
    x_err: float = 0.0

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(*(getattr(self, f) + getattr(other, f) for f in self.__dataclass_fields__))

    @classmethod
    def from_outcomes(cls, out: dict, weights=None) -> "Tally":
        acc = out["accept"]
        acc_z = acc & ~out["z_reject"]
        w = np.ones(acc.shape) if weights is None else weights
        return cls(
            total=float(w.sum()),
            accept=float(w[acc].sum()),
            accept_z=float(w[acc_z].sum()),
            z_err=float(w[acc & out["z_err"]].sum()),
            z_err_detect=float(w[acc_z & out["z_err"]].sum()),
            x_err=float(w[acc & out["x_err"]].sum()),
        )


def _block_rng(seed, block: int) -> np.random.Generator:
    entropy = list(seed) if isinstance(seed, (tuple, list)) else seed
    ss = np.random.SeedSequence(entropy, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _run_block(spec: TrajectorySpec, seed, block: int, size: int) -> Tally:
    frame = PauliFrame.clean(spec.num_qubits, size)
    run_events(spec, frame, _block_rng(seed, block))
    return Tally.from_outcomes(spec.postprocess(frame.records, frame.x, frame.z))


def sample_tally(spec: TrajectorySpec, samples: int, seed, workers: int = 1) -> Tally:
    """Sample ``samples`` trajectories in fixed-size blocks with per-block streams.

    Block ``b`` always draws from the stream keyed by ``(seed, b)``, so the
    result does not depend on ``workers``.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    sizes = [min(BLOCK, samples - b) for b in range(0, samples, BLOCK)]
    args = [(spec, seed, i, s) for i, s in enumerate(sizes)]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, *zip(*args)))
    else:
        parts = [_run_block(*a) for a in args]
    total = Tally()
    for p in parts:
        total = total + p
    return total


def enumerate_frame(spec: TrajectorySpec) -> PauliFrame:
    """Exact branch expansion of a (small) spec; weights are probabilities."""
    frame = PauliFrame.clean(spec.num_qubits, 1)
    frame.weights = np.ones(1)
    return run_events(spec, frame, None)


def enumerate_tally(spec: TrajectorySpec) -> Tally:
    frame = enumerate_frame(spec)
    out = spec.postprocess(frame.records, frame.x, frame.z)
    return Tally.from_outcomes(out, frame.weights)


@dataclass(frozen=True)
class QberEstimate:
    Q_z: float
    Q_x: float
    acceptance: float
    stderr_z: float
    stderr_x: float
    stderr_acceptance: float
    samples: int

    @property
    def defined(self) -> bool:
        return self.acceptance > 0


def _ratio(k: float, n: float) -> tuple[float, float]:
    if n <= 0:
        return float("nan"), float("nan")
    p = k / n
    return p, float(np.sqrt(max(p * (1 - p), 0.0) / n))


def qber_from_tally(t: Tally, decoder: str = "majority") -> QberEstimate:
    """Logical error rates among accepted rounds, with binomial standard errors."""
    if decoder == "majority":
        acc_n, z_n = t.accept, t.z_err
    elif decoder == "error-detect":
        acc_n, z_n = t.accept_z, t.z_err_detect
    else:
        raise ValueError(f"unknown decoder {decoder!r}")
    qz, sz = _ratio(z_n, acc_n)
    qx, sx = _ratio(t.x_err, t.accept)
    acc, sa = _ratio(acc_n, t.total)
    return QberEstimate(qz, qx, acc, sz, sx, sa, int(round(t.total)))


def estimate_qber(spec: TrajectorySpec, samples: int, seed, decoder: str = "majority",
                  workers: int = 1) -> QberEstimate:
    """Monte Carlo estimate of (Q_z, Q_x, acceptance); deterministic given ``seed``.

    Zero accepted samples gives NaN error rates and acceptance 0.
    """
    return qber_from_tally(sample_tally(spec, samples, seed, workers), decoder)
