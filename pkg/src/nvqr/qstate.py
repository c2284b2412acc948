"""Dense density-matrix engine over labelled qubit registers.

States are immutable: every operation returns a new :class:`DensityMatrix`.
Gates and channels are applied by contracting the relevant tensor legs, so the
full ``2**k x 2**k`` operator is never formed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Hashable, Iterable, Literal, Sequence

import numpy as np

MAX_QUBITS = 14
TOL = 1e-10
POSITIVITY_TOL = 1e-9

# eigen-decomposition is too expensive to run on every construction
CHECK_POSITIVITY = bool(os.environ.get("NVQR_DEBUG"))

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


class RegisterError(ValueError):
    """Invalid register operation (bad labels, size cap, dimension mismatch)."""


@dataclass(frozen=True, order=True)
class QubitLabel:
    """A spin in the repeater chain.

    ``spin`` is ``"e"`` for the electron and ``"n"`` for the nuclear spin of
    NV number ``nv_index`` in the memory bank at ``node``.
    """

    node: int
    nv_index: int
    spin: Literal["e", "n"]

    def __str__(self) -> str:
        letter = "a" if self.spin == "e" else "A"
        return f"{letter}{self.nv_index}@{self.node}"


def _capped(labels) -> tuple:
    # checked before any 2**k allocation
    labels = tuple(labels)
    if len(labels) > MAX_QUBITS:
        raise RegisterError(f"register of {len(labels)} qubits exceeds cap {MAX_QUBITS}")
    return labels


class DensityMatrix:
    """Hermitian unit-trace operator on an ordered tuple of qubit labels.

    The first label is the most significant bit of the matrix index.
    """

    __slots__ = ("labels", "data")

    def __init__(self, labels: Iterable[Hashable], data, *, check: bool = True):
        labels = tuple(labels)
        k = len(labels)
        if k > MAX_QUBITS:
            raise RegisterError(f"register of {k} qubits exceeds cap {MAX_QUBITS}")
        if len(set(labels)) != k:
            raise RegisterError(f"duplicate labels in {labels}")
        data = np.asarray(data, dtype=complex)
        if data.shape != (2**k, 2**k):
            raise RegisterError(f"data shape {data.shape} does not match {k} qubits")
        data.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "data", data)
        if check:
            self.validate()

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    def __repr__(self) -> str:
        names = ", ".join(str(l) for l in self.labels)
        return f"DensityMatrix([{names}])"

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    def validate(self) -> None:
        tr = np.trace(self.data)
        if abs(tr - 1) > TOL:
            raise RegisterError(f"trace {tr} differs from 1")
        if np.max(np.abs(self.data - self.data.conj().T), initial=0.0) > TOL:
            raise RegisterError("matrix is not Hermitian")
        if CHECK_POSITIVITY:
            low = np.linalg.eigvalsh(self.data).min()
            if low < -POSITIVITY_TOL:
                raise RegisterError(f"negative eigenvalue {low}")

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise RegisterError(f"label {label} not in register") from None

    def tensor_view(self) -> np.ndarray:
        k = self.num_qubits
        return self.data.reshape((2,) * (2 * k))

    def relabel(self, mapping: dict) -> "DensityMatrix":
        labels = [mapping.get(l, l) for l in self.labels]
        return DensityMatrix(labels, self.data, check=False)

    def reorder(self, labels: Sequence[Hashable]) -> "DensityMatrix":
        """Permute the register into the given label order."""
        labels = tuple(labels)
        if len(labels) != len(self.labels) or set(labels) != set(self.labels):
            raise RegisterError("reorder needs a permutation of the register")
        k = self.num_qubits
        perm = [self.index(l) for l in labels]
        t = self.tensor_view().transpose(perm + [p + k for p in perm])
        return DensityMatrix(labels, t.reshape(2**k, 2**k), check=False)

    @classmethod
    def from_pure(cls, labels, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(labels, np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, labels, bits: str) -> "DensityMatrix":
        labels = _capped(labels)
        psi = np.zeros(2 ** len(labels), dtype=complex)
        psi[int(bits, 2) if bits else 0] = 1
        return cls(labels, np.outer(psi, psi))

    @classmethod
    def maximally_mixed(cls, labels) -> "DensityMatrix":
        labels = _capped(labels)
        d = 2 ** len(labels)
        return cls(labels, np.eye(d) / d)


# -- low level tensor helpers -------------------------------------------------


def _op_left(t: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract ``op`` into the given tensor axes (acting from the left)."""
    n = len(axes)
    op_t = op.reshape((2,) * (2 * n))
    out = np.tensordot(op_t, t, axes=(list(range(n, 2 * n)), list(axes)))
    return np.moveaxis(out, list(range(n)), list(axes))


def _conjugate(t: np.ndarray, op: np.ndarray, positions: Sequence[int], k: int):
    """Tensor form of ``op rho op^dagger`` on the given qubit positions."""
    t = _op_left(t, op, positions)
    return _op_left(t, op.conj(), [p + k for p in positions])


def _trace_out(t: np.ndarray, positions: Sequence[int], k: int) -> np.ndarray:
    """Partial trace of a ``2k``-leg tensor; returns a ``2(k-len)``-leg tensor."""
    keep = [i for i in range(k) if i not in set(positions)]
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = list(letters[:k])
    cols = list(letters[k : 2 * k])
    for p in positions:
        cols[p] = rows[p]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    return np.einsum("".join(rows) + "".join(cols) + "->" + out, t)


def _embed_identity(red: np.ndarray, positions: Sequence[int], k: int) -> np.ndarray:
    """Inverse of ``_trace_out``: ``red`` tensor ``I/d`` on ``positions``."""
    m = len(positions)
    d = 2**m
    ident = (np.eye(d) / d).reshape((2,) * (2 * m))
    out = np.multiply.outer(red, ident)
    keep = [i for i in range(k) if i not in set(positions)]
    kk = len(keep)
    # current axis order: keep rows, keep cols, pos rows, pos cols
    src = list(range(2 * kk + 2 * m))
    dst = keep + [i + k for i in keep] + list(positions) + [p + k for p in positions]
    return np.moveaxis(out, src, dst)


def _matrix(t: np.ndarray, k: int) -> np.ndarray:
    return t.reshape(2**k, 2**k)


def _positions(rho: DensityMatrix, targets) -> list[int]:
    pos = [rho.index(t) for t in targets]
    if len(set(pos)) != len(pos):
        raise RegisterError("repeated target")
    return pos


# -- public operations --------------------------------------------------------


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    if set(a.labels) & set(b.labels):
        raise RegisterError("registers share labels")
    if a.num_qubits + b.num_qubits > MAX_QUBITS:
        raise RegisterError("combined register exceeds size cap")
    return DensityMatrix(a.labels + b.labels, np.kron(a.data, b.data), check=False)


def tensor_all(*states: DensityMatrix) -> DensityMatrix:
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def apply_unitary(rho: DensityMatrix, u: np.ndarray, targets) -> DensityMatrix:
    """``U rho U^dagger`` on one or two target qubits (in the order given)."""
    pos = _positions(rho, targets)
    u = np.asarray(u, dtype=complex)
    if u.shape != (2 ** len(pos),) * 2:
        raise RegisterError("unitary size does not match targets")
    k = rho.num_qubits
    t = _conjugate(rho.tensor_view(), u, pos, k)
    return DensityMatrix(rho.labels, _matrix(t, k), check=False)


def apply_kraus(rho: DensityMatrix, kraus: Sequence[np.ndarray], targets) -> DensityMatrix:
    pos = _positions(rho, targets)
    k = rho.num_qubits
    t0 = rho.tensor_view()
    acc = sum(_conjugate(t0, np.asarray(K, dtype=complex), pos, k) for K in kraus)
    return DensityMatrix(rho.labels, _matrix(acc, k))


def depolarize_block(rho: DensityMatrix, targets, p: float) -> DensityMatrix:
    """``p rho + (1-p) Tr_targets(rho) (x) I/d`` in the original label order."""
    pos = _positions(rho, targets)
    k = rho.num_qubits
    t = rho.tensor_view()
    mixed = _embed_identity(_trace_out(t, pos, k), pos, k)
    return DensityMatrix(rho.labels, _matrix(p * t + (1 - p) * mixed, k))


def apply_cnot_noisy(rho: DensityMatrix, control, target, beta: float) -> DensityMatrix:
    """Ideal CNOT followed by full depolarisation of the pair with probability beta."""
    if not 0 <= beta <= 1:
        raise ValueError(f"beta={beta} outside [0, 1]")
    if control == target:
        raise RegisterError("control equals target")
    out = apply_unitary(rho, CNOT, [control, target])
    if beta == 0:
        return out
    return depolarize_block(out, [control, target], 1 - beta)


def measurement_effects(basis: str, err: float) -> tuple[np.ndarray, np.ndarray]:
    """POVM pair (outcome 0, outcome 1) of a flip-noisy single-qubit measurement."""
    if basis == "Z":
        e0 = np.diag([1 - err, err]).astype(complex)
    elif basis == "X":
        plus = np.full((2, 2), 0.5, dtype=complex)
        minus = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex)
        e0 = (1 - err) * plus + err * minus
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return e0, I2 - e0


def _apply_effect(t: np.ndarray, effect: np.ndarray, pos: Sequence[int], k: int):
    """Unnormalised ``Tr_pos[(E (x) I) rho]`` as a tensor on the remaining legs."""
    n = len(pos)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = list(letters[:k])
    cols = list(letters[k : 2 * k])
    ins = [rows[p] for p in pos]
    outs = [cols[p] for p in pos]
    keep = [i for i in range(k) if i not in set(pos)]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    spec = "".join(outs) + "".join(ins) + "," + "".join(rows) + "".join(cols) + "->" + out
    return np.einsum(spec, effect.reshape((2,) * (2 * n)), t, optimize=True)


def measure_noisy(rho: DensityMatrix, target, basis: str, err: float):
    """Measure one qubit with flip probability ``err`` and trace it out.

    Returns a list of ``(outcome, probability, post_state)``; zero-probability
    outcomes are omitted. For the X basis outcome 0 is ``|+>``.
    """
    if not 0 <= err <= 0.5:
        raise ValueError(f"measurement error {err} outside [0, 1/2]")
    pos = _positions(rho, [target])
    k = rho.num_qubits
    rest = tuple(l for l in rho.labels if l != target)
    t = rho.tensor_view()
    branches = []
    for outcome, effect in enumerate(measurement_effects(basis, err)):
        red = _matrix(_apply_effect(t, effect, pos, k), k - 1)
        prob = float(np.real(np.trace(red)))
        if prob <= 1e-15:
            continue
        branches.append((outcome, prob, DensityMatrix(rest, red / prob, check=False)))
    return branches


def partial_trace(rho: DensityMatrix, drop) -> DensityMatrix:
    drop = list(drop)
    if not drop:
        return rho
    pos = _positions(rho, drop)
    k = rho.num_qubits
    keep = tuple(l for l in rho.labels if l not in set(drop))
    red = _trace_out(rho.tensor_view(), pos, k)
    return DensityMatrix(keep, _matrix(red, len(keep)))


def fidelity(rho: DensityMatrix, pure) -> float:
    """``<psi|rho|psi>`` for a state vector ordered like ``rho.labels``."""
    psi = np.asarray(pure, dtype=complex).ravel()
    if psi.shape[0] != rho.data.shape[0]:
        raise RegisterError("state vector dimension mismatch")
    psi = psi / np.linalg.norm(psi)
    return float(np.real(psi.conj() @ rho.data @ psi))


class MeasurementInstrument:
    """Multi-outcome instrument that consumes the qubits it acts on.

    Each outcome carries an effect operator on ``labels`` (ordered like the
    labels); the outcome's map is ``rho -> Tr_labels[(E (x) I) rho]``.
    Effects must sum to the identity.
    """

    def __init__(self, labels: Sequence[Hashable], outcomes: dict):
        self.labels = tuple(labels)
        self.outcomes = {v: np.asarray(e, dtype=complex) for v, e in outcomes.items()}
        d = 2 ** len(self.labels)
        total = sum(self.outcomes.values())
        if np.max(np.abs(total - np.eye(d))) > TOL:
            raise RegisterError("instrument is not trace preserving")

    def __len__(self) -> int:
        return len(self.outcomes)

    def relabel(self, labels: Sequence[Hashable]) -> "MeasurementInstrument":
        return MeasurementInstrument(labels, self.outcomes)

    def branches(self, rho: DensityMatrix, normalize: bool = True):
        """Yield ``(value, probability, state)`` for every outcome.

        With ``normalize=False`` the state is the raw (trace = probability)
        tensor on the remaining labels, as a plain array.
        """
        pos = _positions(rho, self.labels)
        k = rho.num_qubits
        rest = tuple(l for l in rho.labels if l not in set(self.labels))
        t = rho.tensor_view()
        for value, effect in self.outcomes.items():
            red = _matrix(_apply_effect(t, effect, pos, k), len(rest))
            prob = float(np.real(np.trace(red)))
            if not normalize:
                yield value, prob, red
            elif prob > 1e-15:
                yield value, prob, DensityMatrix(rest, red / prob, check=False)


# -- common states ------------------------------------------------------------


def bell_vector(kind: str = "phi+") -> np.ndarray:
    vecs = {
        "phi+": [1, 0, 0, 1],
        "phi-": [1, 0, 0, -1],
        "psi+": [0, 1, 1, 0],
        "psi-": [0, 1, -1, 0],
    }
    return np.array(vecs[kind], dtype=complex) / np.sqrt(2)


def ghz_vector(k: int) -> np.ndarray:
    v = np.zeros(2**k, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return v


def encoded_bell_vector() -> np.ndarray:
    """(|000,000> + |111,111>)/sqrt(2), bank A first."""
    return ghz_vector(6)


def werner(labels, f: float) -> DensityMatrix:
    """``F |phi+><phi+| + (1-F)/3 (I - |phi+><phi+|)``."""
    phi = np.outer(bell_vector(), bell_vector().conj())
    return DensityMatrix(labels, f * phi + (1 - f) / 3 * (np.eye(4) - phi))


def pauli_string(word: str) -> np.ndarray:
    out = np.array([[1]], dtype=complex)
    for ch in word:
        out = np.kron(out, PAULIS[ch])
    return out
