"""Secret-key metrics, the repeaterless benchmark and protocol comparison."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from . import timing
from .layout import Protocol
from .protocols import dense
from .protocols.config import RepeaterConfig, SystemParams, electron_pair_fidelity
from .protocols.decode import tally_from_distribution
from .protocols.pipeline import evaluate

REPEATERLESS = "repeaterless"
DEFAULT_N_RANGE = tuple(range(1, 7))


def binary_entropy(p: float) -> float:
    if not 0 <= p <= 1:
        raise ValueError(f"probability {p} outside [0, 1]")
    if p in (0, 1):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def secret_fraction(Q_z: float, Q_x: float) -> float:
    """Asymptotic secret bits per sifted pair, ``max(0, 1 - h(Q_z) - h(Q_x))``."""
    for q in (Q_z, Q_x):
        if not 0 <= q <= 0.5:
            raise ValueError(f"error rate {q} outside [0, 1/2]")
    return max(0.0, 1 - binary_entropy(Q_z) - binary_entropy(Q_x))


def secret_fraction_safe(Q_z: float, Q_x: float) -> float:
    """Like :func:`secret_fraction` but tolerant of rates slightly above 1/2 or NaN.

    Error rates above 1/2 (only reachable through sampling noise or rounding)
    are folded back, and undefined rates give no key.
    """
    if not (np.isfinite(Q_z) and np.isfinite(Q_x)):
        return 0.0
    fold = [min(max(q, 0.0), 1.0) for q in (Q_z, Q_x)]
    fold = [min(q, 1 - q) for q in fold]
    return secret_fraction(*fold)


def _entropy_slope(p: float) -> float:
    p = min(max(p, 1e-300), 0.5)
    return math.log2((1 - p) / p)


def repetition_rate(protocol, params: SystemParams, n: int, n_max: int | None = None) -> float:
    """End-to-end pair rate ``1 / (T1 + T2)``."""
    w = timing.waiting_times(protocol, params.link(n), n_max)
    return 1.0 / (w.T1 + w.T2)


@dataclass(frozen=True)
class KeyRateRecord:
    protocol: str
    n: int
    L_tot: float
    L0: float
    beta: float
    delta: float
    eta_c: float
    eta_d: float
    tau_e: float
    tau_n: float
    Q_z: float
    Q_x: float
    acceptance: float
    r_inf: float
    R: float
    R_qkd: float
    R_qkd_no_acceptance: float
    engine: str
    decoder: str
    samples: int = 0
    seed: int = 0
    stderr_Qz: float = 0.0
    stderr_Qx: float = 0.0
    stderr_R_qkd: float = 0.0
    branches: str = "exact"

    def as_dict(self) -> dict:
        return asdict(self)


def nv_count(protocol, n: int) -> int:
    if protocol == REPEATERLESS:
        return 2
    return Protocol.parse(protocol).nv_count(n)


def normalized_key_rate(record: KeyRateRecord, with_acceptance: bool = True) -> float:
    """Secret bits per second per NV center."""
    if record.protocol == REPEATERLESS:
        return record.R_qkd
    acc = record.acceptance if with_acceptance else 1.0
    return record.R * record.r_inf * acc / nv_count(record.protocol, record.n)


def _common(params: SystemParams) -> dict:
    return dict(L_tot=params.L_tot, beta=params.beta, delta=params.delta, eta_c=params.eta_c,
                eta_d=params.eta_d, tau_e=params.tau_e, tau_n=params.tau_n)


def repeaterless_qber(params: SystemParams) -> tuple[float, float]:
    """(Q_z, Q_x) of a direct link over the full distance, read out on nuclear spins."""
    F0 = electron_pair_fidelity(params.L_tot, params)
    rho = dense.elementary_link_state(F0, params.beta, params.delta)
    flip = params.beta + params.delta
    pz, x_err = dense.dense_outcome_distributions(rho, 1, flip, flip)
    t = tally_from_distribution(pz, x_err, 1.0, 1)
    return t.z_err, t.x_err


def repeaterless_rate(params: SystemParams) -> float:
    """Direct-transmission key rate ``P0(L_tot) r_inf / (2 T0)``."""
    return repeaterless_record(params).R_qkd


def repeaterless_record(params: SystemParams) -> KeyRateRecord:
    link = params.link(0)
    T0 = timing.t0(params.L_tot, params.c)
    P0 = timing.p0(params.L_tot, link)
    qz, qx = repeaterless_qber(params)
    r = secret_fraction_safe(qz, qx)
    R0 = P0 * r / (2 * T0)
    return KeyRateRecord(
        protocol=REPEATERLESS, n=0, L0=params.L_tot, Q_z=qz, Q_x=qx, acceptance=1.0,
        r_inf=r, R=P0 / T0, R_qkd=R0, R_qkd_no_acceptance=R0, engine="dense",
        decoder="majority", **_common(params),
    )


def key_rate_record(protocol, n: int, params: SystemParams, engine: str = "approx-analytic",
                    decoder: str = "best-of-both", samples: int = 10_000, seed=0,
                    n_max: int | None = None, workers: int = 1) -> KeyRateRecord:
    """Evaluate one protocol at one nesting level."""
    if protocol == REPEATERLESS:
        return repeaterless_record(params)
    cfg = RepeaterConfig(protocol, n, engine, decoder, samples, seed, n_max)
    res = evaluate(cfg, params, workers)
    d = res.decoded
    r = secret_fraction_safe(d.Q_z, d.Q_x)
    times = res.schedule.times
    R = 1.0 / (times.T1 + times.T2)
    nv = nv_count(cfg.protocol, n)
    acc = d.acceptance if np.isfinite(d.acceptance) else 0.0
    rq = R * r * acc / nv
    # first-order propagation of the sampling error of both error rates
    if r > 0:
        sr = math.hypot(_entropy_slope(d.Q_z) * d.stderr_z, _entropy_slope(d.Q_x) * d.stderr_x)
        srq = R / nv * math.hypot(acc * sr, r * d.stderr_acceptance)
    else:
        srq = 0.0
    base_seed = seed[0] if isinstance(seed, (tuple, list)) else seed
    return KeyRateRecord(
        protocol=cfg.protocol.value, n=n, L0=params.L_tot / 2**n, Q_z=d.Q_z, Q_x=d.Q_x,
        acceptance=acc, r_inf=r, R=R, R_qkd=rq, R_qkd_no_acceptance=R * r / nv,
        engine=engine, decoder=d.decoder,
        samples=samples if engine == "pauli" else 0,
        seed=base_seed if engine == "pauli" else 0,
        stderr_Qz=d.stderr_z, stderr_Qx=d.stderr_x, stderr_R_qkd=srq,
        branches="/".join(times.branches), **_common(params),
    )


def optimize_nesting(protocol, params: SystemParams, n_range: Iterable[int] = DEFAULT_N_RANGE,
                     seed=0, **kw) -> KeyRateRecord:
    """Best record over ``n_range``; ties go to the smaller ``n``.

    Monte Carlo streams are keyed by ``(seed, n)``, so each level draws
    independent samples reproducibly.
    """
    if protocol == REPEATERLESS:
        return repeaterless_record(params)
    n_values = sorted(set(n_range))
    if not n_values:
        raise ValueError("empty nesting range")
    best = None
    for n in n_values:
        base = list(seed) if isinstance(seed, (tuple, list)) else [seed]
        rec = key_rate_record(protocol, n, params, seed=tuple(base + [n]), **kw)
        if best is None or rec.R_qkd > best.R_qkd:
            best = rec
    return best


@dataclass(frozen=True)
class RegionPoint:
    params: SystemParams
    label: str
    best: KeyRateRecord | None
    records: tuple
    ambiguous: bool


def classify_point(params: SystemParams, protocols: Sequence = ("P1", "P2", "P3", "P4"),
                   include_repeaterless: bool = True, **kw) -> RegionPoint:
    """Protocol (or ``repeaterless`` / ``none``) with the largest normalized rate."""
    records = [optimize_nesting(p, params, **kw) for p in protocols]
    if include_repeaterless:
        records.append(repeaterless_record(params))
    ranked = sorted(records, key=lambda r: r.R_qkd, reverse=True)
    top = ranked[0]
    if not top.R_qkd > 0:
        return RegionPoint(params, "none", None, tuple(records), False)
    ambiguous = False
    if len(ranked) > 1 and ranked[1].R_qkd > 0:
        gap = top.R_qkd - ranked[1].R_qkd
        ambiguous = gap <= top.stderr_R_qkd + ranked[1].stderr_R_qkd
    return RegionPoint(params, top.protocol, top, tuple(records), ambiguous)


def classify_region(grid: Iterable[SystemParams], **kw) -> list[RegionPoint]:
    """Label every point of a parameter grid (for example over beta, eta_c, L_tot)."""
    return [classify_point(p, **kw) for p in grid]
