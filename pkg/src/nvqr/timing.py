"""Heralding probabilities and average waiting times.

Waiting times follow the mean-field picture: every memory in a stage is
assumed to have waited the average time for all ``M`` heralded attempts of
that stage to succeed, ``N(M, q)`` rounds of the stage period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .layout import Protocol


@dataclass(frozen=True)
class LinkParams:
    """Channel and hardware parameters (lengths in km, times in s)."""

    L_tot: float
    n: int
    eta_c: float
    eta_d: float = 0.9
    L_att: float = 22.0
    c: float = 2e5
    T_s: float = 1e-6

    def __post_init__(self):
        if not self.L_tot > 0:
            raise ValueError("L_tot must be positive")
        if self.n < 0 or int(self.n) != self.n:
            raise ValueError("nesting level must be a nonnegative integer")
        for name in ("eta_c", "eta_d"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("L_att", "c", "T_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def L0(self) -> float:
        return self.L_tot / 2**self.n


def transmissivity(L0: float, L_att: float) -> float:
    """Photon survival over half a segment of length ``L0``."""
    if L0 < 0:
        raise ValueError("negative length")
    return math.exp(-L0 / (2 * L_att))


def p0(L0: float, params: LinkParams) -> float:
    """Success probability of one two-photon entangling attempt."""
    eta_t = transmissivity(L0, params.L_att)
    return 0.5 * params.eta_c**2 * eta_t**2 * params.eta_d**2


def t0(L0: float, c: float) -> float:
    if L0 < 0:
        raise ValueError("negative length")
    return L0 / c


def _check_mq(M: int, q: float) -> None:
    if int(M) != M or M < 1:
        raise ValueError(f"M={M} must be a positive integer")
    if not 0 < q <= 1:
        raise ValueError(f"q={q} outside (0, 1]")


def n_attempts_exact(M: int, q: float) -> float:
    """Mean number of rounds until ``M`` parallel Bernoulli(q) trials all succeeded.

    The alternating binomial sum loses about ``M log10(2)`` digits to
    cancellation, so it is evaluated at matching extra precision.
    """
    _check_mq(M, q)
    if q == 1:
        return 1.0
    with mpmath.workprec(64 + 2 * M + int(-math.log2(q)) + 8):
        r = 1 - mpmath.mpf(q)
        total = mpmath.mpf(0)
        binom = mpmath.mpf(1)
        for k in range(1, M + 1):
            binom = binom * (M - k + 1) / k
            term = binom / (1 - r**k)
            total += term if k % 2 else -term
        return float(total)


def n_attempts_rational(M: int, q) -> Fraction:
    """Exact rational value of the alternating sum (reference for tests)."""
    q = Fraction(q)
    r = 1 - q
    return sum(
        Fraction(math.comb(M, k) * (-1) ** (k + 1)) / (1 - r**k) for k in range(1, M + 1)
    )


def n_attempts_scaled(M: int, q: float, halvings: int) -> float:
    """``(3/2)**h N(M / 2**h, q)``, an upper bound for small ``q``."""
    if halvings < 0:
        raise ValueError("halvings must be nonnegative")
    if M % 2**halvings:
        raise ValueError(f"M={M} is not divisible by 2**{halvings}")
    return 1.5**halvings * n_attempts_exact(M // 2**halvings, q)


def n_attempts(M: int, q: float, n: int, n_max: int | None = None) -> tuple[float, str]:
    """Dispatch to the exact or scaled evaluation; returns ``(value, branch)``.

    With ``n_max=None`` the exact sum is always used. Otherwise nesting levels
    above ``n_max`` fall back to the ``3/2`` scaling rule.
    """
    if n_max is None or n <= n_max:
        return n_attempts_exact(M, q), "exact"
    h = n - n_max
    while h > 0 and M % 2**h:
        h -= 1
    if h == 0:
        return n_attempts_exact(M, q), "exact"
    return n_attempts_scaled(M, q, h), f"scaled({h})"


@dataclass(frozen=True)
class WaitingTimes:
    T0: float
    T1: float
    T2: float
    p_link: float
    p_swap: float
    branches: tuple[str, str] = field(default=("exact", "exact"))


def t1(protocol, link: LinkParams, n_max: int | None = None) -> float:
    return waiting_times(protocol, link, n_max).T1


def t2(protocol, link: LinkParams, n_max: int | None = None) -> float:
    return waiting_times(protocol, link, n_max).T2


def waiting_times(protocol, link: LinkParams, n_max: int | None = None) -> WaitingTimes:
    """T0, T1 and T2 of one protocol at the nesting level stored in ``link``."""
    protocol = Protocol.parse(protocol)
    n = link.n
    if n < 1:
        raise ValueError("protocol pipelines need n >= 1")
    L0 = link.L0
    T0 = t0(L0, link.c)
    p_link = p0(L0, link)
    N1, b1 = n_attempts(protocol.link_pairs(n), p_link, n, n_max)
    if protocol.remote_mediator:
        p_swap, period = p_link, T0
    else:
        p_swap, period = p0(0.0, link), link.T_s
    N2, b2 = n_attempts(protocol.mediator_pairs(n), p_swap, n, n_max)
    return WaitingTimes(T0, N1 * T0, N2 * period, p_link, p_swap, (b1, b2))
