"""Parameter containers and the decoherence schedule of one chain."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .. import noise, timing
from ..layout import Protocol

ENGINES = ("dense", "pauli", "approx-analytic")
DECODERS = ("majority", "error-detect", "best-of-both")


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters shared by all protocols (km, s, probabilities)."""

    beta: float = 1e-3
    delta: float = 1e-4
    tau_e: float = 10e-3
    tau_n: float = 1.0
    eta_c: float = 0.3
    eta_d: float = 0.9
    L_tot: float = 100.0
    L_att: float = 22.0
    c: float = 2e5
    T_s: float = 1e-6

    def __post_init__(self):
        for name in ("beta", "delta", "eta_c", "eta_d"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.beta + self.delta > 0.5:
            raise ValueError("beta + delta must not exceed 1/2")
        # delegate the remaining checks
        self.decoherence
        self.link(0)

    @property
    def decoherence(self) -> noise.DecoherenceParams:
        return noise.DecoherenceParams(self.tau_e, self.tau_n)

    def link(self, n: int) -> timing.LinkParams:
        return timing.LinkParams(
            L_tot=self.L_tot, n=n, eta_c=self.eta_c, eta_d=self.eta_d,
            L_att=self.L_att, c=self.c, T_s=self.T_s,
        )

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    @classmethod
    def noiseless(cls, **kw) -> "SystemParams":
        """No gate or readout errors and practically infinite coherence."""
        base = dict(beta=0.0, delta=0.0, tau_e=1e300, tau_n=1e300)
        base.update(kw)
        return cls(**base)


@dataclass(frozen=True)
class RepeaterConfig:
    protocol: Protocol
    n: int
    engine: str = "approx-analytic"
    decoder: str = "best-of-both"
    samples: int = 100_000
    seed: int | tuple = 0
    n_max: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("protocol pipelines need an integer n >= 1")
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.samples < 1:
            raise ValueError("samples must be positive")


@dataclass(frozen=True)
class Schedule:
    """Every number a pipeline needs, derived once from the parameters.

    ``link_fidelity`` is the Bell fidelity the block map assigns to each
    nuclear pair after waiting T1; ``pre_swap_fidelity`` is the fidelity of
    the block map applied right before swapping (six-qubit for encoded
    links, two-qubit otherwise).
    """

    protocol: Protocol
    n: int
    beta: float
    delta: float
    F0: float
    link_fidelity: float
    pre_swap_fidelity: float
    mediator_fidelity: float
    times: timing.WaitingTimes = field(repr=False)

    @property
    def m(self) -> int:
        return self.protocol.code_size

    @property
    def nuclear_flip(self) -> float:
        return self.beta + self.delta

    @property
    def alice_flip(self) -> float:
        return self.beta + self.delta

    @property
    def bob_flip(self) -> float:
        # remote-mediator chains end on an electron spin at Bob's node
        return self.delta if self.protocol.remote_mediator else self.beta + self.delta


def electron_pair_fidelity(L0: float, params: SystemParams) -> float:
    """Werner fidelity of a freshly heralded electron pair over one segment."""
    T0 = timing.t0(L0, params.c)
    return noise.lambda4(noise.lambda2(T0, params.tau_e))


def build_schedule(protocol, n: int, params: SystemParams, n_max: int | None = None) -> Schedule:
    protocol = Protocol.parse(protocol)
    link = params.link(n)
    times = timing.waiting_times(protocol, link, n_max)
    F0 = electron_pair_fidelity(link.L0, params)
    lam_T1 = noise.lambda2(times.T1, params.tau_n)
    lam_T2 = noise.lambda2(times.T2, params.tau_n)
    pre = noise.lambda64(lam_T2) if protocol.encoded else noise.lambda4(lam_T2)
    return Schedule(
        protocol=protocol,
        n=n,
        beta=params.beta,
        delta=params.delta,
        F0=F0,
        link_fidelity=noise.lambda4(lam_T1),
        pre_swap_fidelity=pre,
        mediator_fidelity=F0 if protocol.remote_mediator else 1.0,
        times=times,
    )
