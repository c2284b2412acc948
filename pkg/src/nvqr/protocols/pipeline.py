"""Engine dispatch for one protocol at one nesting level."""

from __future__ import annotations

from dataclasses import dataclass

from ..pauli_engine import sample_tally
from . import analytic, circuits, dense
from .config import RepeaterConfig, Schedule, SystemParams, build_schedule
from .decode import DecodeResult, FinalStateSummary, decode


def run_chain(config: RepeaterConfig, params: SystemParams, workers: int = 1) -> FinalStateSummary:
    """End-to-end summary of the chain described by ``config``.

    The dense and approx-analytic engines are exact given the schedule;
    the Pauli engine samples ``config.samples`` trajectories.
    """
    schedule = build_schedule(config.protocol, config.n, params, config.n_max)
    return run_schedule(schedule, config, workers)


def run_schedule(schedule: Schedule, config: RepeaterConfig, workers: int = 1) -> FinalStateSummary:
    if config.engine == "dense":
        return dense.run_dense(schedule)
    if config.engine == "approx-analytic":
        return analytic.run_analytic(schedule)
    spec = circuits.chain_spec(schedule)
    tally = sample_tally(spec, config.samples, config.seed, workers)
    return FinalStateSummary(tally, schedule.m, "pauli", False)


@dataclass(frozen=True)
class ChainResult:
    config: RepeaterConfig
    schedule: Schedule
    decoded: DecodeResult


def evaluate(config: RepeaterConfig, params: SystemParams, workers: int = 1) -> ChainResult:
    schedule = build_schedule(config.protocol, config.n, params, config.n_max)
    final = run_schedule(schedule, config, workers)
    return ChainResult(config, schedule, decode(final, config.decoder))
