"""Protocol pipelines on the dense, Pauli-frame and class-propagation engines."""

from .config import DECODERS, ENGINES, RepeaterConfig, Schedule, SystemParams, build_schedule
from .decode import DecodeResult, FinalStateSummary, decode
from .dense import elementary_link_state, mediated_bsm_instrument, remote_cnot_encode
from .pipeline import ChainResult, evaluate, run_chain

__all__ = [
    "DECODERS", "ENGINES", "RepeaterConfig", "Schedule", "SystemParams", "build_schedule",
    "DecodeResult", "FinalStateSummary", "decode", "elementary_link_state",
    "mediated_bsm_instrument", "remote_cnot_encode", "ChainResult", "evaluate", "run_chain",
]
