"""Trace reconstruction over the deletion channel.

The package provides bit-string and desert primitives, an instrumented
deletion channel, bitwise majority alignment, the desert-end finder, the
full reconstruction loop and a seeded experiment harness.
"""
from ._accel import USE_NUMBA, backend_name
from .bitstring import BitString, CycSet, Pattern, cyc_set, is_prefix_of_power, leftmost_noncyc, smallest_period
from .bma import BmaResult, check_bma_invariant, goodness, majority_tiebreak, run_bma
from .channel import (
    DeletionRecord,
    InstrumentedTrace,
    RngStream,
    TraceSource,
    WindowBatch,
    last_surviving,
    padded_origin,
    transmit,
    transmit_concat,
)
from .desert import (
    DesertParams,
    Signature,
    TailString,
    desert_end,
    desert_pattern,
    first_deep_in_desert,
    match_right_form,
    signature_from_tail,
    tail_string,
)
from .findend import AllNil, CoarseEstimate, FindEndResult, NoBreakFound, VoteFailed, align, coarse_estimate, find_end
from .params import ReconParams, derive_params
from .pipeline import ReconOutcome, preprocess, reconstruct, reconstruct_string

__version__ = "0.1.0"
