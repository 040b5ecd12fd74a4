"""Grant-free sporadic multiuser MC-CDMA link simulator.

Spreading codebooks are circular shifts of per-user random unit-circle
sequences; data symbols pick codewords directly (direct spreading) or
PSK-modulate a shared sequence (conventional baseline).  The receiver
recovers activity and data jointly with greedy matching-pursuit detectors.
"""

__version__ = "0.1.0"

from . import channel, codebook, harness, phy_tx, rx_mud
from .codebook import (
    Codebook,
    build_codebook,
    circular_shift,
    coherence_report,
    design_shift_pattern,
    generate_base_sequences,
    psk_dmin,
)
from .channel import add_awgn, draw_activity, generate_block_fading, superpose
from .harness import SimConfig, measurement_sufficiency, run_sweep, run_trial
from .phy_tx import (
    bits_to_symbols,
    conv_encode,
    deinterleave,
    interleave,
    psk_modulate,
    spread_conventional,
    spread_direct,
)
from .rx_mud import (
    DetectionResult,
    OperationCounters,
    StoppingRule,
    count_expected_ops,
    gmp_detect,
    gomp_detect,
    omp_reference,
    symbols_to_bits,
    viterbi_decode,
)
