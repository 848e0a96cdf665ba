"""Link-level baseband simulator for a WiMAX-style OFDM chain over a fading channel."""
from .chanest import ChannelEstimate, equalize, estimate_genie, estimate_ls
from .channel import (
    ChannelProfile,
    ChannelResponse,
    Tap,
    TapState,
    channel_apply,
    effective_channel,
    fading_process,
    noise_variance_for_ebn0,
)
from .dsp import RandomSource, SampleBuffer, SpectrumEstimate, fft, occupied_bandwidth, psd_estimate
from .link import LinkConfig, LinkResult, run_link
from .mac import MacHeader, MacPdu, build_pdu, parse_pdu, serialize_pdu
from .metrics import LinkReport, ber_count, capture_read, capture_write, evm_rms
from .ofdm import (
    DemodOutput,
    FrameConfig,
    OfdmSymbol,
    ofdm_demodulate,
    ofdm_modulate,
    pack_subcarriers,
    qpsk_demap,
    qpsk_map,
    unpack_subcarriers,
)
from .spreading import ChipFrame, PnGenerator, despread, pn_next, spread

__version__ = "0.1.0"
