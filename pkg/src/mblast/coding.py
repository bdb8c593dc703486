"""Rate-1/2 convolutional coding with soft-decision Viterbi decoding.

The default code is the ubiquitous constraint-length-7 pair (133, 171)
octal; generators and constraint length are configurable.  Encoding is
zero-tail terminated: ``L`` info bits produce ``2 (L + constraint - 1)``
coded bits and the trellis starts and ends in the zero state.

Bit-to-symbol mapping everywhere in this package is ``symbol = 1 - 2 bit``
(bit 0 -> +1), so a positive channel LLR favors coded bit 0.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels


@dataclass(frozen=True)
class ConvCode:
    """Feedforward rate-1/2 convolutional code with zero-tail termination."""

    constraint_length: int = 7
    generators: tuple = (0o133, 0o171)

    rate = 0.5
    termination = "zero-tail"

    def __post_init__(self):
        if self.constraint_length < 2:
            raise ValueError("constraint length must be >= 2")
        if len(self.generators) != 2:
            raise ValueError("rate-1/2 code needs exactly two generators")
        top = 1 << self.constraint_length
        for g in self.generators:
            if not 0 < g < top:
                raise ValueError(
                    f"generator {g:o} (octal) has degree >= constraint length"
                )

    @property
    def num_states(self):
        return 1 << (self.constraint_length - 1)

    def taps(self, which):
        """Generator taps as a 0/1 array, newest input first."""
        g = self.generators[which]
        lc = self.constraint_length
        return np.array([(g >> (lc - 1 - j)) & 1 for j in range(lc)], dtype=np.uint8)


def conv_encode(info_bits, code=ConvCode()):
    """Encode with zero-tail termination.

    Output interleaves the two generator streams per input step:
    ``g0[0], g1[0], g0[1], g1[1], ...`` over ``L + constraint - 1`` steps.
    The map is linear over GF(2).
    """
    bits = np.asarray(info_bits, dtype=np.uint8)
    if bits.ndim != 1 or bits.size == 0:
        raise ValueError("info_bits must be a nonempty 1-D bit sequence")
    if np.any(bits > 1):
        raise ValueError("info_bits must be 0/1")
    streams = [np.convolve(bits, code.taps(j)) % 2 for j in range(2)]
    coded = np.empty(2 * streams[0].size, dtype=np.uint8)
    coded[0::2] = streams[0]
    coded[1::2] = streams[1]
    return coded


@lru_cache(maxsize=8)
def _output_tables(code):
    """Coded bits emitted by each (state, input) transition.

    State convention: the register holds the current input at its MSB and
    the state s at the low ``constraint-1`` bits; the next state is
    ``(u << (constraint-2)) | (s >> 1)``.
    """
    lc = code.constraint_length
    s_count = code.num_states
    out0 = np.empty((s_count, 2), dtype=np.int8)
    out1 = np.empty((s_count, 2), dtype=np.int8)
    for s in range(s_count):
        for u in (0, 1):
            reg = (u << (lc - 1)) | s
            out0[s, u] = bin(reg & code.generators[0]).count("1") & 1
            out1[s, u] = bin(reg & code.generators[1]).count("1") & 1
    return out0, out1


def viterbi_decode_soft(llrs, code=ConvCode()):
    """Maximum-likelihood sequence decoding from channel LLRs.

    ``llrs`` must hold one value per coded bit (positive favors bit 0).
    The additive branch metric is the LLR correlation with the candidate
    coded bits, so the returned info bits maximize the codeword likelihood;
    path-metric ties resolve toward the lower predecessor state index.
    """
    llrs = np.asarray(llrs, dtype=float)
    tail = code.constraint_length - 1
    if llrs.ndim != 1 or llrs.size % 2 != 0:
        raise ValueError("LLR sequence must contain two values per trellis step")
    steps = llrs.size // 2
    if steps <= tail:
        raise ValueError(
            f"LLR sequence too short: {steps} steps <= {tail} tail steps"
        )
    out0, out1 = _output_tables(code)
    path = kernels.viterbi_path(llrs.reshape(steps, 2), out0, out1, tail)
    return np.asarray(path[:steps - tail], dtype=np.uint8)
