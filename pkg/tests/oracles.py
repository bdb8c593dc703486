"""Independent reference implementations the tests check against.

Everything here deliberately avoids the library's own computation paths:
complex arithmetic instead of the real lift, exhaustive enumeration instead
of iterative detection, brute-force codeword search instead of the trellis.
"""

import itertools

import numpy as np


def complex_product_stacked(h_complex, sqrt_powers, s_complex):
    """[Re(H A s); Im(H A s)] via direct complex arithmetic."""
    r = h_complex @ (sqrt_powers * s_complex)
    return np.concatenate([r.real, r.imag])


def posterior_mean_signs(h, y, sigma2):
    """Exact marginal-posterior-mean signs by enumeration over {+-1}^n.

    Posterior weight exp(-||y - Hx||^2 / sigma2) matches a real model whose
    noise components carry variance sigma2/2.  Ties at exactly 0 resolve to
    +1.  Feasible for n <= ~16.
    """
    n = h.shape[1]
    grid = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    resid = y[None, :] - grid @ h.T
    logw = -np.sum(resid**2, axis=1) / sigma2
    w = np.exp(logw - logw.max())
    mean = (w[:, None] * grid).sum(axis=0) / w.sum()
    return np.where(mean < 0, -1.0, 1.0)


def all_codewords(code, info_len):
    """Every zero-tail codeword of ``info_len`` info bits as +-1 symbols.

    Returns (messages, symbols) with symbols[i] = 1 - 2*encode(messages[i]).
    """
    from mblast.coding import conv_encode

    count = 1 << info_len
    messages = np.array(
        [[(i >> (info_len - 1 - j)) & 1 for j in range(info_len)] for i in range(count)],
        dtype=np.uint8,
    )
    symbols = np.stack([1.0 - 2.0 * conv_encode(m, code) for m in messages])
    return messages, symbols


def ml_decode_bruteforce(llrs, code, info_len, codebook=None):
    """Maximum-likelihood decoding by scoring every codeword.

    The metric is the LLR correlation, identical to the trellis branch
    metric, so Viterbi must return the same message whenever the maximum is
    unique.
    """
    if codebook is None:
        codebook = all_codewords(code, info_len)
    messages, symbols = codebook
    scores = symbols @ np.asarray(llrs, dtype=float)
    return messages[int(np.argmax(scores))]


def awgn_bpsk_ber(eb_n0_db):
    """Q(sqrt(2 Eb/N0)) via erfc."""
    from scipy.special import erfc

    gamma = 10.0 ** (np.asarray(eb_n0_db, dtype=float) / 10.0)
    return 0.5 * erfc(np.sqrt(gamma))
