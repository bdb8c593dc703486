"""Pure-NumPy implementations of the hot kernels.

Selected by :mod:`mblast.kernels` when the compiled extension is missing or
explicitly disabled.  Must stay semantically identical to ``_core.pyx``
(same update order, same early-exit rule, same tie-breaking); bit-level
equality across the two backends is not guaranteed because the compiled
loops and BLAS may round differently.
"""

import numpy as np


def run_iterations(h, y, sigma2_hat, beta, t_max, use_onsager, literal_self_term,
                   early_exit_tol):
    """Iterative interference-cancellation loop (soft PIC / Onsager-corrected).

    Per iteration t (zero-based, starting from m = z = o = 0):

        z   = y - H m + o
        arg = (2/sigma2_hat) * (s * diag(G) m + H^T z)
        m  <- tanh(arg)
        o   = beta * z * (1 - <m^2>)        (only when use_onsager)

    where ``s`` is +1 for the self-interference-cancelling convention and -1
    for the literal diag(sigma^2 R / 2) sign.  Stops early once the
    sup-norm change of m drops below ``early_exit_tol`` (> 0), after which
    further iterates are numerically frozen.

    Returns ``(m_traj, z_traj, o_traj, arg_last, t_run)`` where the
    trajectories hold iterations ``1..t_run``.
    """
    h = np.ascontiguousarray(h, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    rows, n = h.shape
    gdiag = np.einsum("ij,ij->j", h, h)
    coeff = 2.0 / sigma2_hat
    self_sign = -1.0 if literal_self_term else 1.0

    m = np.zeros(n)
    o = np.zeros(rows)
    m_traj = np.empty((t_max, n))
    z_traj = np.empty((t_max, rows))
    o_traj = np.empty((t_max, rows))
    arg = np.zeros(n)
    t_run = 0
    for t in range(t_max):
        z = y - h @ m + o
        arg = coeff * (self_sign * gdiag * m + h.T @ z)
        m_new = np.tanh(arg)
        if use_onsager:
            o = beta * z * (1.0 - np.mean(m_new * m_new))
        delta = np.max(np.abs(m_new - m)) if n else 0.0
        m = m_new
        m_traj[t] = m
        z_traj[t] = z
        o_traj[t] = o
        t_run = t + 1
        if early_exit_tol > 0.0 and delta < early_exit_tol:
            break
    return m_traj[:t_run], z_traj[:t_run], o_traj[:t_run], arg, t_run


def viterbi_path(llr_pairs, out0, out1, n_tail):
    """Maximum-metric path through a rate-1/2 feedforward trellis.

    ``llr_pairs`` is (steps, 2); ``out0``/``out1`` give the two coded bits
    emitted by each (state, input) transition, following the shift-register
    convention of :mod:`mblast.coding` (next state = (u << (L-2)) | (s >> 1)).
    The branch metric of a transition emitting bits (b0, b1) is
    ``llr0*(1-2*b0) + llr1*(1-2*b1)`` and the total is maximized.  The path
    starts and ends in state 0; the last ``n_tail`` steps admit input 0
    only.  Ties are broken toward the lower predecessor state index.

    Returns the per-step input bits as uint8.
    """
    steps = llr_pairs.shape[0]
    num_states = out0.shape[0]
    top_shift = num_states.bit_length() - 2  # log2(S) - 1
    low_mask = (num_states >> 1) - 1

    # Signed branch gains per (state, input); outputs are static per code.
    sg0 = 1.0 - 2.0 * out0.astype(float)
    sg1 = 1.0 - 2.0 * out1.astype(float)

    states = np.arange(num_states)
    u_of = states >> top_shift          # input bit that leads INTO each state
    low = states & low_mask
    prev0 = 2 * low                     # lower-index predecessor
    prev1 = 2 * low + 1

    neg_inf = -1e300
    pm = np.full(num_states, neg_inf)
    pm[0] = 0.0
    choice = np.empty((steps, num_states), dtype=np.uint8)

    for t in range(steps):
        gain = llr_pairs[t, 0] * sg0 + llr_pairs[t, 1] * sg1  # (S, 2)
        cand0 = pm[prev0] + gain[prev0, u_of]
        cand1 = pm[prev1] + gain[prev1, u_of]
        take1 = cand1 > cand0
        pm = np.where(take1, cand1, cand0)
        choice[t] = take1
        if t >= steps - n_tail:
            pm = np.where(u_of == 1, neg_inf, pm)

    bits = np.empty(steps, dtype=np.uint8)
    cur = 0
    for t in range(steps - 1, -1, -1):
        bits[t] = cur >> top_shift
        cur = 2 * (cur & low_mask) + int(choice[t, cur])
    return bits
