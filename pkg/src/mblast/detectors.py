"""Detector bank for the real-valued uplink model.

All detectors are pure functions of a :class:`DetectorInput` (the receiver's
channel estimate, the received vector, its noise-variance estimate and the
load).  Each invocation returns its own multiply-accumulate (MAC) counter;
there is no shared mutable state, so concurrent use is safe.

Iterative detectors (:func:`soft_pic`, :func:`m_blast`) run the
self-consistency recursion

    m^{t+1} = tanh((2/sigma2) (R_diag m^t + H^T z^t))
    z^t     = y - H m^t + o^{t-1}
    o^{t-1} = beta z^{t-1} (1 - <(m^t)^2>)

from zero initial conditions.  Soft PIC is the same recursion with the
residual memory ``o`` pinned to zero.  The self-interference term uses the
cancelling sign convention (+diag(H^T H) m), which makes the o = 0 case
coincide exactly with classical per-user soft PIC; the literal
diag(sigma^2 R / 2) sign is available behind ``literal_self_term`` for
comparison.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import kernels

# Sentinel reported when the residual of a SINR fit is numerically zero
# (e.g. noiseless ZF).
SINR_CAP = 1e12

_DEFAULT_EARLY_EXIT = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    """Gram matrix not positive definite (ZF on a rank-deficient channel)."""


class SinrEstimationError(RuntimeError):
    """Too few trials for a meaningful SINR estimate."""


@dataclass(frozen=True)
class DetectorInput:
    """What the receiver knows: channel estimate, observation, noise estimate.

    ``beta`` is the complex-user load K/M; it feeds the Onsager term of the
    iterative detectors.  beta = 1 is accepted for the SISO reference case
    even though the iterative convergence guarantee needs beta < 1.
    """

    h_est: np.ndarray
    y: np.ndarray
    sigma2_hat: float
    beta: float

    def __post_init__(self):
        if self.h_est.ndim != 2:
            raise ValueError("h_est must be a 2-D matrix")
        if self.y.shape != (self.h_est.shape[0],):
            raise ValueError("y length does not match h_est rows")
        if not self.sigma2_hat > 0:
            raise ValueError("sigma2_hat must be positive")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("load beta must lie in (0, 1]")


@dataclass(frozen=True)
class SoftOutput:
    """Pre-slicer statistics of a one-shot (or layered) detector.

    ``llr`` is the log-likelihood ratio of each +/-1 coordinate (positive
    favors +1); ``macs`` counts real multiply-accumulate operations of the
    invocation.
    """

    soft: np.ndarray
    llr: np.ndarray
    macs: int


@dataclass(frozen=True)
class IterativeState:
    """One iteration of the fixed-point recursion.

    ``m`` is the soft symbol estimate after iteration ``t`` (entries in
    [-1, 1]); ``z`` the corrected residual that produced it; ``o`` the
    Onsager memory computed from (z, m) for the next iteration.
    """

    m: np.ndarray
    z: np.ndarray
    o: np.ndarray
    t: int


@dataclass(frozen=True)
class IterativeTrajectory:
    """Full run of an iterative detector.

    ``m_iterates[i]`` holds the estimate after iteration i+1.  When the
    early-exit rule fires before ``t_max``, the remaining rows repeat the
    converged iterate (further updates are numerically frozen), and
    ``t_run`` records the number of iterations actually computed.
    ``final_arg`` is the tanh argument of the last computed update, i.e.
    half the output LLR.
    """

    m_iterates: np.ndarray
    z_iterates: np.ndarray
    o_iterates: np.ndarray
    final_arg: np.ndarray
    t_run: int
    macs: int

    @property
    def states(self):
        return [
            IterativeState(m=self.m_iterates[t], z=self.z_iterates[t],
                           o=self.o_iterates[t], t=t + 1)
            for t in range(self.m_iterates.shape[0])
        ]

    @property
    def m_final(self):
        return self.m_iterates[-1]


def matched_filter(inp):
    """Matched filter H^T y, scaled by 2/sigma2 so the output is LLR/2."""
    rows, cols = inp.h_est.shape
    soft = (2.0 / inp.sigma2_hat) * (inp.h_est.T @ inp.y)
    return SoftOutput(soft=soft, llr=2.0 * soft, macs=rows * cols)


def _gram_solve(h, y, ridge, check_singular=False):
    """Solve (H^T H + ridge I) s = H^T y; also return diag of the inverse.

    The diagonal of the inverse feeds per-stream error variances (LLRs and
    SIC ordering).  With ``check_singular`` a numerically rank-deficient
    Gram raises :class:`SingularMatrixError` even when rounding produced a
    tiny positive pivot.  Returns (soft, diag_inv, macs).
    """
    rows, n = h.shape
    gram = h.T @ h
    if ridge > 0.0:
        gram = gram + ridge * np.eye(n)
    try:
        factor = cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    if check_singular:
        pivots = np.abs(np.diag(factor[0]))
        if pivots.min() <= pivots.max() * np.sqrt(n * np.finfo(float).eps):
            raise SingularMatrixError(
                f"Gram matrix numerically singular (pivot ratio "
                f"{pivots.min() / pivots.max():.2e})"
            )
    hty = h.T @ y
    soft = cho_solve(factor, hty, check_finite=False)
    inv = cho_solve(factor, np.eye(n), check_finite=False)
    diag_inv = np.diag(inv).copy()
    # Gram + factorization + matched filter + 1 rhs solve + explicit inverse.
    macs = n * n * rows + n**3 // 6 + rows * n + n * n + n**3
    return soft, diag_inv, macs


def zf_detect(inp):
    """Zero-forcing: soft = (H^T H)^{-1} H^T y.

    Raises :class:`SingularMatrixError` when the Gram matrix is not
    invertible.  Per-stream LLRs use the ZF error variance
    (sigma2/2) * diag((H^T H)^{-1}).
    """
    soft, diag_inv, macs = _gram_solve(inp.h_est, inp.y, 0.0, check_singular=True)
    err_var = (inp.sigma2_hat / 2.0) * diag_inv
    return SoftOutput(soft=soft, llr=2.0 * soft / err_var, macs=macs)


def mmse_detect(inp):
    """LMMSE for unit-variance +/-1 symbols: (H^T H + (sigma2/2) I)^{-1} H^T y.

    The per-stream posterior error variance (sigma2/2) * diag(inverse) turns
    the biased MMSE output into an LLR (exact in the single-user case).
    """
    ridge = inp.sigma2_hat / 2.0
    soft, diag_inv, macs = _gram_solve(inp.h_est, inp.y, ridge)
    err_var = ridge * diag_inv
    return SoftOutput(soft=soft, llr=2.0 * soft / err_var, macs=macs)


def _user_groups(n, constellation, num_users):
    """Column groups per complex user and which group dims carry symbols.

    QPSK: user k owns columns (k, K+k), both active.  BPSK on the
    K-column submodel: singletons.  BPSK on the full 2K lift: user k owns
    (k, K+k) but only the real column carries a symbol; the imaginary one is
    a phantom dimension the conventional receiver still models.
    """
    if constellation == "qpsk":
        k = n // 2 if num_users is None else num_users
        if 2 * k != n:
            raise ValueError("QPSK needs an even number of columns (2K)")
        return [(i, i + k) for i in range(k)], 2
    if constellation == "bpsk":
        if num_users is None or num_users == n:
            return [(i,) for i in range(n)], 1
        if 2 * num_users == n:
            return [(i, i + num_users) for i in range(num_users)], 1
        raise ValueError(f"cannot group {n} columns into K={num_users} BPSK users")
    raise ValueError(f"unknown constellation {constellation!r}")


def sic_detect(inp, filter_kind="mmse", constellation="qpsk", num_users=None,
               soft_cancel=False):
    """Ordered successive interference cancellation (V-BLAST).

    Runs K complex-user stages.  Each stage recomputes the chosen linear
    filter (ZF or MMSE) on the deflated system, picks the remaining user
    with the smallest filtered error variance (maximal post-detection SNR),
    slices its symbol dims, subtracts the reconstructed contribution and
    removes the user's columns.  ``soft_cancel=True`` subtracts tanh(LLR/2)
    instead of the hard decision.

    Returns ``(hard, SoftOutput)`` where ``hard`` holds the +/-1 decisions
    (phantom BPSK dimensions report +1) and the SoftOutput carries each
    dimension's pre-slicer statistic and LLR recorded at its detection
    stage.
    """
    if filter_kind not in ("zf", "mmse"):
        raise ValueError(f"unknown SIC filter {filter_kind!r}")
    h = inp.h_est
    n = h.shape[1]
    groups, active_dims = _user_groups(n, constellation, num_users)

    remaining = list(range(len(groups)))
    y_cur = inp.y.copy()
    soft_out = np.zeros(n)
    llr_out = np.zeros(n)
    hard = np.ones(n)
    macs = 0
    ridge = inp.sigma2_hat / 2.0 if filter_kind == "mmse" else 0.0

    gsize = len(groups[0])
    while remaining:
        cols = [c for u in remaining for c in groups[u]]
        h_act = h[:, cols]
        soft, diag_inv, stage_macs = _gram_solve(
            h_act, y_cur, ridge, check_singular=(filter_kind == "zf"))
        macs += stage_macs
        err_var = (inp.sigma2_hat / 2.0) * diag_inv
        # Error variance per user over its symbol-carrying dims only
        # (user idx occupies positions idx*gsize .. idx*gsize+gsize-1).
        per_user = np.array([
            sum(err_var[idx * gsize + j] for j in range(active_dims))
            for idx in range(len(remaining))
        ])
        best = int(np.argmin(per_user))
        user = remaining[best]
        for j in range(active_dims):
            pos = best * gsize + j
            col = groups[user][j]
            s = soft[pos]
            llr = 2.0 * s / err_var[pos]
            decision = 1.0 if s >= 0 else -1.0
            soft_out[col] = s
            llr_out[col] = llr
            hard[col] = decision
            cancel = np.tanh(llr / 2.0) if soft_cancel else decision
            y_cur -= h[:, col] * cancel
            macs += h.shape[0]
        remaining.pop(best)
    return hard, SoftOutput(soft=soft_out, llr=llr_out, macs=macs)


def _iterate(inp, t_max, use_onsager, literal_self_term, early_exit_tol):
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    m_traj, z_traj, o_traj, arg, t_run = kernels.run_iterations(
        inp.h_est, inp.y, inp.sigma2_hat, inp.beta, t_max,
        use_onsager, literal_self_term, early_exit_tol,
    )
    if t_run < t_max:  # pad with the frozen iterate
        reps = t_max - t_run
        m_traj = np.vstack([m_traj, np.repeat(m_traj[-1:], reps, axis=0)])
        z_traj = np.vstack([z_traj, np.repeat(z_traj[-1:], reps, axis=0)])
        o_traj = np.vstack([o_traj, np.repeat(o_traj[-1:], reps, axis=0)])
    rows, cols = inp.h_est.shape
    # column norms once, then per iteration: H m, H^T z, the diagonal
    # self-term and (for the Onsager variant) the residual memory update.
    per_iter = 2 * rows * cols + cols + (rows if use_onsager else 0)
    macs = rows * cols + t_run * per_iter
    return IterativeTrajectory(
        m_iterates=m_traj, z_iterates=z_traj, o_iterates=o_traj,
        final_arg=arg, t_run=t_run, macs=macs,
    )


def soft_pic(inp, t_max, early_exit_tol=_DEFAULT_EARLY_EXIT,
             literal_self_term=False):
    """Classical soft parallel interference cancellation (o = 0)."""
    return _iterate(inp, t_max, False, literal_self_term, early_exit_tol)


def m_blast(inp, t_max, early_exit_tol=_DEFAULT_EARLY_EXIT,
            literal_self_term=False, onsager=True):
    """Onsager-corrected soft PIC.

    With ``onsager=False`` the residual memory is pinned to zero and the
    output is bit-identical to :func:`soft_pic` on the same input (same code
    path, iterate for iterate).
    """
    return _iterate(inp, t_max, onsager, literal_self_term, early_exit_tol)


def hard_decision(soft):
    """Elementwise sign with the tie at exactly 0 resolved to +1."""
    return np.where(np.asarray(soft) < 0, -1.0, 1.0)


def extract_llr(output):
    """Per-coordinate LLRs from any detector output.

    Iterative detectors expose twice the final tanh argument (an estimate m
    = tanh(LLR/2) has LLR = 2 atanh(m)); one-shot detectors carry their LLR
    directly.
    """
    if isinstance(output, IterativeTrajectory):
        return 2.0 * output.final_arg
    if isinstance(output, SoftOutput):
        return output.llr
    raise TypeError(f"no LLR extraction for {type(output).__name__}")


def fixed_point_residual(inp, trajectory, saturation_tol=1e-6):
    """Stationarity mismatch of a converged iterative run.

    At a fixed point every coordinate must balance
    ``atanh(m_i) = (2/sigma2) (g_i m_i + [H^T z]_i)`` where the residual z
    carries the averaged (Onsager-memory) form of the second-order
    correction.  Returns |mismatch| per coordinate.  Coordinates within
    ``saturation_tol`` of +-1 are masked to 0: atanh is ill-conditioned
    there and the balance holds only in the +-infinity limit.
    """
    m = trajectory.m_final
    z = trajectory.z_iterates[-1]
    g = np.einsum("ij,ij->j", inp.h_est, inp.h_est)
    rhs = (2.0 / inp.sigma2_hat) * (g * m + inp.h_est.T @ z)
    free = np.abs(m) < 1.0 - saturation_tol
    res = np.zeros_like(m)
    res[free] = np.abs(np.arctanh(m[free]) - rhs[free])
    return res


def measure_sinr(stat_fn, h_true, sigma2, constellation, num_users, rng,
                 num_trials=200, min_trials=20, h_est=None, sigma2_hat=None,
                 beta=None):
    """Post-detection SINR per complex user for one channel realization.

    Draws ``num_trials`` fresh symbol/noise realizations over the fixed
    channel, collects the detector's pre-slicer statistic via
    ``stat_fn(DetectorInput) -> stat vector``, fits the per-user signal
    coefficient by least squares and reports signal power over residual
    power.  The residual is measured per complex dimension: for BPSK the
    unobserved quadrature is counted at the same noise density, so a K=1
    matched filter reports exactly P/sigma2.

    Noiseless/exact detectors whose residual vanishes report the
    ``SINR_CAP`` sentinel.
    """
    if num_trials < min_trials:
        raise SinrEstimationError(
            f"{num_trials} trials < configured minimum {min_trials}"
        )
    if h_est is None:
        h_est = h_true
    if sigma2_hat is None:
        sigma2_hat = sigma2
    if beta is None:
        beta = num_users / (h_true.shape[0] // 2)
    n = h_true.shape[1]
    stats = np.empty((num_trials, n))
    syms = np.empty((num_trials, n))
    from .channel import transmit  # local import to avoid a cycle at module load

    for t in range(num_trials):
        x = rng.integers(0, 2, size=n) * 2.0 - 1.0
        y = transmit(h_true, x, sigma2, rng)
        inp = DetectorInput(h_est=h_est, y=y, sigma2_hat=sigma2_hat, beta=beta)
        stats[t] = stat_fn(inp)
        syms[t] = x

    # the residual loses one fitted dof per user; rescale by T/(T-1)
    dof = num_trials / max(num_trials - 1, 1)
    if constellation == "qpsk":
        k = n // 2
        stat_c = stats[:, :k] + 1j * stats[:, k:]
        sym_c = syms[:, :k] + 1j * syms[:, k:]
        gain = np.sum(stat_c * np.conj(sym_c), axis=0) / np.sum(np.abs(sym_c) ** 2, axis=0)
        resid = stat_c - gain * sym_c
        noise = dof * np.mean(np.abs(resid) ** 2, axis=0)
        signal = np.abs(gain) ** 2 * np.mean(np.abs(sym_c) ** 2, axis=0)
    elif constellation == "bpsk":
        stat_r = stats[:, :num_users]
        sym_r = syms[:, :num_users]
        gain = np.sum(stat_r * sym_r, axis=0) / np.sum(sym_r**2, axis=0)
        resid = stat_r - gain * sym_r
        # count the unobserved quadrature at the same noise density
        noise = dof * 2.0 * np.mean(resid**2, axis=0)
        signal = gain**2
    else:
        raise ValueError(f"unknown constellation {constellation!r}")

    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(noise > 0, signal / noise, np.inf)
    return np.minimum(np.nan_to_num(sinr, nan=0.0, posinf=SINR_CAP), SINR_CAP)
