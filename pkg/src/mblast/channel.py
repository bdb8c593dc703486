"""Channel, symbol and impairment generators for the uplink model.

The complex system is ``r = H_c A s + v`` with ``H_c`` an M x K matrix of
i.i.d. CN(0, 1/M) entries, ``A = diag(sqrt(P_i))`` the root-power matrix and
``v ~ CN(0, sigma2 I)``.  Detection runs on the real-valued equivalent
``y = H x + n`` where ``x`` stacks real and imaginary symbol parts, ``H`` is
the 2M x 2K block lift of ``H_c A`` and each real noise component has
variance ``sigma2 / 2``.

Every generator is a pure function of its parameters and the supplied
``numpy.random.Generator``; independent trial workers each derive their own
substream, so all operations are safe to call concurrently.
"""

from dataclasses import dataclass

import numpy as np


class UnsupportedLoadError(ValueError):
    """Raised for system loads beta = K/M > 1, which no detector supports."""


@dataclass(frozen=True)
class ComplexChannel:
    """Complex fading matrix plus its dimensions.

    Entries are i.i.d. circularly-symmetric complex Gaussian with per-entry
    variance 1/M so the array-combined receive SNR does not grow with the
    antenna count.
    """

    entries: np.ndarray
    num_rx: int
    num_users: int

    def __post_init__(self):
        if self.entries.shape != (self.num_rx, self.num_users):
            raise ValueError(
                f"channel shape {self.entries.shape} does not match "
                f"(M={self.num_rx}, K={self.num_users})"
            )


@dataclass(frozen=True)
class PowerProfile:
    """Per-user amplitude profile: the diagonal of A, entries sqrt(P_i)."""

    sqrt_powers: np.ndarray

    def __post_init__(self):
        if np.any(self.sqrt_powers < 0):
            raise ValueError("root powers must be nonnegative")

    @property
    def powers(self):
        return self.sqrt_powers**2


@dataclass(frozen=True)
class RealModel:
    """Ground-truth real-valued system: y = H x + n.

    ``h`` is the 2M x 2K lift, ``sigma2`` the noise variance per complex
    dimension and ``beta = K/M`` the load.
    """

    h: np.ndarray
    y: np.ndarray
    sigma2: float
    beta: float

    def __post_init__(self):
        if self.h.shape[0] != self.y.shape[0]:
            raise ValueError("y length does not match the channel row count")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")


@dataclass(frozen=True)
class CsiConfig:
    """Receiver-side channel knowledge model.

    ``pilot_snr`` is the linear pilot-symbol SNR; each real channel entry is
    perturbed by independent zero-mean Gaussian noise of variance
    ``(1/M) * 1/(2 * pilot_snr)`` so the per-entry estimation SNR equals
    ``pilot_snr`` regardless of the array size.  ``noise_var_mismatch`` is
    the fractional half-width X of the uniform noise-variance estimation
    error.  ``perfect=True`` disables both impairments.
    """

    pilot_snr: float = 1.0
    noise_var_mismatch: float = 0.0
    perfect: bool = True

    def __post_init__(self):
        if self.pilot_snr <= 0:
            raise ValueError("pilot_snr must be positive")
        if not 0.0 <= self.noise_var_mismatch < 1.0:
            raise ValueError("noise_var_mismatch must lie in [0, 1)")


def generate_channel(num_users, num_rx, rng):
    """Draw an i.i.d. Rayleigh flat-fading matrix with CN(0, 1/M) entries.

    Deterministic given the generator state.  Loads above beta = 1 are
    rejected; beta = 1 itself is accepted (needed for the K = M = 1 SISO
    reference case) although the iterative detectors' convergence guarantee
    requires beta < 1.
    """
    if num_users <= 0 or num_rx <= 0:
        raise ValueError("K and M must be positive")
    if num_users > num_rx:
        raise UnsupportedLoadError(
            f"unsupported load: K={num_users} users exceed M={num_rx} antennas (beta > 1)"
        )
    scale = np.sqrt(1.0 / (2.0 * num_rx))
    entries = scale * (
        rng.standard_normal((num_rx, num_users))
        + 1j * rng.standard_normal((num_rx, num_users))
    )
    return ComplexChannel(entries=entries, num_rx=num_rx, num_users=num_users)


def fixed_unit_channel(num_users, num_rx):
    """Deterministic all-ones channel with unit column norm (AWGN reference).

    Only single-user systems are meaningful here: with K > 1 the columns
    would be identical and the users inseparable.
    """
    if num_users != 1:
        raise ValueError("the fixed unit (AWGN) channel supports K=1 only")
    entries = np.full((num_rx, num_users), 1.0 / np.sqrt(num_rx), dtype=complex)
    return ComplexChannel(entries=entries, num_rx=num_rx, num_users=num_users)


def lift_to_real(channel, profile):
    """Real 2M x 2K equivalent of the complex channel times the power matrix.

    The block structure is ``[[Re, -Im], [Im, Re]]`` of ``H_c A``, chosen so
    that multiplying the stacked vector [Re s; Im s] reproduces
    [Re(H_c A s); Im(H_c A s)] exactly.
    """
    a = np.asarray(profile.sqrt_powers, dtype=float)
    if a.shape != (channel.num_users,):
        raise ValueError(
            f"power profile length {a.shape} does not match K={channel.num_users}"
        )
    re = channel.entries.real * a
    im = channel.entries.imag * a
    return np.block([[re, -im], [im, re]])


def transmit(h_true, x, sigma2, rng):
    """Pass symbols through the real channel and add Gaussian noise.

    Noise components are i.i.d. with variance ``sigma2 / 2`` each, so the
    complex noise has variance ``sigma2`` per receive antenna.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != h_true.shape[1]:
        raise ValueError("symbol vector length does not match the channel")
    if np.any(np.abs(x) != 1.0):
        raise ValueError("symbols must be +1/-1 (real constellation components)")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    y = h_true @ x
    if sigma2 > 0:
        y = y + rng.standard_normal(h_true.shape[0]) * np.sqrt(sigma2 / 2.0)
    return y


def impair_csi(h_true, cfg, rng):
    """Receiver channel estimate under pilot-limited estimation noise.

    Every real entry of the lifted matrix is independently perturbed; the
    perturbation variance is ``(1/M) / (2 * pilot_snr)`` with M inferred from
    the row count (rows = 2M).
    """
    if cfg.perfect:
        return h_true.copy()
    num_rx = h_true.shape[0] // 2
    err_var = 1.0 / (2.0 * cfg.pilot_snr * num_rx)
    return h_true + rng.standard_normal(h_true.shape) * np.sqrt(err_var)


def perturb_noise_variance(sigma2, mismatch, rng):
    """Noise-variance estimate drawn uniformly from (1 +/- X) * sigma2."""
    if not 0.0 <= mismatch < 1.0:
        raise ValueError("mismatch fraction must lie in [0, 1)")
    return rng.uniform((1.0 - mismatch) * sigma2, (1.0 + mismatch) * sigma2)


def generate_powers(num_users, profile="equal", rng=None, std_db=8.0, path=None):
    """Per-user power profile.

    ``equal``      -- all-ones (the equal-SNR setup).
    ``lognormal``  -- shadowing stand-in: 10*log10(P) ~ N(0, std_db^2),
                      normalized to unit mean power per draw.
    ``file``       -- linear powers read from ``path``, one value per line,
                      '#' comments allowed; must supply exactly K values.
    """
    if profile == "equal":
        return PowerProfile(sqrt_powers=np.ones(num_users))
    if profile == "lognormal":
        if std_db < 0:
            raise ValueError("std_db must be nonnegative")
        powers = 10.0 ** (rng.standard_normal(num_users) * std_db / 10.0)
        powers /= powers.mean()
        return PowerProfile(sqrt_powers=np.sqrt(powers))
    if profile == "file":
        powers = read_power_file(path)
        if powers.shape[0] != num_users:
            raise ValueError(
                f"power file {path} lists {powers.shape[0]} values, expected K={num_users}"
            )
        return PowerProfile(sqrt_powers=np.sqrt(powers))
    raise ValueError(f"unknown power profile {profile!r}")


def read_power_file(path):
    """Parse a power-profile file: one nonnegative linear power per line."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                value = float(line)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from exc
            if value < 0 or not np.isfinite(value):
                raise ValueError(f"{path}:{lineno}: powers must be finite and nonnegative")
            values.append(value)
    if not values:
        raise ValueError(f"{path}: no power values found")
    return np.asarray(values, dtype=float)
