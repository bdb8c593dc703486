"""Reproducible Monte-Carlo experiments: BER sweeps, convergence studies,
SINR transfer curves and coded runs.

Determinism contract
--------------------
Every trial owns a counter-based Philox substream keyed by
``(master_seed, study_tag, point_index, trial_index)`` and draws in a fixed
order, so trial i is reproducible in isolation.  Trials
are scheduled in fixed-size blocks and the stop rule is evaluated only at
block boundaries; per-detector statistics are integer sums over the
resulting fixed trial set.  Consequently identical (config, seed) pairs
produce bit-identical results for any worker count.

Paired fairness: at a grid point all detectors consume the same channel,
symbol, noise and CSI realizations.
"""

import math
import multiprocessing
from dataclasses import dataclass

import numpy as np

from .channel import (
    CsiConfig,
    fixed_unit_channel,
    generate_channel,
    generate_powers,
    impair_csi,
    lift_to_real,
    perturb_noise_variance,
    transmit,
)
from .coding import ConvCode, conv_encode, viterbi_decode_soft
from .detectors import (
    DetectorInput,
    extract_llr,
    hard_decision,
    m_blast,
    matched_filter,
    measure_sinr,
    mmse_detect,
    sic_detect,
    soft_pic,
    zf_detect,
)

WILSON_Z = 1.959963984540054  # two-sided 95%

DETECTOR_KINDS = ("mf", "zf", "mmse", "zf-sic", "mmse-sic", "pic", "mblast")
ITERATIVE_KINDS = ("pic", "mblast")

# study tags keeping the RNG substreams of different study types disjoint
_STUDY_BER = 0
_STUDY_CONV = 1
_STUDY_SINR = 2

_UNCODED_BLOCK = 512
_CODED_BLOCK = 16


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class DetectorSpec:
    """One detector of the comparison set.

    ``iterations`` applies to the iterative kinds only; ``label`` defaults
    to the kind and keys every result table.
    """

    kind: str
    iterations: int = 10
    label: str = ""
    literal_self_term: bool = False
    soft_cancel: bool = False

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ConfigError(f"unknown detector kind {self.kind!r}")
        if self.kind in ITERATIVE_KINDS and self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not self.label:
            object.__setattr__(self, "label", self.kind)


@dataclass(frozen=True)
class CsiSpec:
    """Sweep-level CSI description; the pilot SNR tracks the data SNR."""

    perfect: bool = False
    pilot_snr_offset_db: float = 6.0
    noise_var_mismatch: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.noise_var_mismatch < 1.0:
            raise ConfigError("noise_var_mismatch must lie in [0, 1)")


@dataclass(frozen=True)
class PowerSpec:
    profile: str = "equal"
    std_db: float = 8.0
    path: str = ""

    def __post_init__(self):
        if self.profile not in ("equal", "lognormal", "file"):
            raise ConfigError(f"unknown power profile {self.profile!r}")
        if self.profile == "file" and not self.path:
            raise ConfigError("power profile 'file' needs a path")


@dataclass(frozen=True)
class CodingSpec:
    block_info_bits: int = 128
    constraint_length: int = 7
    generators: tuple = (0o133, 0o171)
    interleave: bool = False

    def __post_init__(self):
        if self.block_info_bits < 1:
            raise ConfigError("block_info_bits must be >= 1")
        ConvCode(self.constraint_length, tuple(self.generators))  # validates

    def code(self):
        return ConvCode(self.constraint_length, tuple(self.generators))


@dataclass(frozen=True)
class StopRule:
    """Per grid point: stop once every detector saw ``min_errors`` bit
    errors, or after ``max_trials`` trials, whichever first."""

    min_errors: int = 200
    max_trials: int = 0

    def __post_init__(self):
        if self.min_errors < 1:
            raise ConfigError("min_errors must be >= 1")
        if self.max_trials < 1:
            raise ConfigError("max_trials must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    num_users: int = 8
    num_rx: int = 64
    constellation: str = "bpsk"
    channel_model: str = "rayleigh"
    detectors: tuple = (DetectorSpec("mmse"), DetectorSpec("mblast", iterations=5))
    eb_n0_grid_db: tuple = (0.0, 2.0, 4.0, 6.0)
    csi: CsiSpec = CsiSpec()
    power: PowerSpec = PowerSpec()
    coding: CodingSpec = None
    stop: StopRule = StopRule(min_errors=200, max_trials=250_000)
    master_seed: int = 1
    bpsk_baseline_lift: str = "complex"
    sinr_realizations: int = 50
    sinr_symbol_trials: int = 100

    def __post_init__(self):
        self.validate()

    # -- derived quantities ------------------------------------------------

    @property
    def beta(self):
        return self.num_users / self.num_rx

    @property
    def bits_per_symbol(self):
        return 1 if self.constellation == "bpsk" else 2

    @property
    def symbol_energy(self):
        """Mean symbol energy at unit mean power: 1 for BPSK, 2 for QPSK."""
        return float(self.bits_per_symbol)

    @property
    def code_rate(self):
        return 0.5 if self.coding is not None else 1.0

    @property
    def bits_per_trial(self):
        if self.coding is not None:
            return self.num_users * self.coding.block_info_bits
        return self.num_users * self.bits_per_symbol

    def sigma2_for(self, eb_n0_db):
        """Noise variance per complex dimension at a target Eb/N0.

        Eb = Es / (code_rate * bits_per_symbol) with unit mean power, so
        sigma2 = Es / (r * bps * 10^(Eb/N0 / 10)).
        """
        gamma_b = 10.0 ** (eb_n0_db / 10.0)
        return self.symbol_energy / (self.code_rate * self.bits_per_symbol * gamma_b)

    def labels(self):
        return [d.label for d in self.detectors]

    # -- validation ----------------------------------------------------------

    def validate(self):
        if self.num_users < 1 or self.num_rx < 1:
            raise ConfigError("K and M must be positive")
        if self.num_users > self.num_rx:
            raise ConfigError(
                f"unsupported load: K={self.num_users} > M={self.num_rx} (beta > 1)"
            )
        if self.num_users == self.num_rx and self.channel_model != "awgn":
            raise ConfigError(
                f"unsupported load: K=M={self.num_users} needs beta < 1 on fading "
                "channels (only the K=1 'awgn' reference model runs at beta = 1)"
            )
        if self.constellation not in ("bpsk", "qpsk"):
            raise ConfigError(f"unknown constellation {self.constellation!r}")
        if self.channel_model not in ("rayleigh", "awgn"):
            raise ConfigError(f"unknown channel model {self.channel_model!r}")
        if self.channel_model == "awgn" and self.num_users != 1:
            raise ConfigError("the awgn channel model supports K=1 only")
        if not self.detectors:
            raise ConfigError("at least one detector is required")
        labels = self.labels()
        if len(set(labels)) != len(labels):
            raise ConfigError(f"detector labels must be unique, got {labels}")
        if not self.eb_n0_grid_db:
            raise ConfigError("the Eb/N0 grid must be nonempty")
        if self.bpsk_baseline_lift not in ("complex", "real"):
            raise ConfigError("bpsk_baseline_lift must be 'complex' or 'real'")
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise ConfigError("master_seed must fit an unsigned 64-bit integer")
        if self.sinr_realizations < 1 or self.sinr_symbol_trials < 1:
            raise ConfigError("SINR study sizes must be positive")

    # -- (de)serialization ---------------------------------------------------

    def to_dict(self):
        d = {
            "k": self.num_users,
            "m": self.num_rx,
            "constellation": self.constellation,
            "channel_model": self.channel_model,
            "detectors": [
                {
                    "kind": s.kind,
                    "iterations": s.iterations,
                    "label": s.label,
                    "literal_self_term": s.literal_self_term,
                    "soft_cancel": s.soft_cancel,
                }
                for s in self.detectors
            ],
            "eb_n0_grid_db": list(self.eb_n0_grid_db),
            "csi": {
                "perfect": self.csi.perfect,
                "pilot_snr_offset_db": self.csi.pilot_snr_offset_db,
                "noise_var_mismatch": self.csi.noise_var_mismatch,
            },
            "power": {
                "profile": self.power.profile,
                "std_db": self.power.std_db,
                "path": self.power.path,
            },
            "coding": None
            if self.coding is None
            else {
                "block_info_bits": self.coding.block_info_bits,
                "constraint_length": self.coding.constraint_length,
                "generators_octal": [oct(g)[2:] for g in self.coding.generators],
                "interleave": self.coding.interleave,
            },
            "stop": {"min_errors": self.stop.min_errors, "max_trials": self.stop.max_trials},
            "seed": self.master_seed,
            "bpsk_baseline_lift": self.bpsk_baseline_lift,
            "sinr": {
                "realizations": self.sinr_realizations,
                "symbol_trials": self.sinr_symbol_trials,
            },
        }
        return d

    @classmethod
    def from_dict(cls, raw):
        try:
            return cls._from_dict(dict(raw))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc

    @classmethod
    def _from_dict(cls, raw):
        known = {
            "k", "m", "constellation", "channel_model", "detectors",
            "eb_n0_grid_db", "csi", "power", "coding", "stop", "seed",
            "bpsk_baseline_lift", "sinr", "workers",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        if not raw.get("detectors"):
            raise ConfigError("config must list at least one detector")
        detectors = []
        for entry in raw.get("detectors", []):
            entry = dict(entry)
            kind = entry.pop("kind")
            spec = DetectorSpec(
                kind=kind,
                iterations=int(entry.pop("iterations", 10)),
                label=entry.pop("label", ""),
                literal_self_term=bool(entry.pop("literal_self_term", False)),
                soft_cancel=bool(entry.pop("soft_cancel", False)),
            )
            if entry:
                raise ConfigError(f"unknown detector keys: {sorted(entry)}")
            detectors.append(spec)

        csi_raw = dict(raw.get("csi", {}))
        csi = CsiSpec(
            perfect=bool(csi_raw.pop("perfect", False)),
            pilot_snr_offset_db=float(csi_raw.pop("pilot_snr_offset_db", 6.0)),
            noise_var_mismatch=float(csi_raw.pop("noise_var_mismatch", 0.01)),
        )
        if csi_raw:
            raise ConfigError(f"unknown csi keys: {sorted(csi_raw)}")

        power_raw = dict(raw.get("power", {}))
        power = PowerSpec(
            profile=power_raw.pop("profile", "equal"),
            std_db=float(power_raw.pop("std_db", 8.0)),
            path=power_raw.pop("path", ""),
        )
        if power_raw:
            raise ConfigError(f"unknown power keys: {sorted(power_raw)}")

        coding = None
        if raw.get("coding") is not None:
            coding_raw = dict(raw["coding"])
            gens = coding_raw.pop("generators_octal", ["133", "171"])
            coding = CodingSpec(
                block_info_bits=int(coding_raw.pop("block_info_bits", 128)),
                constraint_length=int(coding_raw.pop("constraint_length", 7)),
                generators=tuple(int(str(g), 8) for g in gens),
                interleave=bool(coding_raw.pop("interleave", False)),
            )
            if coding_raw:
                raise ConfigError(f"unknown coding keys: {sorted(coding_raw)}")

        num_users = int(raw["k"])
        num_rx = int(raw["m"])
        constellation = raw.get("constellation", "bpsk")
        bits_per_trial = (
            num_users * coding.block_info_bits
            if coding is not None
            else num_users * (1 if constellation == "bpsk" else 2)
        )
        stop_raw = dict(raw.get("stop", {}))
        min_errors = int(stop_raw.pop("min_errors", 200))
        if "max_trials" in stop_raw and "max_bits" in stop_raw:
            raise ConfigError("give either stop.max_trials or stop.max_bits, not both")
        if "max_trials" in stop_raw:
            max_trials = int(stop_raw.pop("max_trials"))
        else:
            max_bits = int(stop_raw.pop("max_bits", 2_000_000))
            max_trials = max(1, math.ceil(max_bits / bits_per_trial))
        if stop_raw:
            raise ConfigError(f"unknown stop keys: {sorted(stop_raw)}")

        sinr_raw = dict(raw.get("sinr", {}))
        sinr_realizations = int(sinr_raw.pop("realizations", 50))
        sinr_symbol_trials = int(sinr_raw.pop("symbol_trials", 100))
        if sinr_raw:
            raise ConfigError(f"unknown sinr keys: {sorted(sinr_raw)}")

        return cls(
            num_users=num_users,
            num_rx=num_rx,
            constellation=constellation,
            channel_model=raw.get("channel_model", "rayleigh"),
            detectors=tuple(detectors),
            eb_n0_grid_db=tuple(float(v) for v in raw.get("eb_n0_grid_db", [])),
            csi=csi,
            power=power,
            coding=coding,
            stop=StopRule(min_errors=min_errors, max_trials=max_trials),
            master_seed=int(raw.get("seed", 1)),
            bpsk_baseline_lift=raw.get("bpsk_baseline_lift", "complex"),
            sinr_realizations=sinr_realizations,
            sinr_symbol_trials=sinr_symbol_trials,
        )


# ---------------------------------------------------------------------------
# result containers

@dataclass(frozen=True)
class BerPoint:
    eb_n0_db: float
    bits: int
    errors: int
    ber: float
    ci_low: float
    ci_high: float
    macs: int


@dataclass(frozen=True)
class BerCurve:
    label: str
    points: tuple


@dataclass(frozen=True)
class ConvergencePoint:
    label: str
    iteration: int
    bits: int
    errors: int
    ber: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class SinrPoint:
    snr_db: float
    sinr_linear: float
    ci_low: float
    ci_high: float


def wilson_interval(errors, bits, z=WILSON_Z):
    """Wilson score interval for a binomial proportion."""
    if bits == 0:
        return 0.0, 1.0
    p = errors / bits
    denom = 1.0 + z * z / bits
    center = (p + z * z / (2 * bits)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / bits + z * z / (4 * bits * bits))
    return max(0.0, center - half), min(1.0, center + half)


def eb_n0_at_ber(points, target=0.01):
    """Eb/N0 (dB) where a BER curve crosses ``target``.

    Log-linear interpolation between the first bracketing grid pair; points
    with zero recorded errors are continuity-corrected to half an error.
    Returns NaN when the curve never crosses.
    """
    xs = [p.eb_n0_db for p in points]
    bers = [p.ber if p.errors > 0 else 0.5 / max(p.bits, 1) for p in points]
    for i in range(len(xs) - 1):
        if bers[i] >= target >= bers[i + 1] and bers[i] > bers[i + 1]:
            li, lj = math.log10(bers[i]), math.log10(bers[i + 1])
            frac = (math.log10(target) - li) / (lj - li)
            return xs[i] + frac * (xs[i + 1] - xs[i])
    return float("nan")


# ---------------------------------------------------------------------------
# per-trial machinery

def trial_rng(master_seed, study, point_idx, trial_idx):
    """Counter-based substream; reproducible in isolation.

    The (study, point, trial) coordinates are packed into the second Philox
    key word, so every trial owns a distinct 128-bit key and streams are
    independent by construction.
    """
    if not 0 <= point_idx < (1 << 16):
        raise ValueError("point index out of the packable range")
    if not 0 <= trial_idx < (1 << 40):
        raise ValueError("trial index out of the packable range")
    word = (study << 56) | (point_idx << 40) | trial_idx
    key = np.array([master_seed, word], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw_model(cfg, rng, sigma2):
    """Channel, powers and lifted matrices for one realization.

    Draw order (fixed): channel entries, power profile.  Returns the full
    2M x 2K lift and the K-column BPSK submodel view (None for QPSK).
    """
    if cfg.channel_model == "awgn":
        ch = fixed_unit_channel(cfg.num_users, cfg.num_rx)
    else:
        ch = generate_channel(cfg.num_users, cfg.num_rx, rng)
    if cfg.power.profile == "equal":
        prof = generate_powers(cfg.num_users, "equal")
    elif cfg.power.profile == "lognormal":
        prof = generate_powers(cfg.num_users, "lognormal", rng, std_db=cfg.power.std_db)
    else:
        prof = generate_powers(cfg.num_users, "file", path=cfg.power.path)
    h_full = lift_to_real(ch, prof)
    h_sub = h_full[:, : cfg.num_users] if cfg.constellation == "bpsk" else None
    return h_full, h_sub


def _impair(cfg, rng, h_full, sigma2):
    """Receiver-side knowledge: (h_est_full, sigma2_hat).

    Draw order (fixed): CSI perturbation, then the noise-variance estimate.
    The pilot SNR sits ``pilot_snr_offset_db`` above the data-symbol SNR
    Es/sigma2.
    """
    if cfg.csi.perfect:
        return h_full, sigma2
    data_snr = cfg.symbol_energy / sigma2
    pilot_snr = data_snr * 10.0 ** (cfg.csi.pilot_snr_offset_db / 10.0)
    csi = CsiConfig(pilot_snr=pilot_snr,
                    noise_var_mismatch=cfg.csi.noise_var_mismatch, perfect=False)
    h_est = impair_csi(h_full, csi, rng)
    sigma2_hat = perturb_noise_variance(sigma2, cfg.csi.noise_var_mismatch, rng)
    return h_est, sigma2_hat


def _detector_input(cfg, spec, h_est_full, h_est_sub, y, sigma2_hat):
    """Route each detector to its model view.

    QPSK: everything runs on the full 2K lift.  BPSK: the iterative
    detectors and the matched filter use the K-column real submodel; the
    classical baselines (ZF/MMSE/SIC) default to the full lift, which is
    exactly their conventional complex-domain form, unless
    ``bpsk_baseline_lift`` is set to "real".
    """
    use_sub = cfg.constellation == "bpsk" and (
        spec.kind in ("pic", "mblast", "mf") or cfg.bpsk_baseline_lift == "real"
    )
    h = h_est_sub if use_sub else h_est_full
    return DetectorInput(h_est=h, y=y, sigma2_hat=sigma2_hat, beta=cfg.beta)


def _run_detector(cfg, spec, inp, record_iters=False):
    """One detector invocation.

    Returns (decisions over symbol dims, macs, per-iteration decisions or
    None, raw output).  In BPSK mode symbol dims are the first K
    coordinates of whatever lift the detector ran on.
    """
    k = cfg.num_users
    n_sym = k if cfg.constellation == "bpsk" else 2 * k
    iters = None
    if spec.kind == "mf":
        out = matched_filter(inp)
        dec = hard_decision(out.soft[:n_sym])
    elif spec.kind == "zf":
        out = zf_detect(inp)
        dec = hard_decision(out.soft[:n_sym])
    elif spec.kind == "mmse":
        out = mmse_detect(inp)
        dec = hard_decision(out.soft[:n_sym])
    elif spec.kind in ("zf-sic", "mmse-sic"):
        filter_kind = spec.kind.split("-")[0]
        num_users = k if inp.h_est.shape[1] == 2 * k else None
        hard, out = sic_detect(
            inp, filter_kind=filter_kind, constellation=cfg.constellation,
            num_users=num_users, soft_cancel=spec.soft_cancel,
        )
        dec = hard[:n_sym]
    else:
        runner = soft_pic if spec.kind == "pic" else m_blast
        out = runner(inp, spec.iterations, literal_self_term=spec.literal_self_term)
        dec = hard_decision(out.m_final[:n_sym])
        if record_iters:
            iters = hard_decision(out.m_iterates[:, :n_sym])
    return dec, out.macs, iters, out


def _uncoded_trial(cfg, study, point_idx, trial_idx, sigma2, record_iters):
    """Shared-realization trial; returns per-detector error/mac counts."""
    rng = trial_rng(cfg.master_seed, study, point_idx, trial_idx)
    h_full, h_sub = _draw_model(cfg, rng, sigma2)
    n_sym = cfg.num_users if cfg.constellation == "bpsk" else 2 * cfg.num_users
    x = rng.integers(0, 2, size=n_sym) * 2.0 - 1.0
    h_tx = h_sub if cfg.constellation == "bpsk" else h_full
    y = transmit(h_tx, x, sigma2, rng)
    h_est_full, sigma2_hat = _impair(cfg, rng, h_full, sigma2)
    h_est_sub = h_est_full[:, : cfg.num_users] if cfg.constellation == "bpsk" else None

    errors = np.zeros(len(cfg.detectors), dtype=np.int64)
    macs = np.zeros(len(cfg.detectors), dtype=np.int64)
    iter_errors = None
    for d, spec in enumerate(cfg.detectors):
        inp = _detector_input(cfg, spec, h_est_full, h_est_sub, y, sigma2_hat)
        dec, n_macs, iters, _ = _run_detector(cfg, spec, inp, record_iters)
        errors[d] = int(np.sum(dec != x))
        macs[d] = n_macs
        if iters is not None:
            if iter_errors is None:
                t_make = max(s.iterations for s in cfg.detectors if s.kind in ITERATIVE_KINDS)
                iter_errors = np.zeros((len(cfg.detectors), t_make), dtype=np.int64)
            iter_errors[d, : iters.shape[0]] = np.sum(iters != x, axis=1)
    return errors, macs, iter_errors


def _coded_trial(cfg, study, point_idx, trial_idx, sigma2):
    """One coded block per user: encode, send over fresh channel uses,
    decode each user individually from the detector LLRs.

    Draw order (fixed): power profile (held over the block), interleaver
    permutations, then per channel use: channel, noise, CSI, noise-variance
    estimate.
    """
    rng = trial_rng(cfg.master_seed, study, point_idx, trial_idx)
    k = cfg.num_users
    code = cfg.coding.code()
    block = cfg.coding.block_info_bits

    if cfg.power.profile == "equal":
        prof = generate_powers(k, "equal")
    elif cfg.power.profile == "lognormal":
        prof = generate_powers(k, "lognormal", rng, std_db=cfg.power.std_db)
    else:
        prof = generate_powers(k, "file", path=cfg.power.path)

    info = rng.integers(0, 2, size=(k, block)).astype(np.uint8)
    coded = np.stack([conv_encode(info[u], code) for u in range(k)])
    n_coded = coded.shape[1]  # 2 (block + constraint - 1), always even
    if cfg.coding.interleave:
        perms = np.stack([rng.permutation(n_coded) for _ in range(k)])
        coded_tx = np.take_along_axis(coded, perms, axis=1)
    else:
        perms = None
        coded_tx = coded
    symbols = 1.0 - 2.0 * coded_tx.astype(float)
    n_uses = n_coded if cfg.constellation == "bpsk" else n_coded // 2

    llr_rx = np.zeros((len(cfg.detectors), k, n_coded))
    macs = np.zeros(len(cfg.detectors), dtype=np.int64)
    for j in range(n_uses):
        if cfg.channel_model == "awgn":
            ch = fixed_unit_channel(k, cfg.num_rx)
        else:
            ch = generate_channel(k, cfg.num_rx, rng)
        h_full = lift_to_real(ch, prof)
        h_sub = h_full[:, :k] if cfg.constellation == "bpsk" else None
        if cfg.constellation == "bpsk":
            x = symbols[:, j]
            h_tx = h_sub
        else:
            x = np.concatenate([symbols[:, 2 * j], symbols[:, 2 * j + 1]])
            h_tx = h_full
        y = transmit(h_tx, x, sigma2, rng)
        h_est_full, sigma2_hat = _impair(cfg, rng, h_full, sigma2)
        h_est_sub = h_est_full[:, :k] if cfg.constellation == "bpsk" else None
        for d, spec in enumerate(cfg.detectors):
            inp = _detector_input(cfg, spec, h_est_full, h_est_sub, y, sigma2_hat)
            _, n_macs, _, out = _run_detector(cfg, spec, inp)
            llr = extract_llr(out)
            macs[d] += n_macs
            if cfg.constellation == "bpsk":
                llr_rx[d, :, j] = llr[:k]
            else:
                llr_rx[d, :, 2 * j] = llr[:k]
                llr_rx[d, :, 2 * j + 1] = llr[k:2 * k]

    errors = np.zeros(len(cfg.detectors), dtype=np.int64)
    for d in range(len(cfg.detectors)):
        for u in range(k):
            stream = llr_rx[d, u]
            if perms is not None:
                deint = np.empty_like(stream)
                deint[perms[u]] = stream
                stream = deint
            decoded = viterbi_decode_soft(stream, code)
            errors[d] += int(np.sum(decoded != info[u]))
    return errors, macs, None


def _trial_batch(args):
    """Worker task: run a contiguous trial range and sum the counters."""
    cfg, study, point_idx, sigma2, start, end, record_iters, coded = args
    errors = np.zeros(len(cfg.detectors), dtype=np.int64)
    macs = np.zeros(len(cfg.detectors), dtype=np.int64)
    iter_errors = None
    for trial_idx in range(start, end):
        if coded:
            e, m, it = _coded_trial(cfg, study, point_idx, trial_idx, sigma2)
        else:
            e, m, it = _uncoded_trial(cfg, study, point_idx, trial_idx, sigma2, record_iters)
        errors += e
        macs += m
        if it is not None:
            iter_errors = it if iter_errors is None else iter_errors + it
    return errors, macs, iter_errors


class _Executor:
    """Maps worker tasks over an optional process pool.

    With one worker everything runs in-process; results are reduced in task
    order either way, so the output does not depend on the worker count.
    """

    def __init__(self, workers):
        self.workers = max(1, int(workers))
        self._pool = None
        if self.workers > 1:
            self._pool = multiprocessing.get_context("fork").Pool(self.workers)

    def map(self, fn, tasks):
        if self._pool is None:
            return [fn(t) for t in tasks]
        return self._pool.map(fn, tasks)

    def close(self):
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _run_point(cfg, study, point_idx, sigma2, executor, record_iters, coded):
    """Run one grid point under the stop rule, in fixed-size blocks."""
    block = _CODED_BLOCK if coded else _UNCODED_BLOCK
    per_task = max(1, block // (4 * executor.workers)) if executor.workers > 1 else block
    errors = np.zeros(len(cfg.detectors), dtype=np.int64)
    macs = np.zeros(len(cfg.detectors), dtype=np.int64)
    iter_errors = None
    trials = 0
    while trials < cfg.stop.max_trials:
        n = min(block, cfg.stop.max_trials - trials)
        tasks = []
        start = trials
        while start < trials + n:
            end = min(start + per_task, trials + n)
            tasks.append((cfg, study, point_idx, sigma2, start, end, record_iters, coded))
            start = end
        for e, m, it in executor.map(_trial_batch, tasks):
            errors += e
            macs += m
            if it is not None:
                iter_errors = it if iter_errors is None else iter_errors + it
        trials += n
        if np.all(errors >= cfg.stop.min_errors):
            break
    return trials, errors, macs, iter_errors


def run_ber_sweep(cfg, workers=1):
    """BER (or coded BER when the config carries a code) per detector.

    Returns ``{label: BerCurve}``; all detectors at a grid point share
    realizations, and results are independent of ``workers``.
    """
    coded = cfg.coding is not None
    curves = {label: [] for label in cfg.labels()}
    with _Executor(workers) as executor:
        for point_idx, eb_db in enumerate(cfg.eb_n0_grid_db):
            sigma2 = cfg.sigma2_for(eb_db)
            trials, errors, macs, _ = _run_point(
                cfg, _STUDY_BER, point_idx, sigma2, executor, False, coded
            )
            bits = trials * cfg.bits_per_trial
            for d, label in enumerate(cfg.labels()):
                lo, hi = wilson_interval(int(errors[d]), bits)
                curves[label].append(BerPoint(
                    eb_n0_db=eb_db, bits=bits, errors=int(errors[d]),
                    ber=errors[d] / bits, ci_low=lo, ci_high=hi,
                    macs=int(macs[d]),
                ))
    return {label: BerCurve(label=label, points=tuple(pts))
            for label, pts in curves.items()}


def run_convergence_study(cfg, eb_n0_db, workers=1):
    """Hard-decision BER after every iteration for the iterative detectors,
    plus flat reference lines for the one-shot/SIC detectors.

    Returns a list of :class:`ConvergencePoint` rows (flat detectors repeat
    their BER at every iteration index).
    """
    if not any(s.kind in ITERATIVE_KINDS for s in cfg.detectors):
        raise ConfigError("convergence study needs at least one iterative detector")
    sigma2 = cfg.sigma2_for(eb_n0_db)
    with _Executor(workers) as executor:
        trials, errors, _, iter_errors = _run_point(
            cfg, _STUDY_CONV, 0, sigma2, executor, True, False
        )
    bits = trials * cfg.bits_per_trial
    t_max = max(s.iterations for s in cfg.detectors if s.kind in ITERATIVE_KINDS)
    rows = []
    for d, spec in enumerate(cfg.detectors):
        for t in range(1, t_max + 1):
            if spec.kind in ITERATIVE_KINDS:
                if t > spec.iterations:
                    continue
                errs = int(iter_errors[d, t - 1])
            else:
                errs = int(errors[d])
            lo, hi = wilson_interval(errs, bits)
            rows.append(ConvergencePoint(
                label=spec.label, iteration=t, bits=bits, errors=errs,
                ber=errs / bits, ci_low=lo, ci_high=hi,
            ))
    return rows


def _sinr_realization(args):
    """Mean post-detection SINR per detector for one channel realization."""
    cfg, point_idx, snr_db, realization = args
    rng = trial_rng(cfg.master_seed, _STUDY_SINR, point_idx, realization)
    snr = 10.0 ** (snr_db / 10.0)
    sigma2 = cfg.symbol_energy / snr  # input SNR = Es/sigma2
    h_full, h_sub = _draw_model(cfg, rng, sigma2)
    h_est_full, sigma2_hat = _impair(cfg, rng, h_full, sigma2)
    h_est_sub = h_est_full[:, : cfg.num_users] if cfg.constellation == "bpsk" else None
    h_true = h_sub if cfg.constellation == "bpsk" else h_full

    out = np.empty(len(cfg.detectors))
    for d, spec in enumerate(cfg.detectors):
        use_sub = cfg.constellation == "bpsk" and (
            spec.kind in ("pic", "mblast", "mf") or cfg.bpsk_baseline_lift == "real"
        )
        h_est = h_est_sub if use_sub else h_est_full

        def stat_fn(inp, _spec=spec):
            _, _, _, raw = _run_detector(cfg, _spec, inp)
            stat = raw.final_arg if _spec.kind in ITERATIVE_KINDS else raw.soft
            return stat[: h_true.shape[1]]

        # identical substream per detector: all detectors score the same
        # symbol/noise draws (the detectors themselves consume no randomness)
        sub_rng = trial_rng(cfg.master_seed, _STUDY_SINR + 8, point_idx, realization)
        sinr = measure_sinr(
            stat_fn, h_true, sigma2, cfg.constellation, cfg.num_users, sub_rng,
            num_trials=cfg.sinr_symbol_trials, min_trials=1,
            h_est=h_est, sigma2_hat=sigma2_hat, beta=cfg.beta,
        )
        out[d] = float(np.mean(sinr))
    return out


def run_sinr_study(cfg, snr_grid_db, workers=1):
    """Input SNR -> mean post-detection SINR transfer table per detector.

    SINRs are estimated per channel realization (conditioned on H) and
    averaged over realizations and users; the CI is a normal approximation
    over realization means.
    """
    results = {label: [] for label in cfg.labels()}
    with _Executor(workers) as executor:
        for point_idx, snr_db in enumerate(snr_grid_db):
            tasks = [(cfg, point_idx, float(snr_db), r)
                     for r in range(cfg.sinr_realizations)]
            per_real = executor.map(_sinr_realization, tasks)
            arr = np.stack(per_real)  # (R, D)
            mean = arr.mean(axis=0)
            sem = arr.std(axis=0, ddof=1) / math.sqrt(arr.shape[0]) if arr.shape[0] > 1 else np.zeros_like(mean)
            for d, label in enumerate(cfg.labels()):
                results[label].append(SinrPoint(
                    snr_db=float(snr_db), sinr_linear=float(mean[d]),
                    ci_low=float(mean[d] - WILSON_Z * sem[d]),
                    ci_high=float(mean[d] + WILSON_Z * sem[d]),
                ))
    return results
