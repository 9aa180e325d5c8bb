"""Synthetic link-adaptation traces.

A desk-scale stand-in for measured gNB traces. One UE is simulated per trace:

* SNR follows an AR(1) process (optionally with a sinusoidal mobility swing);
  CQI is a 2 dB-per-step quantizer of it.
* The data channel sees ``snr + mismatch - interference``. ``mismatch`` is a
  slow AR(1) offset between reference-signal and data-channel quality that
  CQI cannot observe; ``interference`` grows with the scheduled load and sets
  in steeply towards full load (``load_interference_db * load**exponent``).
* MCS is ``floor(cqi*28/15 + offset)`` per transport block, where the OLLA
  offset moves after every HARQ feedback. The reported MCS is the interval
  mean, rounded half up.
* A transport block fails with probability
  ``logistic((mcs*24/28 - 4 - sinr) / 1.5)``.
* The number of scheduled TTIs per interval is Binomial(1000, load) with a
  load factor redrawn every ``session_len`` intervals.
* ``brate = tti * SE[mcs]``, scaled so MCS 28 at full load gives
  ``max_thr_mbps``; throughput is ``brate * (1 - bler)`` plus label noise,
  clamped to ``[0, max_thr_mbps]``.

OLLA keeps BLER near its target while its bounded offset range can absorb
the channel; under heavy load the offset saturates and BLER climbs gradually
with the TTI count.

All constants are synthetic and documented here; none are measured values.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from . import _accel
from .errors import ConfigError
from .ingest import Dataset, MetricSample, write_csv
from .rng import RNG_ALGORITHM, PortableRNG, logistic

# 38.214 Table 5.1.3.1-1 (64QAM) spectral efficiency per MCS index.
SPECTRAL_EFFICIENCY = np.array([
    0.2344, 0.3066, 0.3770, 0.4902, 0.6016, 0.7402, 0.8770, 1.0273, 1.1758,
    1.3262, 1.3281, 1.4766, 1.6953, 1.9141, 2.1602, 2.4063, 2.5703, 2.5664,
    2.7305, 3.0293, 3.3223, 3.6094, 3.9023, 4.2129, 4.5234, 4.8164, 5.1152,
    5.3320, 5.5547,
])

TTIS_PER_INTERVAL = 1000
MOBILITY_PERIOD = 200
MOBILITY_AMPLITUDE_DB = 6.0
OLLA_STEP = 0.01
BLER_SLOPE_DB = 1.5

# independent sub-streams of the trace seed
_S_SNR, _S_LOAD, _S_TTI, _S_ACK, _S_LABEL, _S_MISMATCH = range(6)


@dataclass(frozen=True)
class GeneratorConfig:
    n_samples: int = 10000
    seed: int = 42
    snr_mean_db: float = 17.0
    snr_ar_coeff: float = 0.98
    snr_noise_std_db: float = 1.0
    mobility: bool = False
    bandwidth_mhz: float = 20.0
    max_thr_mbps: float = 40.0
    bler_target: float = 0.1
    label_noise_std: float = 1.0
    interval_ms: int = 1000
    start_ms: int = 0
    session_len: int = 20
    load_min: float = 0.3
    load_max: float = 1.0
    load_interference_db: float = 14.0
    interference_exponent: float = 11.0
    mismatch_std_db: float = 2.0
    olla_limit: float = 11.0

    def validate(self) -> "GeneratorConfig":
        checks = [
            (isinstance(self.n_samples, int) and self.n_samples > 0, "n_samples must be a positive integer"),
            (isinstance(self.seed, int) and 0 <= self.seed < 2**64, "seed must be an unsigned 64-bit integer"),
            (math.isfinite(self.snr_mean_db), "snr_mean_db must be finite"),
            (0.0 <= self.snr_ar_coeff < 1.0, "snr_ar_coeff must lie in [0, 1)"),
            (self.snr_noise_std_db >= 0.0, "snr_noise_std_db must be non-negative"),
            (self.bandwidth_mhz > 0.0, "bandwidth_mhz must be positive"),
            (self.max_thr_mbps > 0.0, "max_thr_mbps must be positive"),
            (0.0 < self.bler_target < 1.0, "bler_target must lie in (0, 1)"),
            (self.label_noise_std >= 0.0, "label_noise_std must be non-negative"),
            (self.interval_ms > 0, "interval_ms must be positive"),
            (self.start_ms >= 0, "start_ms must be non-negative"),
            (self.session_len > 0, "session_len must be positive"),
            (0.0 <= self.load_min <= self.load_max <= 1.0, "need 0 <= load_min <= load_max <= 1"),
            (self.load_interference_db >= 0.0, "load_interference_db must be non-negative"),
            (self.interference_exponent > 0.0, "interference_exponent must be positive"),
            (self.mismatch_std_db >= 0.0, "mismatch_std_db must be non-negative"),
            (self.olla_limit >= 0.0, "olla_limit must be non-negative"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown generator option(s): {', '.join(sorted(unknown))}")
        return cls(**d).validate()


def mobility_swing(t: int) -> float:
    return MOBILITY_AMPLITUDE_DB * math.sin(2.0 * math.pi * t / MOBILITY_PERIOD)


def snr_step(prev_snr_db: float, config: GeneratorConfig, rng: PortableRNG, t: int | None = None) -> float:
    """Advance the SNR process one reporting interval.

    AR(1) around ``snr_mean_db``. With ``config.mobility`` the sinusoidal
    swing for step ``t`` is added on top; the AR recursion itself runs on the
    swing-free component so the swing amplitude stays 6 dB.
    """
    mu, a = config.snr_mean_db, config.snr_ar_coeff
    base = prev_snr_db
    if config.mobility and t is not None and t > 0:
        base -= mobility_swing(t - 1)
    eps = rng.normal(0.0, 1.0) * config.snr_noise_std_db
    out = mu + a * (base - mu) + eps
    if config.mobility and t is not None:
        out += mobility_swing(t)
    return out


def cqi_from_snr(snr_db: float) -> int:
    """2 dB-per-step quantizer: -6 dB -> 0, 24 dB -> 15 (half-up rounding)."""
    q = math.floor((snr_db + 6.0) / 2.0 + 0.5)
    return min(max(q, 0), 15)


def mcs_from_cqi(cqi: int, olla_offset: float = 0.0) -> int:
    if not 0 <= cqi <= 15:
        raise ValueError(f"cqi={cqi} outside 0..15")
    return min(max(math.floor(cqi * 28 / 15 + olla_offset), 0), 28)


def olla_update(offset: float, ack: bool, bler_target: float, limit: float = math.inf) -> float:
    """+0.01 on ACK, -0.01*(1-t)/t on NACK; the fixed point is BLER == t."""
    offset += OLLA_STEP if ack else -OLLA_STEP * (1.0 - bler_target) / bler_target
    return min(max(offset, -limit), limit)


def mcs_threshold_db(mcs: int) -> float:
    """SNR at which the transport-block error probability for ``mcs`` is 1/2."""
    return mcs * 24.0 / 28.0 - 4.0


def tb_error_prob(mcs: int, sinr_db: float) -> float:
    return logistic((mcs_threshold_db(mcs) - sinr_db) / BLER_SLOPE_DB)


def _olla_interval(base_mcs, offset, p_by_mcs, u, bler_target, limit):
    # One HARQ feedback per TB; mirrors olla_update + mcs_from_cqi per block.
    down = OLLA_STEP * (1.0 - bler_target) / bler_target
    nok = 0
    mcs_sum = 0
    for i in range(u.shape[0]):
        m = int(math.floor(base_mcs + offset))
        m = min(max(m, 0), 28)
        mcs_sum += m
        if u[i] < p_by_mcs[m]:
            nok += 1
            offset = max(offset - down, -limit)
        else:
            offset = min(offset + OLLA_STEP, limit)
    return offset, nok, mcs_sum


_olla_interval_jit = _accel.jit(_olla_interval)


def run_olla_interval(base_mcs: float, offset: float, p_by_mcs: np.ndarray, u: np.ndarray,
                      bler_target: float, limit: float) -> tuple[float, int, int]:
    """Send ``len(u)`` transport blocks under OLLA.

    Block ``i`` uses ``floor(base_mcs + offset)`` and fails iff
    ``u[i] < p_by_mcs[mcs]``. Returns ``(offset, nok, mcs_sum)``.
    """
    fn = _olla_interval_jit if _accel.use_numba() else _olla_interval
    return fn(float(base_mcs), float(offset), p_by_mcs, u, float(bler_target), float(limit))


def generate_trace(config: GeneratorConfig | None = None, force_zero_bler: bool = False) -> Dataset:
    """Draw ``config.n_samples`` consecutive reports for a single UE.

    ``force_zero_bler`` is a test hook that suppresses all transport-block
    errors (throughput then equals the bit rate plus label noise).
    """
    cfg = (config or GeneratorConfig()).validate()
    rng_snr = PortableRNG(cfg.seed, _S_SNR)
    rng_load = PortableRNG(cfg.seed, _S_LOAD)
    rng_tti = PortableRNG(cfg.seed, _S_TTI)
    rng_ack = PortableRNG(cfg.seed, _S_ACK)
    rng_label = PortableRNG(cfg.seed, _S_LABEL)
    rng_mis = PortableRNG(cfg.seed, _S_MISMATCH)

    n = cfg.n_samples
    n_sessions = -(-n // cfg.session_len)
    loads = cfg.load_min + (cfg.load_max - cfg.load_min) * rng_load.uniform(n_sessions)
    label_noise = rng_label.normal(0.0, 1.0, n) * cfg.label_noise_std
    # stationary std of the mismatch process equals mismatch_std_db
    mis_innov = rng_mis.normal(0.0, 1.0, n) * (cfg.mismatch_std_db * math.sqrt(1.0 - cfg.snr_ar_coeff ** 2))
    thresholds = np.array([mcs_threshold_db(m) for m in range(29)])
    se_scale = cfg.max_thr_mbps / (TTIS_PER_INTERVAL * SPECTRAL_EFFICIENCY[28])

    samples = []
    snr = cfg.snr_mean_db + (mobility_swing(0) if cfg.mobility else 0.0)
    mismatch = 0.0
    offset = 0.0
    for t in range(n):
        if t > 0:
            snr = snr_step(snr, cfg, rng_snr, t)
        mismatch = cfg.snr_ar_coeff * mismatch + float(mis_innov[t])
        cqi = cqi_from_snr(snr)
        tti = rng_tti.binomial(TTIS_PER_INTERVAL, float(loads[t // cfg.session_len]))
        interference = cfg.load_interference_db * (tti / TTIS_PER_INTERVAL) ** cfg.interference_exponent
        if force_zero_bler:
            p_by_mcs = np.zeros(29)
        else:
            p_by_mcs = logistic((thresholds - (snr + mismatch - interference)) / BLER_SLOPE_DB)
        u = rng_ack.uniform(tti)
        offset, nok, mcs_sum = run_olla_interval(
            cqi * 28 / 15, offset, p_by_mcs, u, cfg.bler_target, cfg.olla_limit)
        mcs = math.floor(mcs_sum / tti + 0.5) if tti > 0 else mcs_from_cqi(cqi, offset)
        brate = se_scale * tti * SPECTRAL_EFFICIENCY[mcs]
        bler = nok / tti if tti > 0 else 0.0
        thr = min(max(brate * (1.0 - bler) + float(label_noise[t]), 0.0), cfg.max_thr_mbps)
        samples.append(MetricSample(
            timestamp_ms=cfg.start_ms + t * cfg.interval_ms, ue_id=0, cqi=cqi, mcs=mcs,
            tti_count=tti, brate_mbps=brate, ok_count=tti - nok, nok_count=nok,
            bler=bler, dl_thr_mbps=thr,
        ))
    return Dataset(tuple(samples), "synthetic")


def trace_metadata(config: GeneratorConfig) -> dict:
    return {
        "generator": "nrpredict.synthgen",
        "rng_algorithm": RNG_ALGORITHM,
        "config": asdict(config),
    }


def write_trace(dataset: Dataset, config: GeneratorConfig, path) -> str:
    """Write the CSV trace plus a ``<path>.meta.json`` sidecar; returns the sidecar path."""
    write_csv(dataset, path)
    meta_path = os.fspath(path) + ".meta.json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(trace_metadata(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta_path
