"""Phase 1: synthesize the two-point voltage capture of one frame.

Both sampling points observe the same bit timeline, so sample k of S(a)
and sample k of S(b) always belong to the same instant. Dominant bits
carry the divider-model differential for the transmitter's tap; recessive
bits carry zero differential. Per-point Gaussian noise, a shared
sinusoidal common-mode term and per-line ADC quantization sit on top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bus import BusTopology, EcuProfile, voltage_at_sp
from .errors import InsufficientSignalError, ValidationError
from .frames import BitStream, DOMINANT, fingerprintable_region

DEFAULT_GUARD_EPSILON = 0.5
DEFAULT_MIN_RATIO_SAMPLES = 50


@dataclass(frozen=True)
class AcquisitionConfig:
    """Sampling instrument and channel-noise parameters."""

    sample_rate: float = 40_000_000.0
    adc_bits: int = 14
    adc_range: tuple[float, float] = (0.0, 5.0)
    bit_rate: float = 500_000.0
    noise_sigma: float = 0.004
    common_mode_amplitude: float = 0.0
    common_mode_freq_hz: float = 1_000.0
    settle_skip: float = 0.10
    quantize_enabled: bool = True
    guard_epsilon: float = DEFAULT_GUARD_EPSILON
    min_ratio_samples: int = DEFAULT_MIN_RATIO_SAMPLES

    def __post_init__(self):
        object.__setattr__(self, "adc_range",
                           (float(self.adc_range[0]), float(self.adc_range[1])))
        if self.bit_rate <= 0 or self.sample_rate <= 0:
            raise ValidationError("sample_rate and bit_rate must be positive")
        if self.sample_rate < 2 * self.bit_rate:
            raise ValidationError("sample_rate must be at least twice the bit rate")
        if not 8 <= self.adc_bits <= 16:
            raise ValidationError("adc_bits must be within 8..16")
        if self.adc_range[1] <= self.adc_range[0]:
            raise ValidationError("adc_range must be increasing")
        if self.noise_sigma < 0 or self.common_mode_amplitude < 0:
            raise ValidationError("noise amplitudes must be nonnegative")
        if not 0 <= self.settle_skip < 1:
            raise ValidationError("settle_skip must be in [0, 1)")
        if self.guard_epsilon <= 0:
            raise ValidationError("guard_epsilon must be positive")
        if self.min_ratio_samples < 1:
            raise ValidationError("min_ratio_samples must be at least 1")

    @property
    def samples_per_bit(self) -> int:
        return int(self.sample_rate // self.bit_rate)


@dataclass
class WaveformCapture:
    """Labeled synchronized sample vectors from SP_a and SP_b."""

    ecu_label: int
    mid: int
    s_a: np.ndarray
    s_b: np.ndarray
    mask: np.ndarray
    bits: BitStream
    samples_per_bit: int
    sample_rate: float


def capture_seed(master_seed: int, index: int) -> int:
    """Seed-splitting rule for batch synthesis: master seed plus capture index."""
    return master_seed + index


def quantize(values, config: AcquisitionConfig):
    """Clamp to the ADC range and snap to the nearest of 2**adc_bits levels.

    With quantization disabled this is the identity (ideal instrument).
    Accepts scalars or arrays.
    """
    if not config.quantize_enabled:
        return values
    lo, hi = config.adc_range
    step = (hi - lo) / (2 ** config.adc_bits - 1)
    codes = np.clip(np.rint((np.asarray(values, dtype=float) - lo) / step),
                    0, 2 ** config.adc_bits - 1)
    out = lo + codes * step
    if np.isscalar(values) or getattr(values, "ndim", 1) == 0:
        return float(out)
    return out


def synthesize_capture(topology: BusTopology, profile: EcuProfile, tap: float,
                       bits: BitStream, mid: int, config: AcquisitionConfig,
                       seed: int, drive_override: float | None = None) -> WaveformCapture:
    """Synthesize the simultaneous two-point capture of one transmitted frame.

    Deterministic for a fixed seed. Generator draws happen in a fixed
    order (drive jitter, common-mode phase, SP_a noise, SP_b noise) so a
    disabled term never reshuffles the others. ``drive_override`` replaces
    the profile's dominant differential (used by spoofing attackers).
    """
    rng = np.random.default_rng(seed)
    base = profile.differential_dom if drive_override is None else float(drive_override)
    drive = base + rng.normal(0.0, profile.sigma_v)
    phase = rng.uniform(0.0, 2.0 * np.pi)

    spb = config.samples_per_bit
    bit_arr = np.asarray(bits.bits, dtype=np.int8)
    dominant = bit_arr == DOMINANT
    n = bit_arr.size * spb

    v_dom = {
        "a": voltage_at_sp(topology, tap, drive, "a"),
        "b": voltage_at_sp(topology, tap, drive, "b"),
    }
    noise = {
        "a": rng.normal(0.0, config.noise_sigma, n),
        "b": rng.normal(0.0, config.noise_sigma, n),
    }

    if config.quantize_enabled:
        t = np.arange(n) / config.sample_rate
        cm_wave = config.common_mode_amplitude * np.sin(
            2.0 * np.pi * config.common_mode_freq_hz * t + phase)
        cm_bits = np.where(dominant, profile.common_mode_dom, profile.v_recessive)
        cm = np.repeat(cm_bits, spb) + cm_wave

    signals = {}
    for point in ("a", "b"):
        diff = np.repeat(np.where(dominant, v_dom[point], 0.0), spb) + noise[point]
        if config.quantize_enabled:
            # The instrument digitizes each line; the differential sample is
            # the difference of the two quantized lines, so any common-mode
            # term cancels to within one code step.
            canh = quantize(cm + diff / 2.0, config)
            canl = quantize(cm - diff / 2.0, config)
            signals[point] = canh - canl
        else:
            signals[point] = diff

    region = np.asarray(fingerprintable_region(bits), dtype=np.int64)
    skip = int(round(config.settle_skip * spb))
    offsets = np.arange(skip, spb, dtype=np.int64)
    mask = (region[:, None] * spb + offsets[None, :]).ravel()

    return WaveformCapture(
        ecu_label=profile.ecu_id,
        mid=mid,
        s_a=signals["a"],
        s_b=signals["b"],
        mask=mask,
        bits=bits,
        samples_per_bit=spb,
        sample_rate=config.sample_rate,
    )


def compute_ratio_vector(capture: WaveformCapture,
                         guard: float = DEFAULT_GUARD_EPSILON,
                         min_retained: int = DEFAULT_MIN_RATIO_SAMPLES) -> np.ndarray:
    """Samplewise S(a)/S(b) over masked samples passing the dominant guard.

    Recessive samples carry no transmitter drive (near-zero differential)
    and are dropped by requiring |S(b)| >= guard.
    """
    s_a = capture.s_a[capture.mask]
    s_b = capture.s_b[capture.mask]
    keep = np.abs(s_b) >= guard
    retained = int(keep.sum())
    if retained < min_retained:
        raise InsufficientSignalError(
            f"only {retained} ratio samples retained (minimum {min_retained})")
    return s_a[keep] / s_b[keep]


def write_trace(capture: WaveformCapture, path) -> None:
    """Tabular trace: time_s, v_spa_volts, v_spb_volts, bit_index, field_tag."""
    spb = capture.samples_per_bit
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("time_s,v_spa_volts,v_spb_volts,bit_index,field_tag\n")
        for k in range(capture.s_a.size):
            bit_index = k // spb
            tag = capture.bits.field_map[bit_index]
            fh.write(f"{k / capture.sample_rate!r},{float(capture.s_a[k])!r},"
                     f"{float(capture.s_b[k])!r},{bit_index},{tag}\n")
