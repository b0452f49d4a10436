"""Capture synthesis: noise, quantization, masks, ratio vectors."""

import numpy as np
import pytest

from ecuprint.acquisition import (
    AcquisitionConfig,
    WaveformCapture,
    capture_seed,
    compute_ratio_vector,
    quantize,
    synthesize_capture,
    write_trace,
)
from ecuprint.bus import EcuProfile, build_topology, expected_ratio, voltage_at_sp
from ecuprint.errors import InsufficientSignalError, ValidationError
from ecuprint.frames import ARBITRATION, ACK_DELIMITER, ACK_SLOT, CanFrame, encode_frame


def small_topology():
    return build_topology(ohms_per_meter=1.0, length_m=40.0, sp_a_pos=0.0,
                          sp_b_pos=40.0, r_tail_a=120.0, r_tail_b=120.0,
                          ecu_taps=(10.0,))


def profile(sigma_v=0.0):
    return EcuProfile(ecu_id=1, owned_mids=frozenset({1}), canh_dom=3.5,
                      canl_dom=1.5, v_recessive=2.5, period_ms=10.0,
                      sigma_v=sigma_v)


def clean_config(**kwargs):
    defaults = dict(noise_sigma=0.0, quantize_enabled=False)
    defaults.update(kwargs)
    return AcquisitionConfig(**defaults)


BITS = encode_frame(CanFrame(0x1, 2, b"\x0f\xf0"))


class TestConfig:
    def test_invariants(self):
        with pytest.raises(ValidationError):
            AcquisitionConfig(sample_rate=900_000)  # below 2x bit rate
        with pytest.raises(ValidationError):
            AcquisitionConfig(adc_bits=7)
        with pytest.raises(ValidationError):
            AcquisitionConfig(adc_bits=17)
        with pytest.raises(ValidationError):
            AcquisitionConfig(settle_skip=1.0)
        assert AcquisitionConfig().samples_per_bit == 80


class TestQuantize:
    def test_step_size_and_rounding(self):
        cfg = AcquisitionConfig()
        step = 5.0 / (2 ** 14 - 1)
        assert step == pytest.approx(0.000305, abs=2e-6)
        assert abs(quantize(2.5, cfg) - 2.5) <= step / 2

    def test_clamps_to_range(self):
        cfg = AcquisitionConfig()
        assert quantize(7.2, cfg) == 5.0
        assert quantize(-1.0, cfg) == 0.0

    def test_bypass_is_identity(self):
        cfg = AcquisitionConfig(quantize_enabled=False)
        assert quantize(2.50001234, cfg) == 2.50001234


class TestSynthesize:
    def test_noiseless_dominant_sample_matches_divider(self):
        top = small_topology()
        cap = synthesize_capture(top, profile(), 10.0, BITS, 0x1,
                                 clean_config(), seed=5)
        v_a = voltage_at_sp(top, 10.0, 2.0, "a")
        v_b = voltage_at_sp(top, 10.0, 2.0, "b")
        dominant = np.repeat(np.asarray(BITS.bits) == 0, 80)
        assert np.all(cap.s_a[dominant] == v_a)
        assert np.all(cap.s_b[dominant] == v_b)

    def test_noiseless_recessive_is_zero_differential(self):
        cap = synthesize_capture(small_topology(), profile(), 10.0, BITS, 0x1,
                                 clean_config(), seed=5)
        recessive = np.repeat(np.asarray(BITS.bits) == 1, 80)
        assert np.all(cap.s_a[recessive] == 0.0)
        assert np.all(cap.s_b[recessive] == 0.0)

    def test_same_seed_bit_identical(self):
        cfg = AcquisitionConfig()
        a = synthesize_capture(small_topology(), profile(0.002), 10.0, BITS,
                               0x1, cfg, seed=99)
        b = synthesize_capture(small_topology(), profile(0.002), 10.0, BITS,
                               0x1, cfg, seed=99)
        assert np.array_equal(a.s_a, b.s_a)
        assert np.array_equal(a.s_b, b.s_b)
        c = synthesize_capture(small_topology(), profile(0.002), 10.0, BITS,
                               0x1, cfg, seed=100)
        assert not np.array_equal(a.s_a, c.s_a)

    def test_simultaneity_levels_agree_per_sample(self):
        cap = synthesize_capture(small_topology(), profile(), 10.0, BITS, 0x1,
                                 clean_config(), seed=5)
        # Both points see the same bit at every index: dominant iff > 0.5 V.
        assert np.array_equal(cap.s_a > 0.5, cap.s_b > 0.5)

    def test_mask_skips_settle_and_excluded_fields(self):
        cap = synthesize_capture(small_topology(), profile(), 10.0, BITS, 0x1,
                                 AcquisitionConfig(), seed=5)
        excluded = {ARBITRATION, ACK_SLOT, ACK_DELIMITER}
        current = ""
        for idx in cap.mask:
            bit = int(idx) // cap.samples_per_bit
            assert int(idx) % cap.samples_per_bit >= 8  # 10% of 80 samples
        for i, tag in enumerate(BITS.field_map):
            eff = tag if tag != "stuff" else current
            if tag != "stuff":
                current = tag
            samples = set(range(i * 80, (i + 1) * 80))
            overlap = samples & set(int(v) for v in cap.mask)
            assert bool(overlap) == (eff not in excluded)

    def test_common_mode_cancels_without_quantization(self):
        base = synthesize_capture(small_topology(), profile(0.002), 10.0, BITS,
                                  0x1, clean_config(noise_sigma=0.004), seed=7)
        shifted = synthesize_capture(
            small_topology(), profile(0.002), 10.0, BITS, 0x1,
            clean_config(noise_sigma=0.004, common_mode_amplitude=0.5), seed=7)
        assert np.array_equal(base.s_a, shifted.s_a)
        assert np.array_equal(base.s_b, shifted.s_b)

    def test_common_mode_nearly_cancels_with_quantization(self):
        cfg = AcquisitionConfig(noise_sigma=0.004)
        cfg_cm = AcquisitionConfig(noise_sigma=0.004, common_mode_amplitude=0.5)
        base = synthesize_capture(small_topology(), profile(0.002), 10.0, BITS,
                                  0x1, cfg, seed=7)
        shifted = synthesize_capture(small_topology(), profile(0.002), 10.0,
                                     BITS, 0x1, cfg_cm, seed=7)
        step = 5.0 / (2 ** 14 - 1)
        assert np.max(np.abs(base.s_a - shifted.s_a)) <= 2 * step


class TestRatioVector:
    def test_worked_example(self):
        cap = WaveformCapture(ecu_label=1, mid=1,
                              s_a=np.array([3.230769]), s_b=np.array([2.8]),
                              mask=np.array([0]), bits=BITS,
                              samples_per_bit=80, sample_rate=40e6)
        ratio = compute_ratio_vector(cap, guard=0.5, min_retained=1)
        assert ratio == pytest.approx([1.153846], abs=1e-6)

    def test_equal_signals_give_ones(self):
        s = np.full(60, 2.0)
        cap = WaveformCapture(1, 1, s, s.copy(), np.arange(60), BITS, 80, 40e6)
        assert np.all(compute_ratio_vector(cap) == 1.0)

    def test_guard_drops_weak_samples(self):
        s_a = np.full(60, 2.0)
        s_b = np.full(60, 2.0)
        s_b[:10] = 0.01
        cap = WaveformCapture(1, 1, s_a, s_b, np.arange(60), BITS, 80, 40e6)
        assert compute_ratio_vector(cap, guard=0.5, min_retained=10).size == 50

    def test_insufficient_signal(self):
        s = np.full(30, 0.01)
        cap = WaveformCapture(1, 1, s, s.copy(), np.arange(30), BITS, 80, 40e6)
        with pytest.raises(InsufficientSignalError):
            compute_ratio_vector(cap, guard=0.5, min_retained=50)

    def test_noiseless_ratio_equals_closed_form(self):
        top = small_topology()
        cap = synthesize_capture(top, profile(), 10.0, BITS, 0x1,
                                 clean_config(), seed=3)
        ratio = compute_ratio_vector(cap)
        gamma = expected_ratio(top, 10.0)
        assert np.allclose(ratio, gamma, rtol=1e-12, atol=0.0)

    def test_jitter_cancels_in_ratio(self):
        top = small_topology()
        cap = synthesize_capture(top, profile(sigma_v=0.01), 10.0, BITS, 0x1,
                                 clean_config(), seed=3)
        ratio = compute_ratio_vector(cap)
        assert np.allclose(ratio, expected_ratio(top, 10.0), rtol=1e-12)

    def test_mean_converges_to_gamma(self):
        top = small_topology()
        cfg = clean_config(noise_sigma=0.004)
        ratios = []
        for k in range(7):
            cap = synthesize_capture(top, profile(), 10.0, BITS, 0x1, cfg,
                                     seed=capture_seed(40, k))
            ratios.append(compute_ratio_vector(cap))
        pooled = np.concatenate(ratios)
        assert pooled.size >= 10_000
        gamma = expected_ratio(top, 10.0)
        v_spb = voltage_at_sp(top, 10.0, 2.0, "b")
        tol = 3 * cfg.noise_sigma / (v_spb * np.sqrt(pooled.size)) * 2
        assert abs(pooled.mean() - gamma) < tol


class TestTrace:
    def test_trace_columns_and_tags(self, tmp_path):
        cap = synthesize_capture(small_topology(), profile(), 10.0, BITS, 0x1,
                                 AcquisitionConfig(), seed=5)
        path = tmp_path / "trace.csv"
        write_trace(cap, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "time_s,v_spa_volts,v_spb_volts,bit_index,field_tag"
        assert len(lines) == 1 + cap.s_a.size
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert first[4] == "sof"
        last = lines[-1].split(",")
        assert last[4] == "eof"
