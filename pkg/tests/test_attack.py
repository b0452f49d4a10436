"""Attack engine: spoof machinery, search space, injected streams."""

import numpy as np
import pytest

from ecuprint.acquisition import AcquisitionConfig, compute_ratio_vector
from ecuprint.attack import (
    AttackScenario,
    MID_ONLY,
    MID_VOLTAGE,
    differential_from_canh,
    generate_attack_stream,
    inject_mid_masquerade,
    inject_mid_voltage_masquerade,
    match_single_point,
    voltage_search_space,
)
from ecuprint.bus import EcuProfile, build_topology, expected_ratio, voltage_at_sp
from ecuprint.errors import ValidationError

TOPOLOGY = build_topology(ohms_per_meter=0.025, length_m=10.0, sp_a_pos=0.2,
                          sp_b_pos=9.8, r_tail_a=120.0, r_tail_b=120.0,
                          ecu_taps=(2.5, 4.5, 7.5))

VICTIM = EcuProfile(ecu_id=3, owned_mids=frozenset({3}), canh_dom=3.6,
                    canl_dom=1.6, v_recessive=2.4, period_ms=10.0)
ATTACKER = EcuProfile(ecu_id=5, owned_mids=frozenset({5}), canh_dom=3.5,
                      canl_dom=1.4, v_recessive=2.5, period_ms=20.0)
OTHER = EcuProfile(ecu_id=8, owned_mids=frozenset({8}), canh_dom=3.7,
                   canl_dom=1.5, v_recessive=2.6, period_ms=40.0)
OWNERSHIP = {3: 3, 5: 5, 8: 8}
TAPS = {3: 2.5, 5: 4.5, 8: 7.5}

CLEAN = AcquisitionConfig(noise_sigma=0.0, quantize_enabled=False)


class TestSearchSpace:
    def test_dominant_tolerance_levels(self):
        count, levels = voltage_search_space(1.75, 0.005)
        assert count == 350
        assert len(levels) == 350
        assert levels[1] - levels[0] == pytest.approx(0.005, rel=1e-12)

    def test_single_level(self):
        count, levels = voltage_search_space(0.005, 0.005)
        assert count == 1
        assert np.array_equal(levels, [0.0])

    def test_invalid_inputs(self):
        with pytest.raises(ValidationError):
            voltage_search_space(1.75, 0.0)
        with pytest.raises(ValidationError):
            voltage_search_space(-1.0, 0.005)
        with pytest.raises(ValidationError):
            voltage_search_space(0.004, 0.005)

    def test_random_guess_hits_one_in_l(self):
        count, _ = voltage_search_space(1.75, 0.005)
        rng = np.random.default_rng(61)
        trials = 20_000
        hits = int(np.sum(rng.integers(0, count, trials)
                          == rng.integers(0, count, trials)))
        p_hat = hits / trials
        p = 1.0 / count
        assert abs(p_hat - p) < 3 * np.sqrt(p * (1 - p) / trials)


class TestCanhMapping:
    def test_reported_levels(self):
        assert differential_from_canh(3.2185) == pytest.approx(1.437, abs=1e-12)
        assert differential_from_canh(3.3114) == pytest.approx(1.6228, abs=1e-12)
        assert differential_from_canh(3.405) == pytest.approx(1.81, abs=1e-12)


class TestMatchSinglePoint:
    def test_spoof_reproduces_target_point(self):
        for point in ("a", "b"):
            spoof = match_single_point(TOPOLOGY, TAPS[5], TAPS[3],
                                       VICTIM.differential_dom, point)
            attacker_v = voltage_at_sp(TOPOLOGY, TAPS[5], spoof, point)
            victim_v = voltage_at_sp(TOPOLOGY, TAPS[3],
                                     VICTIM.differential_dom, point)
            assert attacker_v == pytest.approx(victim_v, rel=1e-12)

    def test_same_tap_limit_case(self):
        spoof = match_single_point(TOPOLOGY, TAPS[3], TAPS[3],
                                   VICTIM.differential_dom, "a")
        assert spoof == pytest.approx(VICTIM.differential_dom, rel=1e-12)

    def test_matching_one_point_never_matches_both(self):
        rng = np.random.default_rng(62)
        for _ in range(50):
            taps = np.sort(rng.uniform(0.5, 9.5, size=2))
            if abs(taps[0] - taps[1]) < 1e-3 or np.any(np.abs(taps - 5.0) < 1e-3):
                continue
            top = build_topology(ohms_per_meter=0.025, length_m=10.0,
                                 sp_a_pos=0.2, sp_b_pos=9.8, r_tail_a=120.0,
                                 r_tail_b=120.0, ecu_taps=tuple(taps))
            victim_tap, attacker_tap = taps
            drive = float(rng.uniform(1.6, 2.9))
            spoof = match_single_point(top, attacker_tap, victim_tap, drive, "a")
            assert voltage_at_sp(top, attacker_tap, spoof, "a") == pytest.approx(
                voltage_at_sp(top, victim_tap, drive, "a"), rel=1e-12)
            # Distinct ratios force a mismatch at the other point.
            assert expected_ratio(top, attacker_tap) != pytest.approx(
                expected_ratio(top, victim_tap), abs=1e-15)
            assert voltage_at_sp(top, attacker_tap, spoof, "b") != pytest.approx(
                voltage_at_sp(top, victim_tap, drive, "b"), rel=1e-9)


class TestScenario:
    def test_mode_validation(self):
        with pytest.raises(ValidationError):
            AttackScenario(5, "replay", (3,))

    def test_spoof_alignment_required(self):
        with pytest.raises(ValidationError):
            AttackScenario(5, MID_VOLTAGE, (3, 8), spoof_differentials=(1.8,))

    def test_spoof_range_enforced(self):
        with pytest.raises(ValidationError):
            AttackScenario(5, MID_VOLTAGE, (3,), spoof_differentials=(1.2,))
        with pytest.raises(ValidationError):
            AttackScenario(5, MID_VOLTAGE, (3,), spoof_differentials=(3.3,))
        # The measured-transceiver band reaches slightly below nominal.
        AttackScenario(5, MID_VOLTAGE, (3,), spoof_differentials=(1.437,))


class TestStreams:
    def _scenario(self, mode=MID_ONLY, spoofs=(), victims=(3, 8), n=4):
        return AttackScenario(5, mode, tuple(victims),
                              spoof_differentials=tuple(spoofs),
                              messages_per_victim=n)

    def test_mid_only_labels_and_counts(self):
        stream = inject_mid_masquerade(self._scenario(), TOPOLOGY, ATTACKER,
                                       TAPS[5], OWNERSHIP, CLEAN, seed=1)
        captures = list(stream)
        assert len(captures) == 8
        assert [c.mid for c in captures] == [3] * 4 + [8] * 4
        assert all(c.ecu_label == 5 for c in captures)

    def test_mid_only_ratio_is_attackers(self):
        captures = list(inject_mid_masquerade(self._scenario(), TOPOLOGY,
                                              ATTACKER, TAPS[5], OWNERSHIP,
                                              CLEAN, seed=1))
        gamma = expected_ratio(TOPOLOGY, TAPS[5])
        for cap in captures:
            assert np.allclose(compute_ratio_vector(cap), gamma, rtol=1e-12)

    def test_mid_voltage_ratio_still_attackers(self):
        scenario = self._scenario(mode=MID_VOLTAGE, spoofs=(1.437, 1.81))
        captures = list(inject_mid_voltage_masquerade(
            scenario, TOPOLOGY, ATTACKER, TAPS[5], OWNERSHIP, CLEAN, seed=2))
        gamma = expected_ratio(TOPOLOGY, TAPS[5])
        for cap in captures:
            assert np.allclose(compute_ratio_vector(cap), gamma, rtol=1e-12)

    def test_spoof_matches_one_point_not_the_other(self):
        from dataclasses import replace

        spoof = match_single_point(TOPOLOGY, TAPS[5], TAPS[3],
                                   VICTIM.differential_dom, "a")
        scenario = self._scenario(mode=MID_VOLTAGE, spoofs=(spoof,),
                                  victims=(3,), n=1)
        steady = replace(ATTACKER, sigma_v=0.0)
        (cap,) = list(inject_mid_voltage_masquerade(
            scenario, TOPOLOGY, steady, TAPS[5], OWNERSHIP, CLEAN, seed=3))
        victim_a = voltage_at_sp(TOPOLOGY, TAPS[3], VICTIM.differential_dom, "a")
        victim_b = voltage_at_sp(TOPOLOGY, TAPS[3], VICTIM.differential_dom, "b")
        dominant_a = cap.s_a[np.abs(cap.s_a) > 0.5]
        dominant_b = cap.s_b[np.abs(cap.s_b) > 0.5]
        assert dominant_a[0] == pytest.approx(victim_a, rel=1e-12)
        assert dominant_b[0] != pytest.approx(victim_b, rel=1e-9)

    def test_natural_spoof_degenerates_to_mid_only(self):
        natural = ATTACKER.differential_dom
        mid_only = list(inject_mid_masquerade(
            self._scenario(victims=(3,), n=2), TOPOLOGY, ATTACKER, TAPS[5],
            OWNERSHIP, CLEAN, seed=4))
        spoofed = list(inject_mid_voltage_masquerade(
            self._scenario(mode=MID_VOLTAGE, spoofs=(natural,), victims=(3,), n=2),
            TOPOLOGY, ATTACKER, TAPS[5], OWNERSHIP, CLEAN, seed=4))
        for a, b in zip(mid_only, spoofed):
            assert np.array_equal(a.s_a, b.s_a)
            assert np.array_equal(a.s_b, b.s_b)

    def test_deterministic_per_seed(self):
        cfg = AcquisitionConfig()
        a = list(generate_attack_stream(self._scenario(), TOPOLOGY, ATTACKER,
                                        TAPS[5], OWNERSHIP, cfg, seed=5))
        b = list(generate_attack_stream(self._scenario(), TOPOLOGY, ATTACKER,
                                        TAPS[5], OWNERSHIP, cfg, seed=5))
        for x, y in zip(a, b):
            assert np.array_equal(x.s_a, y.s_a)

    def test_zero_victims_empty_stream(self):
        scenario = AttackScenario(5, MID_ONLY, ())
        assert list(generate_attack_stream(scenario, TOPOLOGY, ATTACKER,
                                           TAPS[5], OWNERSHIP, CLEAN, 1)) == []

    def test_self_victim_rejected(self):
        scenario = self._scenario(victims=(5,))
        with pytest.raises(ValidationError):
            list(generate_attack_stream(scenario, TOPOLOGY, ATTACKER, TAPS[5],
                                        OWNERSHIP, CLEAN, 1))

    def test_unowned_victim_rejected(self):
        scenario = self._scenario(victims=(0x99,))
        with pytest.raises(ValidationError):
            list(generate_attack_stream(scenario, TOPOLOGY, ATTACKER, TAPS[5],
                                        OWNERSHIP, CLEAN, 1))

    def test_wrong_mode_wrappers_reject(self):
        with pytest.raises(ValidationError):
            inject_mid_voltage_masquerade(self._scenario(), TOPOLOGY, ATTACKER,
                                          TAPS[5], OWNERSHIP, CLEAN, 1)
        with pytest.raises(ValidationError):
            inject_mid_masquerade(
                self._scenario(mode=MID_VOLTAGE, spoofs=(1.8, 1.9)), TOPOLOGY,
                ATTACKER, TAPS[5], OWNERSHIP, CLEAN, 1)
