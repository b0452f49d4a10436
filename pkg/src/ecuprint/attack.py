"""Masquerading traffic generation from a compromised node.

Two modes: MID-only (spoofed identifiers, the attacker's own electrical
levels) and MID-voltage (spoofed identifiers plus a per-victim drive
override). In both, the synthesized captures keep the attacker as the
ground-truth label so campaigns can be scored. Benign traffic is never
suppressed; campaigns interleave with it at the configured periods.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .acquisition import AcquisitionConfig, WaveformCapture, capture_seed, synthesize_capture
from .bus import BusTopology, EcuProfile, voltage_at_sp
from .errors import ValidationError
from .frames import CanFrame, encode_frame

MID_ONLY = "mid-only"
MID_VOLTAGE = "mid-voltage"

# Nominal dominant differential is 1.5-3.0 V; measured transceivers run up
# to ~100 mV below nominal, so the spoof validation band is widened.
SPOOF_DIFF_MIN = 1.4
SPOOF_DIFF_MAX = 3.0

COMMON_MODE_NOMINAL = 2.5

_PAYLOAD_STREAM = 3


def differential_from_canh(canh: float) -> float:
    """Differential level for a reported CANH under pair symmetry: 2*(CANH-2.5V)."""
    return 2.0 * (canh - COMMON_MODE_NOMINAL)


@dataclass(frozen=True)
class AttackScenario:
    """One campaign: who attacks, whom, how, and how hard."""

    attacker_ecu_id: int
    mode: str
    victim_mids: tuple[int, ...]
    spoof_differentials: tuple[float, ...] = ()
    injection_periods_ms: tuple[float, ...] = ()
    messages_per_victim: int = 600

    def __post_init__(self):
        object.__setattr__(self, "victim_mids", tuple(int(m) for m in self.victim_mids))
        object.__setattr__(self, "spoof_differentials",
                           tuple(float(v) for v in self.spoof_differentials))
        periods = self.injection_periods_ms or tuple(20.0 for _ in self.victim_mids)
        object.__setattr__(self, "injection_periods_ms", tuple(float(p) for p in periods))
        if self.mode not in (MID_ONLY, MID_VOLTAGE):
            raise ValidationError(f"unknown attack mode {self.mode!r}")
        if self.messages_per_victim < 0:
            raise ValidationError("messages_per_victim must be nonnegative")
        if len(self.injection_periods_ms) != len(self.victim_mids):
            raise ValidationError("one injection period per victim MID required")
        if self.mode == MID_VOLTAGE:
            if len(self.spoof_differentials) != len(self.victim_mids):
                raise ValidationError("one spoof level per victim MID required")
            for v in self.spoof_differentials:
                if not SPOOF_DIFF_MIN <= v <= SPOOF_DIFF_MAX:
                    raise ValidationError(
                        f"spoof differential {v} V outside dominant tolerance "
                        f"[{SPOOF_DIFF_MIN}, {SPOOF_DIFF_MAX}]")


def voltage_search_space(n_range: float, resolution: float) -> tuple[int, np.ndarray]:
    """Number and placement of distinguishable spoof levels in a voltage range.

    Levels are uniformly spaced offsets from the bottom of the range; the
    count is floor(range / resolution).
    """
    if resolution <= 0 or n_range <= 0:
        raise ValidationError("range and resolution must be positive")
    if n_range < resolution:
        raise ValidationError("range must be at least one resolution step")
    count = int(np.floor(n_range / resolution + 1e-9))
    return count, np.arange(count) * resolution


def match_single_point(topology: BusTopology, attacker_tap: float,
                       victim_tap: float, victim_drive: float, point: str) -> float:
    """Drive voltage that reproduces the victim's level at one sampling point.

    Inverts the divider: spoof = V_sp * (R_path' + R_tail) / R_tail for the
    attacker's own path. Matching one point is always possible; matching
    both at once is not, unless the taps share a ratio.
    """
    target = voltage_at_sp(topology, victim_tap, victim_drive, point)
    r_a, r_b = topology.path_resistances(attacker_tap)
    if point == "a":
        return target * (r_a + topology.r_tail_a) / topology.r_tail_a
    return target * (r_b + topology.r_tail_b) / topology.r_tail_b


def generate_attack_stream(scenario: AttackScenario, topology: BusTopology,
                           attacker_profile: EcuProfile, attacker_tap: float,
                           ownership: dict[int, int], config: AcquisitionConfig,
                           seed: int, payload: bytes | None = None,
                           dlc: int = 8) -> Iterator[WaveformCapture]:
    """Yield the campaign's captures in victim order, deterministically per seed.

    Message content is not a distinguishing feature, but message length
    statistics are: by default every injected frame carries fresh seeded
    random payload bytes so the attack traffic's sample counts match
    benign traffic at the same dlc. Pass ``payload`` to pin the content.
    """
    if attacker_profile.ecu_id != scenario.attacker_ecu_id:
        raise ValidationError("attacker profile does not match scenario attacker id")
    for mid in scenario.victim_mids:
        owner = ownership.get(mid)
        if owner is None:
            raise ValidationError(f"victim MID {mid:#x} has no registered owner")
        if owner == scenario.attacker_ecu_id:
            raise ValidationError(f"victim MID {mid:#x} is owned by the attacker")

    payload_rng = np.random.default_rng([seed, _PAYLOAD_STREAM])
    index = 0
    for vi, mid in enumerate(scenario.victim_mids):
        override = (scenario.spoof_differentials[vi]
                    if scenario.mode == MID_VOLTAGE else None)
        for _ in range(scenario.messages_per_victim):
            content = payload_rng.bytes(dlc) if payload is None else payload
            bits = encode_frame(CanFrame(mid, len(content), content))
            yield synthesize_capture(
                topology, attacker_profile, attacker_tap, bits,
                mid, config, capture_seed(seed, index), drive_override=override)
            index += 1


def inject_mid_masquerade(scenario: AttackScenario, topology: BusTopology,
                          attacker_profile: EcuProfile, attacker_tap: float,
                          ownership: dict[int, int], config: AcquisitionConfig,
                          seed: int) -> Iterator[WaveformCapture]:
    """MID masquerading: victim identifiers, the attacker's own voltage."""
    if scenario.mode != MID_ONLY:
        raise ValidationError(f"scenario mode is {scenario.mode!r}, expected {MID_ONLY!r}")
    return generate_attack_stream(scenario, topology, attacker_profile,
                                  attacker_tap, ownership, config, seed)


def inject_mid_voltage_masquerade(scenario: AttackScenario, topology: BusTopology,
                                  attacker_profile: EcuProfile, attacker_tap: float,
                                  ownership: dict[int, int], config: AcquisitionConfig,
                                  seed: int) -> Iterator[WaveformCapture]:
    """MID-voltage masquerading: victim identifiers plus spoofed drive levels."""
    if scenario.mode != MID_VOLTAGE:
        raise ValidationError(
            f"scenario mode is {scenario.mode!r}, expected {MID_VOLTAGE!r}")
    return generate_attack_stream(scenario, topology, attacker_profile,
                                  attacker_tap, ownership, config, seed)
