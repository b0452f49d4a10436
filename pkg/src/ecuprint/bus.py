"""Resistive two-point bus model.

The twisted pair is collapsed to one resistive line carrying the
differential voltage. A transmitting node is an ideal source at its tap;
towards each sampling point the signal sees the wire resistance of that
stretch and, beyond the point, a tail resistance to ground. The observed
voltages at the two points then follow plain voltage dividers, and their
ratio depends only on where the transmitter sits, never on how hard it
drives.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ValidationError

SP_A = "a"
SP_B = "b"

# Transceiver output limits (dominant per line, differential, recessive).
CANH_DOM_RANGE = (2.75, 4.5)
CANL_DOM_RANGE = (0.5, 2.25)
DIFF_DOM_RANGE = (1.5, 3.0)
V_RECESSIVE_RANGE = (2.0, 3.0)


@dataclass(frozen=True)
class BusTopology:
    """Linear trunk with two sampling points and ECU taps strictly between them.

    ``r_tail_a`` / ``r_tail_b`` are the loads beyond each sampling point
    (remaining wire plus termination), exposed as free parameters.
    """

    ohms_per_meter: float
    length_m: float
    sp_a_pos: float
    sp_b_pos: float
    r_tail_a: float
    r_tail_b: float
    ecu_taps: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "ecu_taps", tuple(float(t) for t in self.ecu_taps))
        if self.ohms_per_meter <= 0:
            raise ValidationError("ohms_per_meter must be positive")
        if self.length_m <= 0:
            raise ValidationError("trunk length must be positive")
        if self.r_tail_a <= 0 or self.r_tail_b <= 0:
            raise ValidationError("tail resistances must be positive")
        if not (0 <= self.sp_a_pos < self.sp_b_pos <= self.length_m):
            raise ValidationError(
                "sampling points must satisfy 0 <= sp_a_pos < sp_b_pos <= length")
        seen_pairs = set()
        for tap in self.ecu_taps:
            if not (self.sp_a_pos < tap < self.sp_b_pos):
                raise ValidationError(
                    f"ECU tap at {tap} m must lie strictly between the sampling points")
            r_a, r_b = self._path_resistances(tap)
            if abs(r_a - r_b) <= 1e-9 * (r_a + r_b):
                raise ValidationError(
                    f"ECU tap at {tap} m is equidistant from the sampling points")
            if (r_a, r_b) in seen_pairs:
                raise ValidationError(
                    f"two ECU taps share the path-resistance pair ({r_a}, {r_b})")
            seen_pairs.add((r_a, r_b))

    def _path_resistances(self, tap: float) -> tuple[float, float]:
        r_a = (tap - self.sp_a_pos) * self.ohms_per_meter
        r_b = (self.sp_b_pos - tap) * self.ohms_per_meter
        return r_a, r_b

    def path_resistances(self, tap: float) -> tuple[float, float]:
        """Wire resistance from a known tap to SP_a and SP_b."""
        self._require_tap(tap)
        return self._path_resistances(tap)

    def _require_tap(self, tap: float):
        if tap not in self.ecu_taps:
            raise ValidationError(f"unknown ECU tap position {tap}")


@dataclass(frozen=True)
class EcuProfile:
    """Per-ECU electrical character and transmit schedule."""

    ecu_id: int
    owned_mids: frozenset[int]
    canh_dom: float
    canl_dom: float
    v_recessive: float
    period_ms: float
    sigma_v: float = 0.002

    def __post_init__(self):
        object.__setattr__(self, "owned_mids", frozenset(int(m) for m in self.owned_mids))
        if self.ecu_id < 0:
            raise ValidationError("ecu_id must be nonnegative")
        for mid in self.owned_mids:
            if not 0 <= mid < 2 ** 11:
                raise ValidationError(f"owned MID {mid:#x} does not fit in 11 bits")
        if not CANH_DOM_RANGE[0] <= self.canh_dom <= CANH_DOM_RANGE[1]:
            raise ValidationError(f"canh_dom {self.canh_dom} outside {CANH_DOM_RANGE}")
        if not CANL_DOM_RANGE[0] <= self.canl_dom <= CANL_DOM_RANGE[1]:
            raise ValidationError(f"canl_dom {self.canl_dom} outside {CANL_DOM_RANGE}")
        diff = self.canh_dom - self.canl_dom
        if not DIFF_DOM_RANGE[0] <= diff <= DIFF_DOM_RANGE[1]:
            raise ValidationError(
                f"dominant differential {diff:.4f} outside {DIFF_DOM_RANGE}")
        if not V_RECESSIVE_RANGE[0] <= self.v_recessive <= V_RECESSIVE_RANGE[1]:
            raise ValidationError(
                f"v_recessive {self.v_recessive} outside {V_RECESSIVE_RANGE}")
        if self.period_ms <= 0:
            raise ValidationError("period_ms must be positive")
        if self.sigma_v < 0:
            raise ValidationError("sigma_v must be nonnegative")

    @property
    def differential_dom(self) -> float:
        return self.canh_dom - self.canl_dom

    @property
    def common_mode_dom(self) -> float:
        return 0.5 * (self.canh_dom + self.canl_dom)


def build_topology(*, ohms_per_meter: float, length_m: float, sp_a_pos: float,
                   sp_b_pos: float, r_tail_a: float, r_tail_b: float,
                   ecu_taps: Sequence[float]) -> BusTopology:
    """Validated topology; segment resistances derive from position deltas."""
    return BusTopology(
        ohms_per_meter=ohms_per_meter,
        length_m=length_m,
        sp_a_pos=sp_a_pos,
        sp_b_pos=sp_b_pos,
        r_tail_a=r_tail_a,
        r_tail_b=r_tail_b,
        ecu_taps=tuple(ecu_taps),
    )


def build_mid_ownership(profiles: Sequence[EcuProfile]) -> dict[int, int]:
    """MID -> ecu_id map; ownership must be disjoint across ECUs."""
    ownership: dict[int, int] = {}
    seen_ids = set()
    for p in profiles:
        if p.ecu_id in seen_ids:
            raise ValidationError(f"duplicate ecu_id {p.ecu_id}")
        seen_ids.add(p.ecu_id)
        for mid in p.owned_mids:
            if mid in ownership:
                raise ValidationError(
                    f"MID {mid:#x} owned by both ECU {ownership[mid]} and ECU {p.ecu_id}")
            ownership[mid] = p.ecu_id
    return ownership


def divider_voltage(drive_v: float, r_path: float, r_tail: float) -> float:
    """Voltage at a sampling point: drive through r_path into r_tail to ground."""
    return drive_v * r_tail / (r_path + r_tail)


def ratio_from_resistances(r_a: float, r_b: float, r_k: float, r_l: float) -> float:
    """Inter-point ratio for path resistances (r_a, r_b) and tails (r_k, r_l).

    (r_k / r_l) * (r_b + r_l) / (r_a + r_k) — homogeneous of degree zero, so
    uniform resistance scaling leaves it unchanged; the drive voltage never
    enters.
    """
    return (r_k / r_l) * (r_b + r_l) / (r_a + r_k)


def voltage_at_sp(topology: BusTopology, tap: float, drive_v: float, point: str) -> float:
    """Differential voltage observed at one sampling point for a dominant drive."""
    r_a, r_b = topology.path_resistances(tap)
    if point == SP_A:
        return divider_voltage(drive_v, r_a, topology.r_tail_a)
    if point == SP_B:
        return divider_voltage(drive_v, r_b, topology.r_tail_b)
    raise ValidationError(f"sampling point must be '{SP_A}' or '{SP_B}', got {point!r}")


def expected_ratio(topology: BusTopology, tap: float) -> float:
    """Location fingerprint: V_SPa / V_SPb for any dominant drive at this tap."""
    r_a, r_b = topology.path_resistances(tap)
    return ratio_from_resistances(r_a, r_b, topology.r_tail_a, topology.r_tail_b)


@dataclass(frozen=True)
class NodalSolution:
    """Node voltages from the full linear network solve."""

    v_sp_a: float
    v_sp_b: float
    v_taps: dict[float, float]


def nodal_solve(topology: BusTopology, tap: float, drive_v: float) -> NodalSolution:
    """Exact node voltages with an ideal source at ``tap``.

    Independent check of the closed-form dividers: assembles the
    conductance matrix of the whole trunk (every tap is a node) with the
    tails to ground, pins the driven node, and solves the linear system.
    """
    topology._require_tap(tap)
    positions = [topology.sp_a_pos] + sorted(topology.ecu_taps) + [topology.sp_b_pos]
    n = len(positions)
    g = np.zeros((n, n))
    for i in range(n - 1):
        seg = (positions[i + 1] - positions[i]) * topology.ohms_per_meter
        cond = 1.0 / seg
        g[i, i] += cond
        g[i + 1, i + 1] += cond
        g[i, i + 1] -= cond
        g[i + 1, i] -= cond
    g[0, 0] += 1.0 / topology.r_tail_a
    g[n - 1, n - 1] += 1.0 / topology.r_tail_b

    rhs = np.zeros(n)
    k = positions.index(tap)
    g[k, :] = 0.0
    g[k, k] = 1.0
    rhs[k] = drive_v
    try:
        v = np.linalg.solve(g, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValidationError(f"singular network: {exc}") from exc
    v_taps = {pos: float(v[i]) for i, pos in enumerate(positions[1:-1], start=1)}
    return NodalSolution(v_sp_a=float(v[0]), v_sp_b=float(v[-1]), v_taps=v_taps)


def apply_environment(topology: BusTopology, resistance_scale: float = 1.0,
                      profiles: Sequence[EcuProfile] = (),
                      voltage_drift: float = 0.0):
    """Uniform environmental perturbation of the whole channel.

    Every wire and tail resistance is multiplied by ``resistance_scale``;
    every ECU's dominant differential is shifted by ``voltage_drift``
    (split symmetrically across the pair). Returns the perturbed
    (topology, profiles).
    """
    if resistance_scale <= 0:
        raise ValidationError("resistance_scale must be positive")
    new_topology = replace(
        topology,
        ohms_per_meter=topology.ohms_per_meter * resistance_scale,
        r_tail_a=topology.r_tail_a * resistance_scale,
        r_tail_b=topology.r_tail_b * resistance_scale,
    )
    new_profiles = tuple(
        replace(p,
                canh_dom=p.canh_dom + voltage_drift / 2.0,
                canl_dom=p.canl_dom - voltage_drift / 2.0)
        for p in profiles
    )
    return new_topology, new_profiles
