"""Declarative scenario configs: YAML schema, validation, defaults.

A scenario file has ``topology``, ``ecus``, ``acquisition`` and
``experiment`` sections plus an optional ``attack`` section. Every config
carries a content hash so output artifacts can state exactly what
produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import yaml

from .acquisition import AcquisitionConfig
from .attack import AttackScenario, differential_from_canh
from .bus import BusTopology, EcuProfile, build_mid_ownership, build_topology
from .errors import ValidationError

DEFAULT_PERIOD_BOUNDS_MS = (10.0, 40.0)


@dataclass(frozen=True)
class ExperimentConfig:
    messages_per_ecu: int = 6000
    seed: int = 101
    train_fraction: float = 0.06
    kfold: int = 10
    dlc: int = 8

    def __post_init__(self):
        if self.messages_per_ecu < 0:
            raise ValidationError("experiment.messages_per_ecu must be nonnegative")
        if not 0 < self.train_fraction < 1:
            raise ValidationError("experiment.train_fraction must be in (0, 1)")
        if self.kfold < 2:
            raise ValidationError("experiment.kfold must be at least 2")
        if not 0 <= self.dlc <= 8:
            raise ValidationError("experiment.dlc must be in 0..8")


@dataclass(frozen=True)
class ScenarioConfig:
    topology: BusTopology
    profiles: tuple[EcuProfile, ...]
    taps: dict[int, float]  # ecu_id -> tap position
    ownership: dict[int, int]  # mid -> ecu_id
    acquisition: AcquisitionConfig
    experiment: ExperimentConfig
    attack: AttackScenario | None
    config_hash: str

    def profile_of(self, ecu_id: int) -> EcuProfile:
        for p in self.profiles:
            if p.ecu_id == ecu_id:
                return p
        raise ValidationError(f"no ECU with id {ecu_id} in scenario")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ValidationError(f"{where}: missing required key {key!r}")
    return section[key]


def _build_profiles(ecu_entries, period_bounds) -> tuple[tuple[EcuProfile, ...], dict[int, float]]:
    profiles = []
    taps: dict[int, float] = {}
    for i, entry in enumerate(ecu_entries):
        where = f"ecus[{i}]"
        ecu_id = int(_require(entry, "ecu_id", where))
        if ecu_id in taps:
            raise ValidationError(f"{where}: duplicate ecu_id {ecu_id}")
        period = float(_require(entry, "period_ms", where))
        lo, hi = period_bounds
        if not lo <= period <= hi:
            raise ValidationError(
                f"{where}: period_ms {period} outside [{lo}, {hi}]")
        try:
            profile = EcuProfile(
                ecu_id=ecu_id,
                owned_mids=frozenset(int(m) for m in _require(entry, "mids", where)),
                canh_dom=float(_require(entry, "canh_dom", where)),
                canl_dom=float(_require(entry, "canl_dom", where)),
                v_recessive=float(_require(entry, "v_recessive", where)),
                period_ms=period,
                sigma_v=float(entry.get("sigma_v", 0.002)),
            )
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from exc
        profiles.append(profile)
        taps[ecu_id] = float(_require(entry, "tap_pos", where))
    return tuple(profiles), taps


def _build_attack(section, ownership) -> AttackScenario:
    where = "attack"
    victims = _require(section, "victims", where)
    if not isinstance(victims, list):
        raise ValidationError(f"{where}.victims must be a list")
    mids, spoofs, periods = [], [], []
    for j, v in enumerate(victims):
        vwhere = f"{where}.victims[{j}]"
        mids.append(int(_require(v, "mid", vwhere)))
        periods.append(float(v.get("period_ms", 20.0)))
        if "spoof_differential" in v:
            spoofs.append(float(v["spoof_differential"]))
        elif "spoof_canh" in v:
            spoofs.append(differential_from_canh(float(v["spoof_canh"])))
    mode = str(_require(section, "mode", where))
    if spoofs and len(spoofs) != len(mids):
        raise ValidationError(
            f"{where}: spoof levels must be given for all victims or none")
    try:
        return AttackScenario(
            attacker_ecu_id=int(_require(section, "attacker_ecu_id", where)),
            mode=mode,
            victim_mids=tuple(mids),
            spoof_differentials=tuple(spoofs),
            injection_periods_ms=tuple(periods),
            messages_per_victim=int(section.get("messages_per_victim", 600)),
        )
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def scenario_from_dict(doc: dict, config_hash: str) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ValidationError("config root must be a mapping")
    topo_sec = _require(doc, "topology", "config")
    ecu_sec = _require(doc, "ecus", "config")
    acq_sec = doc.get("acquisition", {}) or {}
    exp_sec = doc.get("experiment", {}) or {}

    bounds = tuple(doc.get("period_bounds_ms", DEFAULT_PERIOD_BOUNDS_MS))
    profiles, taps = _build_profiles(ecu_sec, bounds)
    ownership = build_mid_ownership(profiles)

    try:
        topology = build_topology(
            ohms_per_meter=float(_require(topo_sec, "ohms_per_meter", "topology")),
            length_m=float(_require(topo_sec, "length_m", "topology")),
            sp_a_pos=float(_require(topo_sec, "sp_a_pos", "topology")),
            sp_b_pos=float(_require(topo_sec, "sp_b_pos", "topology")),
            r_tail_a=float(_require(topo_sec, "r_tail_a", "topology")),
            r_tail_b=float(_require(topo_sec, "r_tail_b", "topology")),
            ecu_taps=tuple(taps[p.ecu_id] for p in profiles),
        )
    except ValidationError as exc:
        raise ValidationError(f"topology: {exc}") from exc

    known = {
        "sample_rate", "adc_bits", "adc_range", "bit_rate", "noise_sigma",
        "common_mode_amplitude", "common_mode_freq_hz", "settle_skip",
        "quantize_enabled", "guard_epsilon", "min_ratio_samples",
    }
    unknown = set(acq_sec) - known
    if unknown:
        raise ValidationError(f"acquisition: unknown keys {sorted(unknown)}")
    if "adc_range" in acq_sec:
        acq_sec = dict(acq_sec, adc_range=tuple(acq_sec["adc_range"]))
    try:
        acquisition = AcquisitionConfig(**acq_sec)
        experiment = ExperimentConfig(**exp_sec)
    except TypeError as exc:
        raise ValidationError(f"config: {exc}") from exc

    attack = None
    if doc.get("attack"):
        attack = _build_attack(doc["attack"], ownership)
        if attack.attacker_ecu_id not in taps:
            raise ValidationError(
                f"attack: attacker_ecu_id {attack.attacker_ecu_id} is not a configured ECU")

    return ScenarioConfig(
        topology=topology,
        profiles=profiles,
        taps=taps,
        ownership=ownership,
        acquisition=acquisition,
        experiment=experiment,
        attack=attack,
        config_hash=config_hash,
    )


def load_scenario(path) -> ScenarioConfig:
    """Parse and validate a scenario file; errors carry the offending key path."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError:
        raise
    config_hash = hashlib.sha256(raw).hexdigest()
    try:
        doc = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    try:
        return scenario_from_dict(doc, config_hash)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def default_scenario_dict() -> dict:
    """The stock ten-ECU bench: one MID per ECU, periods cycling 10/20/40 ms.

    Taps sit every metre along a 10 m trunk sampled near both ends. Drive
    levels differ only by millivolt-scale process variation, so identity
    information lives in the inter-point ratio, not in absolute levels.
    The attack section reproduces the stock campaign: ECU 5 spoofing MIDs
    3, 7 and 8 with matched CANH levels.
    """
    ecus = []
    periods = (10, 20, 40)
    for i in range(1, 11):
        ecus.append({
            "ecu_id": i,
            "tap_pos": 0.5 + (i - 1) * 1.0,
            "mids": [i],
            "canh_dom": round(3.55 + 0.002 * (i - 1), 4),
            "canl_dom": round(1.55 - 0.002 * (i - 1), 4),
            "v_recessive": round(2.2 + 0.05 * i, 4),
            "period_ms": periods[(i - 1) % 3],
            "sigma_v": 0.002,
        })
    return {
        "topology": {
            "ohms_per_meter": 0.025,
            "length_m": 10.0,
            "sp_a_pos": 0.2,
            "sp_b_pos": 9.8,
            "r_tail_a": 120.0,
            "r_tail_b": 120.0,
        },
        "ecus": ecus,
        "acquisition": {
            "sample_rate": 40_000_000,
            "adc_bits": 14,
            "adc_range": [0.0, 5.0],
            "bit_rate": 500_000,
            "noise_sigma": 0.004,
            "common_mode_amplitude": 0.0,
            "settle_skip": 0.10,
            "quantize_enabled": True,
        },
        "experiment": {
            "messages_per_ecu": 6000,
            "seed": 101,
            "train_fraction": 0.06,
            "kfold": 10,
            "dlc": 8,
        },
        "attack": {
            "attacker_ecu_id": 5,
            "mode": "mid-voltage",
            "messages_per_victim": 600,
            "victims": [
                {"mid": 3, "spoof_canh": 3.2185, "period_ms": 10},
                {"mid": 7, "spoof_canh": 3.3114, "period_ms": 20},
                {"mid": 8, "spoof_canh": 3.405, "period_ms": 40},
            ],
        },
    }


def default_scenario() -> ScenarioConfig:
    doc = default_scenario_dict()
    digest = hashlib.sha256(
        json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()
    return scenario_from_dict(doc, digest)
