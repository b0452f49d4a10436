"""End-to-end orchestration: simulate, train, evaluate, attack.

Everything here is deterministic in (config, seed): message order comes
from the period schedule, per-capture noise from the documented
seed-splitting rule, and payloads/phases from dedicated seed sequences
that cannot alias capture streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acquisition import capture_seed, compute_ratio_vector, synthesize_capture
from .attack import generate_attack_stream
from .config import ScenarioConfig
from .errors import ValidationError
from .evaluation import (
    CvResult,
    EvalReport,
    build_report,
    cross_validate,
    score_attack_campaign,
    train_test_split,
)
from .features import FeatureDataset, extract_features, write_dataset
from .forest import ForestHyperparams, ForestModel, predict, train
from .frames import CanFrame, encode_frame

_SCHEDULE_STREAM = 1
_PAYLOAD_STREAM = 2


@dataclass(frozen=True)
class ScheduledMessage:
    time_ms: float
    ecu_id: int
    mid: int


def benign_schedule(scenario: ScenarioConfig, seed: int) -> list[ScheduledMessage]:
    """Per-ECU periodic transmissions, merged in time order.

    Each ECU sends messages_per_ecu frames at its period, phase-offset by
    a seeded draw; an ECU owning several MIDs cycles through them.
    """
    rng = np.random.default_rng([seed, _SCHEDULE_STREAM])
    entries: list[ScheduledMessage] = []
    for profile in sorted(scenario.profiles, key=lambda p: p.ecu_id):
        phase = rng.uniform(0.0, profile.period_ms)
        mids = sorted(profile.owned_mids)
        for k in range(scenario.experiment.messages_per_ecu):
            entries.append(ScheduledMessage(
                time_ms=phase + k * profile.period_ms,
                ecu_id=profile.ecu_id,
                mid=mids[k % len(mids)],
            ))
    entries.sort(key=lambda m: (m.time_ms, m.ecu_id))
    return entries


def _capture_features(scenario: ScenarioConfig, capture) -> np.ndarray:
    acq = scenario.acquisition
    ratio = compute_ratio_vector(capture, guard=acq.guard_epsilon,
                                 min_retained=acq.min_ratio_samples)
    return extract_features(ratio)


def run_simulation(scenario: ScenarioConfig, seed: int | None = None,
                   progress=None) -> FeatureDataset:
    """Generate the benign feature dataset (Phases 1-2 per scheduled message)."""
    exp = scenario.experiment
    master = exp.seed if seed is None else seed
    schedule = benign_schedule(scenario, master)
    payload_rng = np.random.default_rng([master, _PAYLOAD_STREAM])
    profiles = {p.ecu_id: p for p in scenario.profiles}

    labels = np.empty(len(schedule), dtype=np.int64)
    mids = np.empty(len(schedule), dtype=np.int64)
    rows = np.empty((len(schedule), 40))
    for i, msg in enumerate(schedule):
        payload = payload_rng.bytes(exp.dlc)
        bits = encode_frame(CanFrame(msg.mid, exp.dlc, payload))
        capture = synthesize_capture(
            scenario.topology, profiles[msg.ecu_id], scenario.taps[msg.ecu_id],
            bits, msg.mid, scenario.acquisition, capture_seed(master, i))
        rows[i] = _capture_features(scenario, capture)
        labels[i] = msg.ecu_id
        mids[i] = msg.mid
        if progress and (i + 1) % 5000 == 0:
            progress(i + 1, len(schedule))
    if len(schedule) == 0:
        return FeatureDataset.empty()
    return FeatureDataset(labels, mids, rows)


def simulate_to_file(scenario: ScenarioConfig, out_path, seed: int | None = None,
                     progress=None) -> FeatureDataset:
    dataset = run_simulation(scenario, seed=seed, progress=progress)
    write_dataset(dataset, out_path)
    return dataset


def train_model(dataset: FeatureDataset, seed: int,
                hyperparams: ForestHyperparams | None = None,
                train_fraction: float | None = None) -> ForestModel:
    """Train on the whole dataset, or on a stratified fraction of it."""
    if train_fraction is None:
        return train(dataset.X, dataset.labels, hyperparams, seed=seed)
    train_idx, _ = train_test_split(dataset.labels, train_fraction,
                                    stratified=True, seed=seed)
    sub = dataset.subset(train_idx)
    return train(sub.X, sub.labels, hyperparams, seed=seed)


def run_split_experiment(dataset: FeatureDataset, train_fraction: float, seed: int,
                         hyperparams: ForestHyperparams | None = None
                         ) -> tuple[ForestModel, EvalReport, np.ndarray]:
    """Stratified split, train, score held-out data. Returns test indices too."""
    train_idx, test_idx = train_test_split(dataset.labels, train_fraction,
                                           stratified=True, seed=seed)
    sub = dataset.subset(train_idx)
    model = train(sub.X, sub.labels, hyperparams, seed=seed)
    pred, _ = predict(model, dataset.X[test_idx])
    report = build_report(
        dataset.labels[test_idx], pred, classes=model.classes,
        split=(f"stratified split: {len(train_idx)} train / {len(test_idx)} test "
               f"(fraction {train_fraction})"),
        seed=seed)
    return model, report, test_idx


def run_kfold_experiment(dataset: FeatureDataset, k: int, seed: int,
                         hyperparams: ForestHyperparams | None = None) -> CvResult:
    return cross_validate(dataset, k, seed=seed, hyperparams=hyperparams)


def attack_features(scenario: ScenarioConfig, seed: int | None = None,
                    progress=None) -> FeatureDataset:
    """Run the configured campaign and extract features per attack capture."""
    if scenario.attack is None:
        raise ValidationError("scenario has no attack section")
    if not scenario.attack.victim_mids:
        raise ValidationError("attack section lists no victims")
    exp = scenario.experiment
    master = exp.seed if seed is None else seed
    attacker = scenario.profile_of(scenario.attack.attacker_ecu_id)
    stream = generate_attack_stream(
        scenario.attack, scenario.topology, attacker,
        scenario.taps[attacker.ecu_id], scenario.ownership,
        scenario.acquisition, master, dlc=exp.dlc)
    labels: list[int] = []
    mids: list[int] = []
    rows: list[np.ndarray] = []
    for i, capture in enumerate(stream):
        rows.append(_capture_features(scenario, capture))
        labels.append(capture.ecu_label)
        mids.append(capture.mid)
        if progress and (i + 1) % 500 == 0:
            progress(i + 1, len(scenario.attack.victim_mids)
                     * scenario.attack.messages_per_victim)
    return FeatureDataset(np.array(labels), np.array(mids), np.array(rows))


def run_attack_campaign(scenario: ScenarioConfig, model: ForestModel,
                        seed: int | None = None
                        ) -> tuple[EvalReport, float, FeatureDataset]:
    """Score the configured campaign: identification report plus alert rate."""
    attack_set = attack_features(scenario, seed=seed)
    report, alert_rate = score_attack_campaign(model, attack_set, scenario.ownership)
    return report, alert_rate, attack_set
