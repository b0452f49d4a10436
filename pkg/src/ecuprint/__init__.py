"""Two-point CAN bus voltage fingerprinting toolkit.

Synthesizes physically grounded two-point voltage captures of CAN frames,
fingerprints transmitting ECUs from the inter-point voltage ratio, and
detects MID and MID-voltage masquerading attacks.
"""

from .acquisition import (
    AcquisitionConfig,
    WaveformCapture,
    capture_seed,
    compute_ratio_vector,
    quantize,
    synthesize_capture,
    write_trace,
)
from .attack import (
    AttackScenario,
    differential_from_canh,
    generate_attack_stream,
    inject_mid_masquerade,
    inject_mid_voltage_masquerade,
    match_single_point,
    voltage_search_space,
)
from .bus import (
    BusTopology,
    EcuProfile,
    apply_environment,
    build_mid_ownership,
    build_topology,
    divider_voltage,
    expected_ratio,
    nodal_solve,
    ratio_from_resistances,
    voltage_at_sp,
)
from .config import ExperimentConfig, ScenarioConfig, default_scenario, load_scenario
from .errors import (
    CodecError,
    CrcMismatch,
    EcuPrintError,
    FrameFormatError,
    InsufficientSignalError,
    StuffingViolation,
    TrainingError,
    TruncatedFrame,
    ValidationError,
)
from .evaluation import (
    ConfusionMatrix,
    EvalReport,
    build_report,
    confusion_matrix,
    cross_validate,
    macro_f1,
    precision_recall_f1,
    score_attack_campaign,
    stratified_kfold,
    train_test_split,
)
from .features import (
    FeatureDataset,
    extract_features,
    feature_names,
    read_dataset,
    write_dataset,
)
from .forest import (
    ForestHyperparams,
    ForestModel,
    Verdict,
    detect_masquerade,
    load_model,
    predict,
    save_model,
    train,
)
from .frames import (
    BitStream,
    CanFrame,
    apply_bit_stuffing,
    compute_crc15,
    decode_frame,
    encode_frame,
    fingerprintable_region,
    remove_bit_stuffing,
)
from .pipeline import (
    attack_features,
    benign_schedule,
    run_attack_campaign,
    run_kfold_experiment,
    run_simulation,
    run_split_experiment,
    simulate_to_file,
    train_model,
)

__version__ = "0.1.0"
