"""Intrinsic-reconfiguration fault recovery simulator with real-time accounting.

Every candidate configuration an evolutionary search tries must be programmed
onto the one reconfigurable analog device and tested there, so each fitness
evaluation costs real hardware time.  This package simulates that loop,
charges an exact nanosecond ledger for it, and judges recovery the only way
that counts: function restored AND finished before the recovery deadline.
"""

from .benchmarks import (
    Benchmark,
    BenchmarkError,
    BenchmarkMismatch,
    DcDividerBenchmark,
    DecodeError,
    EvalResult,
    ResistiveNetwork,
    StepResponseBenchmark,
    builtin_benchmark_ids,
    compensator_benchmark,
    decode,
    divider_benchmark,
    evaluate,
    get_benchmark,
)
from .circuits import CircuitError, StepResponse, TransferFunction, settling_time, step_response
from .devices import (
    BitField,
    Configuration,
    DecodeMap,
    DeviceError,
    DeviceKind,
    DeviceProfile,
    EffectiveCircuitState,
    FaultMode,
    FaultSpec,
    FieldRole,
    InvalidFaultTarget,
    MissingTransferGeometry,
    TransferGeometry,
    apply_fault,
    apply_faults,
    baseline_state,
    builtin_profiles,
    get_profile,
    load_profiles,
    random_configuration,
    transfer_time,
)
from .durations import DurationError, format_duration, parse_duration
from .evolution import (
    EAParams,
    EvolutionError,
    GenerationStats,
    Preset,
    RouletteWheel,
    RunResult,
    Selection,
    Termination,
    Tournament,
    Truncation,
    reproduce,
    run,
    select,
)
from .ledger import (
    Classification,
    LedgerEntry,
    LedgerError,
    RecoveryRequirement,
    RecoveryVerdict,
    TimeLedger,
    ZeroCostEvaluation,
    charge,
    check,
    evaluation_budget,
    plan,
)
from .scenario import (
    CampaignReport,
    Scenario,
    ScenarioError,
    SeedOutcome,
    bundled_scenario_names,
    bundled_scenario_path,
    load_scenario,
    run_campaign,
    run_seed,
    write_artifacts,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
