"""Scenario files: device + benchmark + faults + search + deadline, bound together.

A scenario is a versioned TOML document (conventionally ``*.scenario``)
describing one recovery problem end to end.  Loading resolves every cross
reference eagerly so a bad file fails before any simulated hardware time is
spent.  Campaigns run one seeded search per listed seed; seeds are
independent, so they may execute in parallel without changing any result.
"""

from __future__ import annotations

import csv
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .benchmarks import (
    Benchmark,
    DcDividerBenchmark,
    StepResponseBenchmark,
    get_benchmark,
)
from .circuits import TransferFunction
from .devices import (
    BitField,
    DeviceProfile,
    FaultMode,
    FaultSpec,
    FieldRole,
    get_profile,
    profile_from_dict,
)
from .durations import parse_duration
from .evolution import (
    EAParams,
    Preset,
    RouletteWheel,
    RunResult,
    Selection,
    Tournament,
    Truncation,
    run,
)
from .ledger import Classification, RecoveryRequirement, RecoveryVerdict, check

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    id: str
    device: DeviceProfile
    benchmark: Benchmark
    faults: tuple[FaultSpec, ...]
    ea: EAParams
    requirement: RecoveryRequirement
    seeds: tuple[int, ...]
    description: str = ""

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ScenarioError(f"scenario {self.id!r} lists no seeds")


@dataclass(frozen=True, eq=False)
class SeedOutcome:
    seed: int
    result: RunResult
    verdict: RecoveryVerdict

    @property
    def effective(self) -> bool:
        return self.verdict.effective


@dataclass(frozen=True, eq=False)
class CampaignReport:
    scenario_id: str
    outcomes: tuple[SeedOutcome, ...]

    @property
    def success_rate(self) -> float:
        return sum(o.effective for o in self.outcomes) / len(self.outcomes)

    @property
    def t_r_values(self) -> list[int]:
        return [o.result.ledger.total_ns for o in self.outcomes]

    def t_r_distribution(self) -> tuple[int, float, int]:
        values = self.t_r_values
        return min(values), float(statistics.median(values)), max(values)

    def verdict_counts(self) -> dict:
        counts = {(True, True): 0, (True, False): 0, (False, True): 0, (False, False): 0}
        for o in self.outcomes:
            counts[(o.verdict.logically_correct, o.verdict.temporally_correct)] += 1
        return counts


# --- scenario file parsing -------------------------------------------------


def _table(doc: dict, key: str, origin: str) -> dict:
    value = doc.get(key)
    if not isinstance(value, dict):
        raise ScenarioError(f"{origin}: missing [{key}] table")
    return value


def _duration(table: dict, key: str, origin: str, context: str) -> int:
    raw = table.get(key)
    if raw is None:
        raise ScenarioError(f"{origin}: [{context}] missing {key}")
    try:
        return parse_duration(str(raw))
    except ValueError as exc:
        raise ScenarioError(f"{origin}: [{context}] {key}: {exc}") from exc


def _parse_selection(raw, origin: str) -> Selection:
    if not isinstance(raw, dict) or "method" not in raw:
        raise ScenarioError(f"{origin}: [ea] selection must be a table with a method")
    method = raw["method"]
    if method == "tournament":
        return Tournament(k=int(raw.get("k", 3)))
    if method == "truncation":
        return Truncation(fraction=float(raw.get("fraction", 0.25)))
    if method == "roulette":
        return RouletteWheel()
    raise ScenarioError(f"{origin}: [ea] unknown selection method {method!r}")


def _parse_ea(table: dict, origin: str) -> EAParams:
    kwargs = {}
    if "preset" in table:
        try:
            kwargs["preset"] = Preset(table["preset"])
        except ValueError:
            raise ScenarioError(
                f"{origin}: [ea] unknown preset {table['preset']!r} "
                f"(expected one of: {', '.join(p.value for p in Preset)})"
            ) from None
    for key in ("population_size", "max_generations", "elitism"):
        if key in table:
            kwargs[key] = int(table[key])
    for key in ("mutation_rate", "crossover_rate"):
        if key in table:
            kwargs[key] = float(table[key])
    for key in ("stop_on_success", "seed_baseline"):
        if key in table:
            kwargs[key] = bool(table[key])
    if "selection" in table:
        kwargs["selection"] = _parse_selection(table["selection"], origin)
    try:
        return EAParams(**kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{origin}: [ea] {exc}") from exc


def _parse_step_benchmark(table: dict, origin: str) -> StepResponseBenchmark:
    fields = []
    cursor = 0
    for raw in table.get("fields", []):
        try:
            width = int(raw["width"])
            fields.append(
                BitField(
                    name=raw["name"],
                    start=cursor,
                    width=width,
                    role=FieldRole.PARAMETER,
                    lo=float(raw["lo"]),
                    hi=float(raw["hi"]),
                    gray=bool(raw.get("gray", True)),
                    module=int(raw["module"]) if "module" in raw else None,
                    dead_value=float(raw.get("dead_value", 0.0)),
                )
            )
        except KeyError as exc:
            raise ScenarioError(
                f"{origin}: [benchmark.fields] entry missing key {exc}"
            ) from exc
        cursor += width
    try:
        return StepResponseBenchmark(
            id=table.get("id", "custom"),
            plant=TransferFunction(
                tuple(float(c) for c in table["plant_num"]),
                tuple(float(c) for c in table["plant_den"]),
            ),
            fields=tuple(fields),
            test_window_ns=_duration(table, "test_window", origin, "benchmark"),
            max_settling_time_s=_duration(table, "max_settling_time", origin, "benchmark") / 1e9,
            band=float(table.get("band", 0.02)),
            divergence_bound=float(table.get("divergence_bound", 1e6)),
        )
    except KeyError as exc:
        raise ScenarioError(f"{origin}: [benchmark] missing key {exc}") from exc
    except ValueError as exc:
        raise ScenarioError(f"{origin}: [benchmark] {exc}") from exc


def _parse_divider_benchmark(table: dict, origin: str) -> DcDividerBenchmark:
    try:
        return DcDividerBenchmark(
            id=table.get("id", "custom"),
            top_switches=tuple(int(i) for i in table["top_switches"]),
            bottom_switches=tuple(int(i) for i in table["bottom_switches"]),
            target_dc_ratio=float(table["target_dc_ratio"]),
            test_window_ns=_duration(table, "test_window", origin, "benchmark"),
            band=float(table.get("band", 0.02)),
        )
    except KeyError as exc:
        raise ScenarioError(f"{origin}: [benchmark] missing key {exc}") from exc
    except ValueError as exc:
        raise ScenarioError(f"{origin}: [benchmark] {exc}") from exc


def _parse_benchmark(table: dict, origin: str) -> Benchmark:
    if "id" in table and "kind" not in table:
        try:
            return get_benchmark(table["id"])
        except ValueError as exc:
            raise ScenarioError(f"{origin}: [benchmark] {exc}") from exc
    kind = table.get("kind")
    if kind == "step-response":
        return _parse_step_benchmark(table, origin)
    if kind == "dc-divider":
        return _parse_divider_benchmark(table, origin)
    raise ScenarioError(
        f"{origin}: [benchmark] needs a built-in id or kind = "
        f"'step-response' | 'dc-divider'"
    )


def _parse_faults(doc: dict, origin: str) -> tuple[FaultSpec, ...]:
    faults = []
    for i, raw in enumerate(doc.get("faults", [])):
        context = f"faults[{i}]"
        try:
            mode = FaultMode(raw["mode"])
        except KeyError:
            raise ScenarioError(f"{origin}: [{context}] missing mode") from None
        except ValueError:
            raise ScenarioError(
                f"{origin}: [{context}] unknown mode {raw['mode']!r} (expected one "
                f"of: {', '.join(m.value for m in FaultMode)})"
            ) from None
        target = raw.get("target")
        if target is None:
            raise ScenarioError(f"{origin}: [{context}] missing target")
        onset_ns = 0
        if "onset" in raw:
            onset_ns = _duration(raw, "onset", origin, context)
        try:
            faults.append(
                FaultSpec(
                    mode=mode,
                    target=target if isinstance(target, str) else int(target),
                    multiplier=float(raw.get("multiplier", 1.0)),
                    onset_ns=onset_ns,
                )
            )
        except ValueError as exc:
            raise ScenarioError(f"{origin}: [{context}] {exc}") from exc
    return tuple(faults)


def _validate_fault_targets(scenario: Scenario, origin: str) -> None:
    device, benchmark = scenario.device, scenario.benchmark
    if isinstance(benchmark, StepResponseBenchmark):
        drift_targets = {f.name for f in benchmark.fields} | {"plant_gain"}
    else:
        drift_targets = set()
    for fault in scenario.faults:
        if fault.mode in (FaultMode.STUCK_OPEN, FaultMode.STUCK_CLOSED):
            if not 0 <= fault.target < device.config_bits:
                raise ScenarioError(
                    f"{origin}: fault targets switch {fault.target}, "
                    f"{device.name} has {device.config_bits} bits"
                )
        elif fault.mode is FaultMode.MODULE_DEAD:
            if not 0 <= fault.target < device.size:
                raise ScenarioError(
                    f"{origin}: fault targets module {fault.target}, "
                    f"{device.name} has {device.size}"
                )
        else:
            if fault.target not in drift_targets:
                raise ScenarioError(
                    f"{origin}: drift fault targets unknown parameter "
                    f"{fault.target!r} (known: {', '.join(sorted(drift_targets)) or 'none'})"
                )


def load_scenario(path: str | Path, extra_profiles: Sequence[DeviceProfile] = ()) -> Scenario:
    """Parse and fully validate a scenario file."""
    path = Path(path)
    origin = str(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"{origin}: no such scenario file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{origin}: {exc}") from exc

    if doc.get("schema") != SCHEMA_VERSION:
        raise ScenarioError(f"{origin}: expected schema = {SCHEMA_VERSION}")
    scenario_id = doc.get("id")
    if not scenario_id:
        raise ScenarioError(f"{origin}: missing scenario id")

    device_table = _table(doc, "device", origin)
    if "profile" in device_table:
        try:
            device = get_profile(device_table["profile"], extra_profiles)
        except ValueError as exc:
            raise ScenarioError(f"{origin}: [device] {exc}") from exc
    else:
        try:
            device = profile_from_dict(device_table, origin=origin)
        except ValueError as exc:
            raise ScenarioError(f"{origin}: [device] {exc}") from exc

    benchmark = _parse_benchmark(_table(doc, "benchmark", origin), origin)
    ea = _parse_ea(doc.get("ea", {}), origin)

    requirement_table = _table(doc, "requirement", origin)
    try:
        classification = Classification(requirement_table.get("classification", "hard"))
    except ValueError:
        raise ScenarioError(
            f"{origin}: [requirement] classification must be 'hard' or 'soft'"
        ) from None
    requirement = RecoveryRequirement(
        deadline_ns=_duration(requirement_table, "deadline", origin, "requirement"),
        classification=classification,
        description=requirement_table.get("description", ""),
    )

    seeds = doc.get("seeds")
    if not isinstance(seeds, list) or not seeds:
        raise ScenarioError(f"{origin}: seeds must be a non-empty list of integers")

    scenario = Scenario(
        id=scenario_id,
        device=device,
        benchmark=benchmark,
        faults=_parse_faults(doc, origin),
        ea=ea,
        requirement=requirement,
        seeds=tuple(int(s) for s in seeds),
        description=doc.get("description", ""),
    )
    # resolve every cross-reference now: benchmark/device fit and fault targets
    try:
        scenario.benchmark.decode_map_for(scenario.device)
    except ValueError as exc:
        raise ScenarioError(f"{origin}: {exc}") from exc
    _validate_fault_targets(scenario, origin)
    return scenario


# --- bundled scenarios -----------------------------------------------------


def bundled_scenario_names() -> list[str]:
    root = resources.files("reconfigsim").joinpath("scenarios")
    return sorted(p.name[: -len(".scenario")] for p in root.iterdir() if p.name.endswith(".scenario"))


def bundled_scenario_path(name: str) -> Path:
    path = Path(str(resources.files("reconfigsim").joinpath("scenarios", f"{name}.scenario")))
    if not path.exists():
        raise ScenarioError(
            f"no bundled scenario {name!r} (bundled: {', '.join(bundled_scenario_names())})"
        )
    return path


def resolve_scenario_path(ref: str) -> Path:
    """A filesystem path, or failing that the name of a bundled scenario."""
    path = Path(ref)
    if path.exists():
        return path
    if path.suffix == "" and "/" not in ref:
        return bundled_scenario_path(ref)
    raise ScenarioError(f"{ref}: no such scenario file")


# --- running ----------------------------------------------------------------


def run_seed(scenario: Scenario, seed: int) -> SeedOutcome:
    """One deterministic recovery run at the given seed, plus its verdict."""
    params = replace(scenario.ea, rng_seed=seed)
    result = run(
        params,
        scenario.benchmark,
        scenario.device,
        faults=scenario.faults,
        deadline_ns=scenario.requirement.deadline_ns,
    )
    verdict = check(result.ledger.total_ns, scenario.requirement, result.logically_correct)
    return SeedOutcome(seed=seed, result=result, verdict=verdict)


def run_campaign(
    scenario: Scenario,
    seeds: Optional[Sequence[int]] = None,
    jobs: int = 1,
) -> CampaignReport:
    """Run every seed (scenario's own list unless overridden), sorted by seed.

    ``jobs > 1`` fans seeds out to worker processes; per-seed results are
    identical to a sequential run by construction.
    """
    seed_list = list(scenario.seeds if seeds is None else seeds)
    if not seed_list:
        raise ScenarioError("campaign needs at least one seed")
    if jobs > 1 and len(seed_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_seed, [scenario] * len(seed_list), seed_list))
    else:
        outcomes = [run_seed(scenario, seed) for seed in seed_list]
    outcomes.sort(key=lambda o: o.seed)
    return CampaignReport(scenario_id=scenario.id, outcomes=tuple(outcomes))


# --- artifacts ---------------------------------------------------------------


def write_fitness_csv(result: RunResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["generation", "best", "mean", "cumulative_T_r_ns"])
        for row in result.history:
            writer.writerow(
                [row.generation, repr(row.best_fitness), repr(row.mean_fitness), row.cumulative_ns]
            )


def write_summary_csv(report: CampaignReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["seed", "termination", "evaluations", "T_r_ns", "logical", "temporal", "effective"]
        )
        for o in report.outcomes:
            writer.writerow(
                [
                    o.seed,
                    o.result.termination.value,
                    o.result.evaluations,
                    o.result.ledger.total_ns,
                    str(o.verdict.logically_correct).lower(),
                    str(o.verdict.temporally_correct).lower(),
                    str(o.verdict.effective).lower(),
                ]
            )


def write_artifacts(
    scenario: Scenario,
    report: CampaignReport,
    out_dir: str | Path,
    trace: bool = False,
) -> None:
    """Write the per-seed and campaign CSV artifacts under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(report, out / "summary.csv")
    for o in report.outcomes:
        seed_dir = out / f"seed-{o.seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        o.result.ledger.write_csv(seed_dir / "ledger.csv")
        write_fitness_csv(o.result, seed_dir / "fitness.csv")
        if trace and isinstance(scenario.benchmark, StepResponseBenchmark):
            if o.result.evaluations:
                response = scenario.benchmark.response_for(o.result.best, scenario.faults)
                response.write_csv(seed_dir / "best_response.csv")
