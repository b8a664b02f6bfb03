"""Reconfigurable analog device models.

Covers the two device families used for analog reconfiguration -- module-grain
FPAAs and switch-grain FPTAs -- their configuration bitstreams, programming
and download timing, and injected hardware faults.  All types are immutable
values; fault application never mutates the stored configuration, it produces
the *effective* circuit state the hardware would realize.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .durations import NS_PER_MS, from_ms, to_ms

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class DeviceError(ValueError):
    """Invalid device profile, configuration, or fault description."""


class MissingTransferGeometry(DeviceError):
    """The profile does not document bus width / clock / bitstream size."""


class InvalidFaultTarget(DeviceError):
    """Fault names a switch, module, or parameter the device does not have."""


class DeviceKind(Enum):
    FPAA = "FPAA"
    FPTA = "FPTA"


# Fallback bitstream geometry when a profile documents only its programming
# time: 8 bytes of configuration per module/cell.  Only the programming time
# enters the timing ledger, so this default affects genome length alone.
DEFAULT_BYTES_PER_MODULE = 8


@dataclass(frozen=True)
class TransferGeometry:
    """Download path geometry: bits per transfer, clock, bitstream size."""

    bus_width_bits: int
    clock_hz: int
    bitstream_bytes: int

    def __post_init__(self) -> None:
        if self.bus_width_bits <= 0 or self.clock_hz <= 0:
            raise DeviceError("bus width and clock must be positive")
        if self.bitstream_bytes < 0:
            raise DeviceError("bitstream size cannot be negative")


@dataclass(frozen=True)
class DeviceProfile:
    """A reconfigurable analog device: granularity, geometry, and timing.

    ``size`` counts modules for FPAAs and cells for FPTAs.  ``t_program_ns``
    is the tabulated device programming time; where transfer geometry is
    known, the download time is taken to be subsumed by it (it is exposed
    separately by :func:`transfer_time` for analysis but never charged twice).
    """

    name: str
    kind: DeviceKind
    size: int
    t_program_ns: int
    transfer: TransferGeometry | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise DeviceError("device name must be non-empty")
        if self.size <= 0:
            raise DeviceError(f"{self.name}: size must be positive")
        if self.t_program_ns <= 0:
            raise DeviceError(f"{self.name}: t_program must be positive")
        if self.transfer is not None:
            t = self.transfer
            # exact integer check of: bits / (bus * clock) seconds <= t_program
            lhs = t.bitstream_bytes * 8 * 1_000_000_000
            rhs = self.t_program_ns * t.bus_width_bits * t.clock_hz
            if lhs > rhs:
                raise DeviceError(
                    f"{self.name}: transfer time exceeds t_program; the "
                    "tabulated programming time is expected to subsume download"
                )

    @property
    def t_program_ms(self) -> float:
        return to_ms(self.t_program_ns)

    @property
    def config_bits(self) -> int:
        """Configuration bitstream length in bits."""
        if self.transfer is not None:
            return self.transfer.bitstream_bytes * 8
        return self.size * DEFAULT_BYTES_PER_MODULE * 8


def builtin_profiles() -> list[DeviceProfile]:
    """The three stock device profiles available without any profile file."""
    return [
        DeviceProfile("ispPAC10", DeviceKind.FPAA, size=4, t_program_ns=100 * NS_PER_MS),
        DeviceProfile(
            "AN220E04",
            DeviceKind.FPAA,
            size=4,
            t_program_ns=from_ms(3.8),
            # 18 banks x 256 bytes, shifted serially at 10 MHz
            transfer=TransferGeometry(bus_width_bits=1, clock_hz=10_000_000, bitstream_bytes=18 * 256),
        ),
        DeviceProfile(
            "FPTA2",
            DeviceKind.FPTA,
            size=64,
            t_program_ns=from_ms(0.008),
            # byte-wide at 160 MHz; bitstream size back-solved from the
            # programming time, configurable via a profile file if known
            transfer=TransferGeometry(bus_width_bits=8, clock_hz=160_000_000, bitstream_bytes=1280),
        ),
    ]


def get_profile(name: str, extra: Sequence[DeviceProfile] = ()) -> DeviceProfile:
    """Look up a profile by name among built-ins plus ``extra``."""
    for profile in list(extra) + builtin_profiles():
        if profile.name == name:
            return profile
    known = ", ".join(p.name for p in list(extra) + builtin_profiles())
    raise DeviceError(f"unknown device {name!r} (known: {known})")


def transfer_time(profile: DeviceProfile) -> float:
    """Configuration download time in milliseconds, from transfer geometry."""
    if profile.transfer is None:
        raise MissingTransferGeometry(
            f"{profile.name} does not document its transfer geometry"
        )
    t = profile.transfer
    return t.bitstream_bytes * 8 / (t.bus_width_bits * t.clock_hz) * 1_000.0


def load_profiles(path: str | Path) -> list[DeviceProfile]:
    """Load device profiles from a TOML profile file.

    Schema (version 1)::

        schema = 1
        [[device]]
        name = "AN220E04"
        kind = "FPAA"            # or "FPTA"
        size = 4
        t_program_ms = 3.8
        [device.transfer]        # optional
        bus_width_bits = 1
        clock_hz = 10_000_000
        bitstream_bytes = 4608
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise DeviceError(f"{path}: {exc}") from exc
    if doc.get("schema") != 1:
        raise DeviceError(f"{path}: expected schema = 1")
    profiles = []
    for entry in doc.get("device", []):
        profiles.append(profile_from_dict(entry, origin=str(path)))
    return profiles


def profile_from_dict(entry: dict, origin: str = "<inline>") -> DeviceProfile:
    try:
        transfer = None
        if "transfer" in entry:
            t = entry["transfer"]
            transfer = TransferGeometry(
                bus_width_bits=int(t["bus_width_bits"]),
                clock_hz=int(t["clock_hz"]),
                bitstream_bytes=int(t["bitstream_bytes"]),
            )
        return DeviceProfile(
            name=entry["name"],
            kind=DeviceKind(entry["kind"]),
            size=int(entry["size"]),
            t_program_ns=from_ms(entry["t_program_ms"]),
            transfer=transfer,
        )
    except KeyError as exc:
        raise DeviceError(f"{origin}: device entry missing key {exc}") from exc
    except ValueError as exc:
        raise DeviceError(f"{origin}: {exc}") from exc


class FieldRole(Enum):
    PARAMETER = "parameter"
    SWITCH = "switch"
    RESERVED = "reserved"


@dataclass(frozen=True)
class BitField:
    """A contiguous bit range of a configuration and what it controls.

    Parameter fields decode as Gray-coded fixed point over ``[lo, hi]``;
    switch fields are single routing bits; reserved ranges have no modelled
    effect (routing/housekeeping bits).  ``module`` ties the field to a
    device module/cell so module-death faults can remove its contribution,
    replacing the decoded value with ``dead_value``.
    """

    name: str
    start: int
    width: int
    role: FieldRole = FieldRole.PARAMETER
    lo: float = 0.0
    hi: float = 1.0
    gray: bool = True
    module: int | None = None
    dead_value: float = 0.0

    def __post_init__(self) -> None:
        if self.start < 0 or self.width <= 0:
            raise DeviceError(f"field {self.name!r}: bad bit range")
        if self.role is FieldRole.PARAMETER and not self.hi > self.lo:
            raise DeviceError(f"field {self.name!r}: hi must exceed lo")
        if self.role is FieldRole.SWITCH and self.width != 1:
            raise DeviceError(f"field {self.name!r}: switches are single bits")

    @property
    def end(self) -> int:
        return self.start + self.width


@dataclass(frozen=True)
class DecodeMap:
    """Complete, non-overlapping assignment of every configuration bit."""

    fields: tuple[BitField, ...]
    total_bits: int

    def __post_init__(self) -> None:
        ordered = sorted(self.fields, key=lambda f: f.start)
        names = [f.name for f in ordered]
        if len(set(names)) != len(names):
            raise DeviceError("decode map field names must be unique")
        cursor = 0
        for f in ordered:
            if f.start != cursor:
                raise DeviceError(
                    f"decode map leaves bits [{cursor}, {f.start}) unmapped"
                    if f.start > cursor
                    else f"decode map overlaps at bit {f.start}"
                )
            cursor = f.end
        if cursor != self.total_bits:
            raise DeviceError(
                f"decode map covers {cursor} bits, configuration has {self.total_bits}"
            )
        object.__setattr__(self, "fields", tuple(ordered))

    def field(self, name: str) -> BitField:
        for f in self.fields:
            if f.name == name:
                return f
        raise DeviceError(f"decode map has no field {name!r}")

    def has_field(self, name: str) -> bool:
        return any(f.name == name for f in self.fields)


def raw_decode_map(total_bits: int) -> DecodeMap:
    """One reserved range covering everything; used when no benchmark applies."""
    return DecodeMap(
        fields=(BitField("raw", 0, total_bits, FieldRole.RESERVED),),
        total_bits=total_bits,
    )


@dataclass(frozen=True)
class Configuration:
    """A genome: the exact bitstream that would be downloaded to the device.

    Bits are packed most-significant-bit first (``numpy.unpackbits`` order);
    bit ``i`` lives in ``bits[i // 8]`` at position ``7 - i % 8``.
    """

    device: DeviceProfile
    bits: bytes
    decode_map: DecodeMap

    def __post_init__(self) -> None:
        if len(self.bits) * 8 != self.device.config_bits:
            raise DeviceError(
                f"configuration is {len(self.bits) * 8} bits, "
                f"{self.device.name} takes {self.device.config_bits}"
            )
        if self.decode_map.total_bits != self.device.config_bits:
            raise DeviceError("decode map does not match device bitstream length")

    def bit_array(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.bits, dtype=np.uint8))

    def bit(self, index: int) -> int:
        return (self.bits[index // 8] >> (7 - index % 8)) & 1


def pack_bits(bit_array: np.ndarray) -> bytes:
    return np.packbits(bit_array.astype(np.uint8)).tobytes()


class FaultMode(Enum):
    STUCK_OPEN = "stuck-open"
    STUCK_CLOSED = "stuck-closed"
    MODULE_DEAD = "module-dead"
    PARAMETER_DRIFT = "parameter-drift"


@dataclass(frozen=True)
class FaultSpec:
    """One injected hardware fault.

    ``target`` is a configuration bit index for stuck switches, a module/cell
    index for module death, and a named physical or decoded parameter for
    multiplicative drift.  ``onset_ns`` records when the fault appeared in
    simulated time; recovery itself starts at detection, so onset is
    reporting metadata only.
    """

    mode: FaultMode
    target: Union[int, str]
    multiplier: float = 1.0
    onset_ns: int = 0

    def __post_init__(self) -> None:
        if self.mode is FaultMode.PARAMETER_DRIFT:
            if not isinstance(self.target, str) or not self.target:
                raise InvalidFaultTarget("drift faults target a named parameter")
            if not self.multiplier > 0:
                raise InvalidFaultTarget("drift multiplier must be positive")
        else:
            if isinstance(self.target, bool) or not isinstance(self.target, int):
                raise InvalidFaultTarget(f"{self.mode.value} faults target an index")


@dataclass(frozen=True)
class EffectiveCircuitState:
    """What the hardware actually realizes: configuration plus fault effects.

    ``bits`` already reflect stuck switches; ``dead_modules`` and ``drift``
    are applied downstream during decoding.  The underlying configuration is
    untouched -- the search operates on the true genome space while the
    hardware behaves faultily.
    """

    config: Configuration
    bits: bytes
    dead_modules: frozenset = frozenset()
    drift: tuple[tuple[str, float], ...] = ()

    def bit_array(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.bits, dtype=np.uint8))

    def bit(self, index: int) -> int:
        return (self.bits[index // 8] >> (7 - index % 8)) & 1

    @property
    def drift_map(self) -> dict:
        return dict(self.drift)


def baseline_state(config: Configuration) -> EffectiveCircuitState:
    """The fault-free effective state of a configuration."""
    return EffectiveCircuitState(config=config, bits=config.bits)


def apply_fault(
    state: Union[Configuration, EffectiveCircuitState], fault: FaultSpec
) -> EffectiveCircuitState:
    """Overlay one fault on a configuration or an already-faulted state."""
    if isinstance(state, Configuration):
        state = baseline_state(state)
    config = state.config
    device = config.device

    if fault.mode in (FaultMode.STUCK_OPEN, FaultMode.STUCK_CLOSED):
        index = fault.target
        if not 0 <= index < device.config_bits:
            raise InvalidFaultTarget(
                f"switch {index} out of range for {device.name} "
                f"({device.config_bits} bits)"
            )
        forced = 1 if fault.mode is FaultMode.STUCK_CLOSED else 0
        bits = bytearray(state.bits)
        byte, shift = index // 8, 7 - index % 8
        bits[byte] = (bits[byte] & ~(1 << shift)) | (forced << shift)
        return EffectiveCircuitState(
            config=config,
            bits=bytes(bits),
            dead_modules=state.dead_modules,
            drift=state.drift,
        )

    if fault.mode is FaultMode.MODULE_DEAD:
        index = fault.target
        if not 0 <= index < device.size:
            raise InvalidFaultTarget(
                f"module {index} out of range for {device.name} (size {device.size})"
            )
        return EffectiveCircuitState(
            config=config,
            bits=state.bits,
            dead_modules=state.dead_modules | {index},
            drift=state.drift,
        )

    # parameter drift: multiplicative, composing across repeated faults
    drift = dict(state.drift)
    drift[fault.target] = drift.get(fault.target, 1.0) * fault.multiplier
    return EffectiveCircuitState(
        config=config,
        bits=state.bits,
        dead_modules=state.dead_modules,
        drift=tuple(sorted(drift.items())),
    )


def apply_faults(
    config: Configuration, faults: Iterable[FaultSpec]
) -> EffectiveCircuitState:
    state = baseline_state(config)
    for fault in faults:
        state = apply_fault(state, fault)
    return state


def random_configuration(
    profile: DeviceProfile, rng_seed: int, decode_map: DecodeMap | None = None
) -> Configuration:
    """Uniformly random valid configuration; bit-identical for a fixed seed."""
    rng = np.random.default_rng(rng_seed)
    bits = rng.integers(0, 2, size=profile.config_bits, dtype=np.uint8)
    if decode_map is None:
        decode_map = raw_decode_map(profile.config_bits)
    return Configuration(device=profile, bits=pack_bits(bits), decode_map=decode_map)
