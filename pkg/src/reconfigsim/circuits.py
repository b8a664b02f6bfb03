"""Linear closed-loop simulation: transfer functions, step responses, settling.

The fitness test for a compensator is a hardware step test: apply a unit
step, watch the output for a fixed window, measure how long it takes to stay
inside a tolerance band around its final value.  Simulation uses a fixed-step
4th-order integrator on the controllable-canonical state-space realization;
for a constant (step) input that integrator is exactly the degree-4 Taylor
discretization of the exact solution, so the whole trace can be produced by
an equivalent discrete-time filter at C speed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as _signal

from .durations import from_s


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class TransferFunction:
    """Proper rational transfer function, coefficients in descending powers of s."""

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.den or self.den[0] == 0:
            raise CircuitError("denominator leading coefficient must be nonzero")
        num = tuple(float(c) for c in self.num)
        # strip leading zeros so the properness check reflects true degree
        while len(num) > 1 and num[0] == 0.0:
            num = num[1:]
        if not num:
            num = (0.0,)
        if len(num) > len(self.den):
            raise CircuitError("transfer function must be proper (deg num <= deg den)")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", tuple(float(c) for c in self.den))

    def dc_gain(self) -> float:
        """num(0)/den(0); NaN when the denominator has a root at s = 0."""
        if self.den[-1] == 0:
            return math.nan
        return self.num[-1] / self.den[-1]


@dataclass(frozen=True, eq=False)
class StepResponse:
    """Sampled unit-step output with derived settling information.

    ``test_duration_ns`` is the hardware observation window the test would
    occupy on the device, independent of how early the output settles.
    """

    times: np.ndarray
    values: np.ndarray
    final_value: float
    settling_time_s: float | None
    test_duration_ns: int
    diverged: bool = False

    @property
    def settled(self) -> bool:
        return self.settling_time_s is not None

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time_s", "value"])
            for t, y in zip(self.times, self.values):
                writer.writerow([repr(float(t)), repr(float(y))])


def settling_time(
    times: np.ndarray, values: np.ndarray, final_value: float, band: float
) -> float | None:
    """First sample instant after which the output stays within the band.

    The band is ``band * |final_value|``, or absolute when the final value is
    zero.  Returns None when no suffix of the trace stays inside (including
    an undefined final value).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size == 0:
        raise CircuitError("settling time needs at least one sample")
    if not 0 < band < 1:
        raise CircuitError("band must lie in (0, 1)")
    if math.isnan(final_value):
        return None
    tolerance = band * abs(final_value) if final_value != 0 else band
    outside = np.nonzero(~(np.abs(values - final_value) <= tolerance))[0]
    if outside.size == 0:
        return float(times[0])
    last_out = int(outside[-1])
    if last_out == len(times) - 1:
        return None
    return float(times[last_out + 1])


def _canonical_states(tf: TransferFunction):
    """Controllable-canonical (A, B, C, D) of a proper SISO system."""
    den = np.asarray(tf.den, dtype=float)
    a = den / den[0]
    n = len(a) - 1
    b = np.zeros(n + 1)
    b[n + 1 - len(tf.num):] = np.asarray(tf.num, dtype=float) / den[0]
    if n == 0:
        return None, None, None, float(b[0])
    A = np.zeros((n, n))
    A[0, :] = -a[1:]
    if n > 1:
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros(n)
    B[0] = 1.0
    C = b[1:] - b[0] * a[1:]
    return A, B, C, float(b[0])


def _discretize_step(A: np.ndarray, B: np.ndarray, h: float):
    """Degree-4 Taylor discretization: one classical 4th-order step of x'=Ax+Bu.

    For constant u over the step this is algebraically identical to the
    classical Runge-Kutta update, collapsed to x+ = phi x + gamma u.
    """
    n = A.shape[0]
    eye = np.eye(n)
    hA = h * A
    series = eye + hA @ (eye + hA @ (eye + hA / 4.0) / 3.0) / 2.0
    phi = eye + hA @ series
    gamma = h * (series @ B)
    return phi, gamma


def _charpoly(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    if n == 1:
        return np.array([1.0, -M[0, 0]])
    if n == 2:
        trace = M[0, 0] + M[1, 1]
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        return np.array([1.0, -trace, det])
    if n == 3:
        trace = M[0, 0] + M[1, 1] + M[2, 2]
        m2 = M @ M
        c2 = 0.5 * (trace * trace - (m2[0, 0] + m2[1, 1] + m2[2, 2]))
        return np.array([1.0, -trace, c2, -np.linalg.det(M)])
    return np.poly(M)


def step_response(
    system: TransferFunction,
    window_s: float,
    dt_s: float | None = None,
    band: float = 0.02,
    divergence_bound: float = 1e6,
) -> StepResponse:
    """Unit-step response over ``[0, window_s]`` at a fixed step.

    ``dt_s`` defaults to ``window_s / 4096``.  Responses exceeding
    ``divergence_bound`` in magnitude are flagged as diverged but still
    returned in full; instability is a bad candidate, not a crash.
    """
    if window_s <= 0:
        raise CircuitError("window must be positive")
    if dt_s is None:
        nsteps = 4096
        dt_s = window_s / nsteps
    else:
        if not 0 < dt_s < window_s:
            raise CircuitError("dt must satisfy 0 < dt < window")
        nsteps = max(1, round(window_s / dt_s))
    times = np.arange(nsteps + 1) * dt_s

    with np.errstate(over="ignore", invalid="ignore"):
        A, B, C, D = _canonical_states(system)
        if A is None:
            values = np.full(nsteps + 1, D)
        else:
            phi, gamma = _discretize_step(A, B, dt_s)
            # same linear recurrence, evaluated in transfer-function form
            a_d = _charpoly(phi)
            b_d = _charpoly(phi - np.outer(gamma, C)) + (D - 1.0) * a_d
            values = _signal.lfilter(b_d, a_d, np.ones(nsteps + 1))

        final_value = system.dc_gain()
        finite = np.isfinite(values)
        diverged = bool(
            not finite.all() or np.any(np.abs(values[finite]) > divergence_bound)
        )
        settle = settling_time(times, values, final_value, band=band)
    return StepResponse(
        times=times,
        values=values,
        final_value=final_value,
        settling_time_s=settle,
        test_duration_ns=from_s(window_s),
        diverged=diverged,
    )
