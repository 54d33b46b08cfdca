"""Truncated diagonal systems x' = Ax + Bu and their exact mild solutions.

The state space is the real span of the first N eigenmodes of a self-adjoint
diagonal generator: A e_k = -lambda_k e_k with 0 < lambda_1 < ... < lambda_N.
A scalar input enters through spectral coefficients b_k.  On a time interval
where the input is constant with value v, each coordinate obeys the scalar ODE
x_k' = -lambda_k x_k + b_k v, whose solution

    x_k(s + h) = exp(-lambda_k h) x_k(s) + (b_k / lambda_k) (1 - exp(-lambda_k h)) v

is evaluated in closed form.  Piecewise-constant inputs therefore propagate
with no time-stepping error at all; the only discretization in the package is
the choice of sample times.

The bundled preset is the 1-d heat equation on [0, 1] with diffusivity a,
homogeneous Dirichlet condition at 0 and Dirichlet boundary input at 1:

    lambda_k = a pi^2 k^2,    b_k = a sqrt(2) k pi (-1)**(k+1).

The input coefficients follow from the steady-state lift: a constant input
v = 1 has equilibrium profile xi (the identity function on [0, 1]) whose sine
coefficients are sqrt(2) (-1)**(k+1) / (k pi), and b_k = lambda_k times those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError

CSV_FMT = ".17g"


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class SpectralSystem:
    """Diagonal system defined by eigenvalues -lambda_k and input coefficients b_k."""

    lambdas: np.ndarray
    b_coeffs: np.ndarray
    label: str = ""

    def __post_init__(self):
        lam = _freeze(np.atleast_1d(self.lambdas))
        b = _freeze(np.atleast_1d(self.b_coeffs))
        if lam.ndim != 1 or b.ndim != 1:
            raise ValidationError("lambdas and b_coeffs must be one-dimensional")
        if lam.size < 1:
            raise ValidationError("at least one mode is required")
        if lam.size != b.size:
            raise ValidationError("lambdas and b_coeffs must have equal length")
        if not np.all(np.isfinite(lam)) or not np.all(np.isfinite(b)):
            raise ValidationError("lambdas and b_coeffs must be finite")
        if lam[0] <= 0.0 or np.any(np.diff(lam) <= 0.0):
            raise ValidationError("lambdas must be strictly increasing with lambda_1 > 0")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "b_coeffs", b)

    @property
    def n_modes(self) -> int:
        return int(self.lambdas.size)

    @property
    def input_gain_coeffs(self) -> np.ndarray:
        """Steady-state response b_k / lambda_k to a unit constant input."""
        return self.b_coeffs / self.lambdas

    def __eq__(self, other):
        if not isinstance(other, SpectralSystem):
            return NotImplemented
        return (np.array_equal(self.lambdas, other.lambdas)
                and np.array_equal(self.b_coeffs, other.b_coeffs)
                and self.label == other.label)

    def __hash__(self):
        return hash((self.lambdas.tobytes(), self.b_coeffs.tobytes(), self.label))


@dataclass(frozen=True)
class HeatDirichletParams:
    """Diffusivity a (length^2/time) and truncation order for the heat preset."""

    a: float
    n_modes: int

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise ValidationError(f"diffusivity a must be positive, got {self.a!r}")
        if self.n_modes < 1:
            raise ValidationError("n_modes must be at least 1")


def heat_dirichlet(params: HeatDirichletParams) -> SpectralSystem:
    """Heat equation on [0,1] with Dirichlet boundary input at the right end."""
    k = np.arange(1, params.n_modes + 1, dtype=float)
    lam = params.a * math.pi ** 2 * k ** 2
    b = params.a * math.sqrt(2.0) * k * math.pi * (-1.0) ** (k + 1.0)
    return SpectralSystem(lam, b, label=f"heat_dirichlet(a={params.a!r}, N={params.n_modes})")


def state_norm(x) -> float:
    """Euclidean norm of a spectral coefficient vector."""
    return float(np.linalg.norm(np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------
# inputs


@dataclass(frozen=True)
class InputSignal:
    """Piecewise-constant scalar input, zero after its final breakpoint.

    ``breakpoints`` is the increasing grid 0 = t_0 < ... < t_m and
    ``values[i]`` holds on [t_i, t_{i+1}).  The signal is right continuous
    and extends by zero beyond t_m, so the sup norm over all of [0, inf) is
    max(|values|, 0).  Instances are immutable; shifting and concatenation
    return new signals.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = _freeze(np.atleast_1d(self.breakpoints))
        vals = _freeze(np.atleast_1d(self.values) if np.size(self.values) else np.empty(0))
        if bp.size < 1 or bp[0] != 0.0:
            raise ValidationError("breakpoints must start at 0")
        if np.any(np.diff(bp) <= 0.0):
            raise ValidationError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(bp)) or not np.all(np.isfinite(vals)):
            raise ValidationError("breakpoints and values must be finite")
        if vals.size != bp.size - 1:
            raise ValidationError("values must have one entry per segment")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    # -- constructors

    @classmethod
    def zero(cls) -> "InputSignal":
        return cls(np.array([0.0]), np.empty(0))

    @classmethod
    def constant(cls, value: float, duration: float) -> "InputSignal":
        if duration <= 0.0:
            raise ValidationError("duration must be positive")
        return cls(np.array([0.0, float(duration)]), np.array([float(value)]))

    @classmethod
    def piecewise(cls, breakpoints, values) -> "InputSignal":
        return cls(np.asarray(breakpoints, dtype=float), np.asarray(values, dtype=float))

    # -- queries

    @property
    def duration(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def sup_norm(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.max(np.abs(self.values)))

    def value_at(self, t: float) -> float:
        if t < 0.0:
            raise DomainError("inputs are defined on t >= 0")
        if t >= self.duration:
            return 0.0
        idx = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return float(self.values[idx])

    def segments_until(self, t: float):
        """Yield (duration, value) pieces covering [0, t], zero tail included."""
        if t < 0.0:
            raise DomainError("inputs are defined on t >= 0")
        prev = 0.0
        for i in range(self.values.size):
            end = min(float(self.breakpoints[i + 1]), t)
            if end > prev:
                yield end - prev, float(self.values[i])
                prev = end
            if prev >= t:
                return
        if prev < t:
            yield t - prev, 0.0

    # -- the two input-space axioms

    def shifted(self, tau: float) -> "InputSignal":
        """Time shift u(tau + .); drops history, never increases the sup norm."""
        if tau < 0.0:
            raise DomainError("shift offset must be nonnegative")
        if tau == 0.0:
            return self
        if tau >= self.duration:
            return InputSignal.zero()
        idx = int(np.searchsorted(self.breakpoints, tau, side="right")) - 1
        bp = np.concatenate([[0.0], self.breakpoints[idx + 1:] - tau])
        return InputSignal(bp, self.values[idx:])

    def concatenated(self, other: "InputSignal", t: float) -> "InputSignal":
        """Signal equal to self on [0, t) and to other(. - t) afterwards.

        The head keeps this signal's breakpoints verbatim (no re-accumulated
        arithmetic), so flows driven by the two signals agree bit for bit on
        [0, t).
        """
        if t <= 0.0:
            raise DomainError("concatenation time must be positive")
        keep = self.breakpoints < t
        head_bp = list(self.breakpoints[keep])
        head_vals = [float(self.values[i]) if i < self.values.size else 0.0
                     for i in range(len(head_bp))]
        if other.values.size == 0:
            return InputSignal(np.array(head_bp + [t]), np.array(head_vals))
        bp = np.concatenate([head_bp, t + other.breakpoints])
        vals = np.concatenate([head_vals, other.values])
        return InputSignal(bp, vals)


# ---------------------------------------------------------------------------
# flows


def semigroup_apply(sys: SpectralSystem, t: float, x) -> np.ndarray:
    """Unforced flow T(t)x: coordinatewise exp(-lambda_k t) x_k."""
    if t < 0.0:
        raise DomainError("the semigroup is defined for t >= 0")
    x = np.asarray(x, dtype=float)
    return x * np.exp(-sys.lambdas * t)


def mild_solution(sys: SpectralSystem, x0, u: InputSignal, t: float) -> np.ndarray:
    """State phi(t, x0, u), stepped exactly across each constant input segment."""
    if t < 0.0:
        raise DomainError("mild solutions are defined for t >= 0")
    state = np.array(x0, dtype=float, copy=True)
    if state.shape != (sys.n_modes,):
        raise ValidationError(f"state must have shape ({sys.n_modes},)")
    gain = sys.input_gain_coeffs
    for dur, val in u.segments_until(t):
        decay = np.exp(-sys.lambdas * dur)
        state = state * decay + gain * (1.0 - decay) * val
    return state


@dataclass(frozen=True)
class Trajectory:
    """Sampled flow: states[i] = phi(times[i], x0, u) on an increasing grid."""

    times: np.ndarray
    states: np.ndarray
    system: SpectralSystem
    input: InputSignal

    def __post_init__(self):
        object.__setattr__(self, "times", _freeze(self.times))
        object.__setattr__(self, "states", _freeze(self.states))
        if self.states.shape != (self.times.size, self.system.n_modes):
            raise ValidationError("states must have shape (len(times), n_modes)")
        if not np.all(np.isfinite(self.states)):
            raise ValidationError("trajectory states must be finite")

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def to_csv(self, path) -> None:
        write_trajectory_csv(self, path)


def sample_trajectory(sys: SpectralSystem, x0, u: InputSignal, grid) -> Trajectory:
    """Sample phi(., x0, u) on a grid that starts at 0 and strictly increases.

    States are anchored at the input breakpoints and evolved in closed form
    to each grid time, so refining the grid never changes the values at
    shared times and states[0] equals x0 bit for bit.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValidationError("grid must be a nonempty one-dimensional array")
    if grid[0] != 0.0:
        raise ValidationError("grid must start at 0")
    if np.any(np.diff(grid) <= 0.0):
        raise ValidationError("grid must be strictly increasing")

    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n_modes,):
        raise ValidationError(f"state must have shape ({sys.n_modes},)")
    t_end = float(grid[-1])
    lam = sys.lambdas
    gain = sys.input_gain_coeffs

    # anchor states at 0 and at every breakpoint below the grid end; a missing
    # final value means the zero tail starts at the last anchor
    anchors = [0.0]
    anchor_vals: list[float] = []
    for i in range(u.values.size):
        anchor_vals.append(float(u.values[i]))
        end = float(u.breakpoints[i + 1])
        if end >= t_end:
            break
        anchors.append(end)
    while len(anchor_vals) < len(anchors):
        anchor_vals.append(0.0)

    anchor_states = [x0]
    for i in range(len(anchors) - 1):
        dur = anchors[i + 1] - anchors[i]
        decay = np.exp(-lam * dur)
        anchor_states.append(anchor_states[-1] * decay
                             + gain * (1.0 - decay) * anchor_vals[i])

    anchors_arr = np.asarray(anchors)
    seg_idx = np.searchsorted(anchors_arr, grid, side="right") - 1
    states = np.empty((grid.size, sys.n_modes))
    for seg in range(len(anchors)):
        mask = seg_idx == seg
        if not np.any(mask):
            continue
        dt = grid[mask] - anchors_arr[seg]
        decay = np.exp(-np.outer(dt, lam))
        states[mask] = anchor_states[seg] * decay + gain * anchor_vals[seg] * (1.0 - decay)
    states[0] = x0  # identity property, exact by construction
    return Trajectory(times=grid, states=states, system=sys, input=u)


# ---------------------------------------------------------------------------
# admissibility bounds


@dataclass(frozen=True)
class AdmissibilityBound:
    """Certified interval for the input-convolution constant at time t.

    ``lower`` is achieved by the unit constant input; ``upper`` dominates
    every input of sup norm one.  The smallest admissibility constant lies
    in [lower, upper].
    """

    t: float
    lower: float
    upper: float

    def __post_init__(self):
        if self.t < 0.0 or self.lower < 0.0:
            raise ValidationError("t and lower must be nonnegative")
        if self.lower > self.upper * (1.0 + 1e-12) + 1e-300:
            raise ValidationError("lower bound exceeds upper bound")


def kappa_bounds(sys: SpectralSystem, t: float, quad_points: int = 2048) -> AdmissibilityBound:
    """Two-sided bound on the smallest kappa(t) with |conv(u)(t)| <= kappa(t) |u|_inf.

    lower: norm of the response at time t to the constant input u = 1.
    upper: integral over [0, t] of |T(s) B| = sqrt(sum_k b_k^2 exp(-2 lambda_k s)),
    evaluated by trapezoid quadrature on a geometrically graded grid.  The
    integrand is convex and decreasing (for heat-type coefficients it grows
    like s**(-3/4) toward 0 until the finite truncation saturates it at
    |B|), so the chords of the trapezoid rule certify the upper bound and
    the grading controls the near-singular region.
    """
    if t <= 0.0:
        raise DomainError("kappa bounds require t > 0")
    if quad_points < 8:
        raise ValidationError("quad_points must be at least 8")
    lower = state_norm(mild_solution(sys, np.zeros(sys.n_modes),
                                     InputSignal.constant(1.0, t), t))
    s = np.concatenate([[0.0], t * np.geomspace(1e-12, 1.0, quad_points)])
    weights = np.exp(-2.0 * np.outer(s, sys.lambdas))
    g = np.sqrt(weights @ (sys.b_coeffs ** 2))
    upper = float(np.trapezoid(g, s))
    return AdmissibilityBound(t=float(t), lower=lower, upper=max(upper, lower))


# ---------------------------------------------------------------------------
# grids and export


def build_time_grid(horizon: float, u: InputSignal | None = None,
                    n_uniform: int = 1025, per_decade: int = 32,
                    t_min: float = 1e-7, extra=None) -> np.ndarray:
    """Evaluation grid on [0, horizon]: uniform backbone plus geometric
    refinement after 0 and after every input breakpoint, so that fast mode
    transients and input jumps are resolved.  Always contains 0, the horizon
    and every breakpoint below the horizon.
    """
    if horizon <= 0.0:
        raise ValidationError("horizon must be positive")
    pieces = [np.linspace(0.0, horizon, n_uniform)]
    anchors = [0.0]
    if u is not None:
        anchors.extend(float(b) for b in u.breakpoints if 0.0 < b < horizon)
        pieces.append(np.asarray(anchors))
    for a in anchors:
        span = horizon - a
        if span <= t_min:
            continue
        n = max(4, int(math.ceil(math.log10(span / t_min) * per_decade)))
        pieces.append(a + np.geomspace(t_min, span, n))
    if extra is not None:
        pieces.append(np.asarray(extra, dtype=float))
    grid = np.unique(np.concatenate(pieces))
    grid = grid[(grid >= 0.0) & (grid <= horizon)]
    if grid[0] != 0.0:
        grid = np.concatenate([[0.0], grid])
    return grid


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write ``t,norm,c1,...,cN`` rows with 17 significant digits."""
    n = traj.system.n_modes
    header = "t,norm," + ",".join(f"c{k}" for k in range(1, n + 1))
    norms = traj.norms()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for i in range(traj.times.size):
            row = [format(traj.times[i], CSV_FMT), format(norms[i], CSV_FMT)]
            row.extend(format(c, CSV_FMT) for c in traj.states[i])
            fh.write(",".join(row) + "\n")
