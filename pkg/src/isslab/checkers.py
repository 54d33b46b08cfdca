"""Falsification-style checkers for the stability zoo.

Each checker scans a deterministic sample set of initial states, inputs and
times for a violation of one universally quantified inequality.  A violation
is reported with a replayable witness; otherwise the verdict is
``no_violation_found``, which is evidence, not proof.

Sampling design.  States are drawn from the uniform ball in the first
min(N, 8) modes, plus isolated high modes e_k to exercise the non-coercive
direction, plus three canonical corners (the origin, the slowest mode at full
radius, the fastest mode at full radius).  Inputs are piecewise constant with
up to 8 random segments, preceded by the zero input and the constant
full-amplitude input.  Every sample is generated from its own seeded stream,
so enlarging a budget extends the sample set without reshuffling it: reported
minima can only decrease, and a ``violated`` verdict can never flip back.

Tolerances scale with the magnitude of the compared quantities,
tol = tol_rel * (1 + scale).  Pointwise norm comparisons use
tol_rel = 1e-9; quadrature-backed comparisons use 1e-6 to absorb the
composite-Simpson truncation error of the graded trajectory grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import simpson

from .comparison import (ComparisonFunction, ISSCertificate, NormToIntegralCertificate,
                         evaluate, linear)
from .errors import DomainError, ValidationError
from .lyapunov import (DEFAULT_DINI_H, DissipationParameters, LyapunovOperator,
                       dini_estimate)
from .report import (CheckProperty, MarginRecord, StabilityReport, Witness,
                     conclude)
from .system import (InputSignal, SpectralSystem, build_time_grid, mild_solution,
                     kappa_bounds, sample_trajectory, state_norm)

POINT_TOL = 1e-9      # pointwise comparisons
QUAD_TOL = 1e-6       # quadrature-backed comparisons
COCYCLE_TOL = 1e-10   # relative cocycle deviation
ULIM_GRID_POINTS = 513  # fixed hitting-time grid, independent of the budget


@dataclass(frozen=True)
class SampleBudget:
    """Deterministic sampling effort for one checker run."""

    n_states: int = 24
    n_inputs: int = 10
    n_times: int = 33
    horizon: float = 2.0
    radius: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n_states, self.n_inputs, self.n_times) < 1:
            raise ValidationError("sample counts must be at least 1")
        if self.horizon <= 0.0 or self.radius <= 0.0:
            raise ValidationError("horizon and radius must be positive")

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_inputs


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([abs(int(seed)) % (2 ** 63), *key])


def draw_state(sys: SpectralSystem, budget: SampleBudget, i: int) -> np.ndarray:
    """State sample i: canonical corners first, then seeded random draws."""
    n = sys.n_modes
    x = np.zeros(n)
    r = budget.radius
    if i == 0:
        return x
    if i == 1:
        x[0] = r
        return x
    if i == 2:
        x[-1] = r
        return x
    rng = _rng(budget.seed, 11, i)
    if i % 5 == 3 and n > 1:
        k = int(rng.integers(n // 2, n))
        x[k] = r * rng.uniform(0.25, 1.0) * rng.choice((-1.0, 1.0))
        return x
    d = min(n, 8)
    g = rng.standard_normal(d)
    nrm = float(np.linalg.norm(g))
    if nrm == 0.0:
        g[0], nrm = 1.0, 1.0
    x[:d] = g / nrm * r * rng.uniform() ** (1.0 / d)
    return x


def draw_input(budget: SampleBudget, j: int) -> InputSignal:
    """Input sample j: zero, constant full amplitude, then random segments."""
    if j == 0:
        return InputSignal.zero()
    if j == 1:
        return InputSignal.constant(budget.radius, budget.horizon)
    rng = _rng(budget.seed, 22, j)
    m = int(rng.integers(1, 9))
    cuts = np.sort(rng.uniform(0.0, budget.horizon, m - 1))
    cuts = np.unique(cuts[(cuts > 0.0) & (cuts < budget.horizon)])
    values = rng.uniform(-budget.radius, budget.radius, cuts.size + 1)
    breakpoints = np.concatenate([[0.0], cuts, [budget.horizon]])
    return InputSignal(breakpoints, values)


def _vdc(k: int) -> float:
    """Base-2 van der Corput point; prefixes are stable under enlargement."""
    v, denom = 0.0, 1.0
    while k:
        denom *= 2.0
        v += (k & 1) / denom
        k >>= 1
    return v


def eval_times(budget: SampleBudget) -> np.ndarray:
    """Low-discrepancy evaluation times including 0 and the horizon."""
    ts = [budget.horizon * _vdc(k) for k in range(1, budget.n_times + 1)]
    return np.unique(np.concatenate([[0.0, budget.horizon], ts]))


def iter_pairs(sys: SpectralSystem, budget: SampleBudget):
    """Enumerate (index, x0, u) over the budget's state-input product set."""
    for si in range(budget.n_states):
        x0 = draw_state(sys, budget, si)
        for sj in range(budget.n_inputs):
            yield si * budget.n_inputs + sj, x0, draw_input(budget, sj)


def _tol(scale: float, rel: float = POINT_TOL) -> float:
    return rel * (1.0 + scale)


class _Tracker:
    """Accumulate per-sample margins and the worst replayable witness."""

    def __init__(self):
        self.records: list[MarginRecord] = []
        self.witness: Witness | None = None
        self._worst = math.inf

    def add(self, idx: int, t: float, margin: float, tol: float,
            x0: np.ndarray, u: InputSignal):
        self.records.append(MarginRecord(sample_index=idx, t=t, margin=float(margin)))
        if margin < -tol and margin < self._worst:
            self._worst = margin
            self.witness = Witness(x0=x0, input=u, t=float(t), margin=float(margin))


# ---------------------------------------------------------------------------
# pointwise trajectory-norm checks


def iss_margin(sys: SpectralSystem, cert: ISSCertificate, x0, u: InputSignal,
               t: float) -> float:
    """beta(|x0|, t) + gamma(|u|_inf) - |phi(t, x0, u)|."""
    lhs = state_norm(mild_solution(sys, x0, u, t))
    return cert.bound(state_norm(x0), u.sup_norm, t) - lhs


def check_iss(sys: SpectralSystem, cert: ISSCertificate,
              budget: SampleBudget) -> StabilityReport:
    times = eval_times(budget)
    tracker = _Tracker()
    for idx, x0, u in iter_pairs(sys, budget):
        grid = np.unique(np.concatenate(
            [times, u.breakpoints[u.breakpoints < budget.horizon]]))
        traj = sample_trajectory(sys, x0, u, grid)
        bound = cert.beta(state_norm(x0), grid) + evaluate(cert.gamma, u.sup_norm)
        margins = bound - traj.norms()
        i = int(np.argmin(margins))
        tol = _tol(state_norm(x0) + u.sup_norm)
        tracker.add(idx, grid[i], margins[i], tol, x0, u)
    return conclude(CheckProperty.ISS, tracker.records, tracker.witness)


def uls_margin(sys: SpectralSystem, sigma_fn: ComparisonFunction,
               gamma_fn: ComparisonFunction, x0, u: InputSignal, t: float) -> float:
    lhs = state_norm(mild_solution(sys, x0, u, t))
    return evaluate(sigma_fn, state_norm(x0)) + evaluate(gamma_fn, u.sup_norm) - lhs


def check_uls(sys: SpectralSystem, sigma_fn: ComparisonFunction,
              gamma_fn: ComparisonFunction, r: float,
              budget: SampleBudget) -> StabilityReport:
    """Static bound sigma(|x0|) + gamma(|u|) over the ball of radius r."""
    if r <= 0.0:
        raise DomainError("the locality radius r must be positive")
    local = replace(budget, radius=r)
    times = eval_times(local)
    tracker = _Tracker()
    for idx, x0, u in iter_pairs(sys, local):
        grid = np.unique(np.concatenate(
            [times, u.breakpoints[u.breakpoints < local.horizon]]))
        traj = sample_trajectory(sys, x0, u, grid)
        bound = evaluate(sigma_fn, state_norm(x0)) + evaluate(gamma_fn, u.sup_norm)
        margins = bound - traj.norms()
        i = int(np.argmin(margins))
        tol = _tol(state_norm(x0) + u.sup_norm)
        tracker.add(idx, grid[i], margins[i], tol, x0, u)
    return conclude(CheckProperty.ULS, tracker.records, tracker.witness)


def ulim_slack(sys: SpectralSystem, gamma_fn: ComparisonFunction, eps: float,
               x0, u: InputSignal, grid) -> float:
    """Best slack eps + gamma(|u|) - |phi(t)| over the grid; >= 0 iff a hit."""
    traj = sample_trajectory(sys, x0, u, np.asarray(grid, dtype=float))
    level = eps + evaluate(gamma_fn, u.sup_norm)
    return float(np.max(level - traj.norms()))


def check_ulim(sys: SpectralSystem, gamma_fn: ComparisonFunction, eps: float,
               r: float, budget: SampleBudget) -> StabilityReport:
    """Search each trajectory for a dip below eps + gamma(|u|_inf).

    The hitting-time search runs on a fixed uniform grid (independent of
    n_times) so that enlarging a budget can only add samples, never change
    the per-sample search; the empirical uniform hitting time tau is the
    maximum first-hit time over the samples and is reported in the notes.
    """
    if eps <= 0.0 or r <= 0.0:
        raise DomainError("eps and r must be positive")
    local = replace(budget, radius=r)
    grid = np.linspace(0.0, local.horizon, ULIM_GRID_POINTS)
    tracker = _Tracker()
    tau_hat = 0.0
    exhausted = False
    for idx, x0, u in iter_pairs(sys, local):
        traj = sample_trajectory(sys, x0, u, grid)
        slack = eps + evaluate(gamma_fn, u.sup_norm) - traj.norms()
        hits = np.nonzero(slack >= 0.0)[0]
        margin = float(np.max(slack))
        t_at = grid[int(np.argmax(slack))]
        if hits.size:
            tau_hat = max(tau_hat, float(grid[hits[0]]))
        else:
            exhausted = True
        tracker.add(idx, float(t_at), margin, 0.0, x0, u)
    notes = "horizon exhausted for some sample" if exhausted else f"tau_hat={tau_hat!r}"
    return conclude(CheckProperty.ULIM, tracker.records, tracker.witness, notes=notes)


def cep_margin(sys: SpectralSystem, eps: float, x0, u: InputSignal, h: float,
               grid=None) -> float:
    """eps minus the supremum of |phi| over [0, h] on the probe grid."""
    if grid is None:
        grid = eval_times(SampleBudget(horizon=h))
    traj = sample_trajectory(sys, x0, u, np.asarray(grid, dtype=float))
    return eps - float(np.max(traj.norms()))


def check_cep(sys: SpectralSystem, budget: SampleBudget, h: float,
              n_levels: int = 4, max_halvings: int = 8) -> StabilityReport:
    """Empirical continuity table at the equilibrium.

    For each tolerance eps_j = radius * 2**-j the probe finds the largest
    delta in {eps_j / 2**i} such that every sample with |x0|, |u|_inf <= delta
    stays within eps_j on [0, h].  The (eps_j, delta_j) table is reported in
    the notes; failure to find any workable delta is a violation.
    """
    if h <= 0.0:
        raise DomainError("the horizon h must be positive")
    tracker = _Tracker()
    table = []
    for j in range(n_levels):
        eps_j = budget.radius * 2.0 ** (-j)
        chosen_delta = None
        last_sup, last_sample = math.inf, None
        for i in range(1, max_halvings + 1):
            delta = eps_j / 2.0 ** i
            local = replace(budget, radius=delta, horizon=h)
            times = eval_times(local)
            sup, sup_sample = 0.0, None
            for _, x0, u in iter_pairs(sys, local):
                grid = np.unique(np.concatenate(
                    [times, u.breakpoints[u.breakpoints < h]]))
                traj = sample_trajectory(sys, x0, u, grid)
                norms = traj.norms()
                k = int(np.argmax(norms))
                if norms[k] > sup:
                    sup = float(norms[k])
                    sup_sample = (x0, u, float(grid[k]))
            last_sup, last_sample = sup, sup_sample
            if sup <= eps_j:
                chosen_delta = delta
                break
        margin = eps_j - last_sup
        if chosen_delta is None and last_sample is not None:
            x0, u, t_at = last_sample
            tracker.add(j, t_at, margin, 0.0, x0, u)
        else:
            tracker.add(j, h, margin, 0.0, np.zeros(sys.n_modes), InputSignal.zero())
        table.append((eps_j, chosen_delta))
    notes = "table " + "; ".join(
        f"eps={e!r}->delta={d!r}" for e, d in table)
    return conclude(CheckProperty.CEP, tracker.records, tracker.witness, notes=notes)


def brs_margin(sys: SpectralSystem, C: float, tau: float, x0, u: InputSignal,
               t: float, kappa_upper: float | None = None) -> float:
    """A-priori reachability bound C (M + kappa_upper(tau)) minus |phi(t)|."""
    if kappa_upper is None:
        kappa_upper = kappa_bounds(sys, tau).upper
    bound = C * (1.0 + kappa_upper)
    return bound - state_norm(mild_solution(sys, x0, u, t))


def check_brs(sys: SpectralSystem, C: float, tau: float,
              budget: SampleBudget) -> StabilityReport:
    if C <= 0.0 or tau <= 0.0:
        raise DomainError("C and tau must be positive")
    local = replace(budget, radius=C, horizon=tau)
    kappa_upper = kappa_bounds(sys, tau).upper
    bound = C * (1.0 + kappa_upper)
    times = eval_times(local)
    tracker = _Tracker()
    sup = 0.0
    for idx, x0, u in iter_pairs(sys, local):
        grid = np.unique(np.concatenate([times, u.breakpoints[u.breakpoints < tau]]))
        traj = sample_trajectory(sys, x0, u, grid)
        norms = traj.norms()
        i = int(np.argmax(norms))
        sup = max(sup, float(norms[i]))
        tracker.add(idx, grid[i], bound - norms[i], _tol(bound), x0, u)
    notes = f"empirical_sup={sup!r} bound={bound!r}"
    return conclude(CheckProperty.BRS, tracker.records, tracker.witness, notes=notes)


# ---------------------------------------------------------------------------
# integral checks


def _quad_grid(budget: SampleBudget, u: InputSignal) -> np.ndarray:
    return build_time_grid(budget.horizon, u, extra=eval_times(budget))


def _validate_refines(grid: np.ndarray, u: InputSignal, horizon: float) -> None:
    bps = u.breakpoints[(u.breakpoints > 0.0) & (u.breakpoints < horizon)]
    if bps.size and not np.all(np.isin(bps, grid)):
        raise ValidationError("quadrature grid must refine the input breakpoints")


def trajectory_integral(traj, f: ComparisonFunction, t: float) -> float:
    """Composite-Simpson integral of f(|phi(s)|) over [0, t] on the sampled grid."""
    grid = traj.times
    _validate_refines(grid, traj.input, float(grid[-1]))
    i = int(np.searchsorted(grid, t))
    if i >= grid.size or grid[i] != t:
        raise ValidationError("t must be a grid point of the trajectory")
    if i == 0:
        return 0.0
    vals = evaluate(f, traj.norms()[:i + 1])
    return float(simpson(vals, x=grid[:i + 1]))


def input_integral(u: InputSignal, sigma_fn: ComparisonFunction, t: float) -> float:
    """Exact integral of sigma(|u(s)|) over [0, t] for piecewise-constant u."""
    total = 0.0
    for dur, val in u.segments_until(t):
        total += dur * evaluate(sigma_fn, abs(val))
    return total


def norm_to_integral_margin(sys: SpectralSystem, cert: NormToIntegralCertificate,
                            x0, u: InputSignal, t: float, grid=None) -> float:
    if grid is None:
        grid = build_time_grid(max(t, 1e-6), u, extra=[t])
    traj = sample_trajectory(sys, x0, u, np.asarray(grid, dtype=float))
    left = trajectory_integral(traj, cert.alpha, t)
    return cert.rhs(state_norm(x0), u.sup_norm, t) - left


def integral_to_integral_margin(sys: SpectralSystem, cert: NormToIntegralCertificate,
                                x0, u: InputSignal, t: float, grid=None) -> float:
    if grid is None:
        grid = build_time_grid(max(t, 1e-6), u, extra=[t])
    traj = sample_trajectory(sys, x0, u, np.asarray(grid, dtype=float))
    left = trajectory_integral(traj, cert.alpha, t)
    rhs = evaluate(cert.psi, state_norm(x0)) + input_integral(u, cert.sigma, t)
    return rhs - left


def _check_integral(sys, cert, budget, rhs_fn, prop, grid=None) -> StabilityReport:
    times = eval_times(budget)
    tracker = _Tracker()
    for idx, x0, u in iter_pairs(sys, budget):
        g = _quad_grid(budget, u) if grid is None else np.asarray(grid, dtype=float)
        _validate_refines(g, u, budget.horizon)
        traj = sample_trajectory(sys, x0, u, g)
        vals = evaluate(cert.alpha, traj.norms())
        worst = (math.inf, 0.0)
        for t in times:
            # integrate through the last grid node at or below t; internally
            # built grids contain every evaluation time exactly
            i = int(np.searchsorted(g, t, side="right")) - 1
            left = 0.0 if i <= 0 else float(simpson(vals[:i + 1], x=g[:i + 1]))
            margin = rhs_fn(x0, u, float(t)) - left
            if margin < worst[0]:
                worst = (margin, float(t))
        tol = _tol(state_norm(x0) + u.sup_norm, QUAD_TOL)
        tracker.add(idx, worst[1], worst[0], tol, x0, u)
    return conclude(prop, tracker.records, tracker.witness)


def check_norm_to_integral(sys: SpectralSystem, cert: NormToIntegralCertificate,
                           budget: SampleBudget, grid=None) -> StabilityReport:
    """int alpha(|phi|) <= psi(|x0|) + t sigma(|u|_inf) on the sample set."""
    rhs = lambda x0, u, t: cert.rhs(state_norm(x0), u.sup_norm, t)
    return _check_integral(sys, cert, budget, rhs,
                           CheckProperty.NORM_TO_INTEGRAL_ISS, grid=grid)


def check_integral_to_integral(sys: SpectralSystem, cert: NormToIntegralCertificate,
                               budget: SampleBudget, grid=None) -> StabilityReport:
    """int alpha(|phi|) <= psi(|x0|) + int sigma(|u(s)|) ds; outcome is
    reported, not asserted, since the stronger estimate may genuinely fail."""
    rhs = lambda x0, u, t: (evaluate(cert.psi, state_norm(x0))
                            + input_integral(u, cert.sigma, t))
    return _check_integral(sys, cert, budget, rhs,
                           CheckProperty.INTEGRAL_TO_INTEGRAL_ISS, grid=grid)


# ---------------------------------------------------------------------------
# dissipation and axioms


def dissipation_margin(sys: SpectralSystem, op: LyapunovOperator,
                       params: DissipationParameters, x0, u: InputSignal,
                       h_seq=DEFAULT_DINI_H) -> float:
    est = dini_estimate(op, sys, x0, u, h_seq)
    return params.rhs(state_norm(x0) ** 2, u.sup_norm) - est.value


def check_dissipation(sys: SpectralSystem, op: LyapunovOperator,
                      params: DissipationParameters, budget: SampleBudget,
                      h_seq=DEFAULT_DINI_H) -> StabilityReport:
    """Vdot surrogate against (eps-1)|x0|^2 + c(eps)|u|_inf^2 per sample."""
    tracker = _Tracker()
    for idx, x0, u in iter_pairs(sys, budget):
        margin = dissipation_margin(sys, op, params, x0, u, h_seq)
        tol = 1e-4 * (1.0 + state_norm(x0) ** 2 + u.sup_norm ** 2)
        tracker.add(idx, 0.0, margin, tol, x0, u)
    return conclude(CheckProperty.DISSIPATION, tracker.records, tracker.witness)


def check_identity(sys: SpectralSystem, budget: SampleBudget) -> StabilityReport:
    """Identity (phi(0) == x0 bit for bit) and causality (agreeing inputs
    give identical states); any deviation at all is a violation."""
    tracker = _Tracker()
    t_mid = 0.5 * budget.horizon
    for idx, x0, u in iter_pairs(sys, budget):
        traj = sample_trajectory(sys, x0, u, np.array([0.0, t_mid]))
        dev = float(np.max(np.abs(traj.states[0] - np.asarray(x0, dtype=float))))
        tail = InputSignal.constant(0.37 * (1.0 + budget.radius), 1.0)
        u_twin = u.concatenated(tail, t_mid)
        dev_c = float(np.max(np.abs(
            mild_solution(sys, x0, u, t_mid) - mild_solution(sys, x0, u_twin, t_mid))))
        margin = -max(dev, dev_c)
        tracker.add(idx, 0.0 if dev >= dev_c else t_mid, margin, 0.0, x0, u)
    return conclude(CheckProperty.IDENTITY, tracker.records, tracker.witness)


def cocycle_deviation(sys: SpectralSystem, x0, u: InputSignal, t: float,
                      h: float) -> tuple[float, float]:
    """Norm gap between phi(t+h, x0, u) and the restarted flow, with its scale."""
    direct = mild_solution(sys, x0, u, t + h)
    restart = mild_solution(sys, mild_solution(sys, x0, u, t), u.shifted(t), h)
    return state_norm(direct - restart), 1.0 + state_norm(direct)


def check_cocycle(sys: SpectralSystem, budget: SampleBudget) -> StabilityReport:
    tracker = _Tracker()
    for idx, x0, u in iter_pairs(sys, budget):
        rng = _rng(budget.seed, 33, idx)
        t = float(rng.uniform(0.0, 0.6 * budget.horizon))
        h = float(rng.uniform(0.0, 0.4 * budget.horizon))
        dev, scale = cocycle_deviation(sys, x0, u, t, h)
        margin = COCYCLE_TOL * scale - dev
        tracker.add(idx, t + h, margin, 0.0, x0, u)
    return conclude(CheckProperty.COCYCLE, tracker.records, tracker.witness)


# ---------------------------------------------------------------------------
# the ISS equivalence battery


def run_iss_equivalence_battery(sys: SpectralSystem, cert: ISSCertificate,
                                budget: SampleBudget,
                                uls_sigma: ComparisonFunction | None = None,
                                ulim_eps: float = 0.1,
                                r: float | None = None) -> list[StabilityReport]:
    """Probe ULIM, ULS and BRS alongside ISS and cross-check the verdicts.

    ISS holds exactly when the three component properties do, so a violation
    on one side should be matched by a violation on the other within an
    enlarged budget.  Since these probes are falsifiers, agreement is
    one-directional evidence only; an unresolved mismatch is flagged in the
    notes of the affected reports for human review.
    """
    r = budget.radius if r is None else r
    uls_sigma = linear(cert.beta.M) if uls_sigma is None else uls_sigma
    reports = [
        check_ulim(sys, cert.gamma, ulim_eps, r, budget),
        check_uls(sys, uls_sigma, cert.gamma, r, budget),
        check_brs(sys, budget.radius, budget.horizon, budget),
        check_iss(sys, cert, budget),
    ]
    comp_violated = any(rep.violated for rep in reports[:3])
    iss_violated = reports[3].violated
    if comp_violated != iss_violated:
        big = replace(budget, n_states=budget.n_states * 3,
                      n_inputs=budget.n_inputs * 2)
        if comp_violated and not iss_violated:
            retry = check_iss(sys, cert, big)
            if retry.violated:
                reports[3] = replace(retry, notes="violated under the enlarged "
                                     "consistency budget")
            else:
                reports[3] = replace(reports[3], notes="inconsistent with component "
                                     "probes even after budget enlargement; review")
        else:
            retry = [check_ulim(sys, cert.gamma, ulim_eps, r, big),
                     check_uls(sys, uls_sigma, cert.gamma, r, big),
                     check_brs(sys, budget.radius, budget.horizon, big)]
            if any(rep.violated for rep in retry):
                for i, rep in enumerate(retry):
                    if rep.violated:
                        reports[i] = replace(rep, notes="violated under the enlarged "
                                             "consistency budget")
            else:
                reports[3] = replace(reports[3], notes="ISS violation not matched by "
                                     "any component probe after enlargement; review")
    return reports
