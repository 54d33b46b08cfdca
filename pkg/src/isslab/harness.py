"""Scenario-driven command line interface.

A scenario is a line-oriented text file of ``section.key = value`` pairs with
``#`` comments.  Lists are comma separated, comparison functions use the
tokens ``linear(c)``, ``power(c, p)``, ``saturation(c, s)``,
``compose(f, g)`` and decay envelopes use ``decay(M, omega)``.  Unknown keys
are rejected.  Example::

    system.preset = heat_dirichlet
    system.a = 1.0
    system.n_modes = 64
    lyapunov.construction = neg_inverse_A
    lyapunov.epsilon = 0.5
    certificate.beta = decay(1.0, 9.869604401089358)
    certificate.gamma = linear(0.5773502691896258)
    checks.names = identity, cocycle, iss
    budget.seed = 101

Two verbs are exposed: ``isslab simulate <scenario>`` writes trajectory CSVs
for a deterministic slice of the sample set, and ``isslab check <scenario>``
runs the requested checker battery and writes ``report.csv`` (one row per
check), ``margins.csv`` (one row per sample) and a witness trajectory CSV for
every violated check.  Exit codes: 0 success, 1 violation found,
2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import re
import sys as _sys
import time
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from . import __version__
from .checkers import (SampleBudget, check_brs, check_cep, check_cocycle,
                       check_dissipation, check_identity, check_iss,
                       check_integral_to_integral, check_norm_to_integral,
                       check_ulim, check_uls, draw_input, draw_state)
from .comparison import (ComparisonFunction, DecayEnvelope, ISSCertificate,
                         NormToIntegralCertificate, derive_norm_to_integral,
                         linear, parse_comparison, power)
from .errors import ScenarioError, ValidationError
from .lyapunov import (DATKO, NEG_INVERSE, build_datko, build_neg_inverse,
                       dissipation_constants)
from .report import StabilityReport
from .system import (HeatDirichletParams, SpectralSystem,
                     build_time_grid, heat_dirichlet, sample_trajectory,
                     write_trajectory_csv)

CHECK_NAMES = ("identity", "cocycle", "iss", "uls", "ulim", "brs", "cep",
               "dissipation", "norm_to_integral", "integral_to_integral")

_KEY_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_.]*)\s*=(.*)$")


@dataclass(frozen=True)
class Scenario:
    """Fully validated configuration of one experiment."""

    preset: str = "heat_dirichlet"
    a: float = 1.0
    n_modes: int = 64
    lambdas: tuple[float, ...] | None = None
    b: tuple[float, ...] | None = None
    label: str = ""
    construction: str = NEG_INVERSE
    epsilon: float = 0.5
    beta: DecayEnvelope | None = None
    gamma: ComparisonFunction | None = None
    alpha: ComparisonFunction | None = None
    psi: ComparisonFunction | None = None
    sigma: ComparisonFunction | None = None
    uls_sigma: ComparisonFunction | None = None
    derive: str = "none"
    checks: tuple[str, ...] = ()
    ulim_eps: float = 0.1
    cep_h: float = 1.0
    brs_c: float | None = None
    brs_tau: float | None = None
    budget: SampleBudget = field(default_factory=SampleBudget)
    out_dir: str = "out"
    write_trajectories: bool = False

    def digest(self) -> str:
        return hashlib.sha256(serialize_scenario(self).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class CheckRun:
    name: str
    report: StabilityReport
    seconds: float
    witness_file: str | None = None


@dataclass(frozen=True)
class RunReport:
    scenario_digest: str
    version: str
    entries: tuple[CheckRun, ...]

    @property
    def any_violated(self) -> bool:
        return any(e.report.violated for e in self.entries)


# ---------------------------------------------------------------------------
# parsing


def _parse_float(raw: str, key: str, line: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"key {key!r} expects a number, got {raw!r}",
                            line=line, key=key) from None


def _parse_int(raw: str, key: str, line: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"key {key!r} expects an integer, got {raw!r}",
                            line=line, key=key) from None


def _parse_floats(raw: str, key: str, line: int) -> tuple[float, ...]:
    items = [s.strip() for s in raw.split(",") if s.strip()]
    return tuple(_parse_float(s, key, line) for s in items)


def _parse_bool(raw: str, key: str, line: int) -> bool:
    if raw.strip().lower() in ("true", "yes", "1"):
        return True
    if raw.strip().lower() in ("false", "no", "0"):
        return False
    raise ScenarioError(f"key {key!r} expects true or false, got {raw!r}",
                        line=line, key=key)


def _parse_cf(raw: str, key: str, line: int) -> ComparisonFunction:
    try:
        return parse_comparison(raw)
    except ValidationError as exc:
        raise ScenarioError(f"key {key!r}: {exc}", line=line, key=key) from None


def _parse_decay(raw: str, key: str, line: int) -> DecayEnvelope:
    m = re.fullmatch(r"\s*decay\(\s*([^,]+)\s*,\s*([^)]+)\s*\)\s*", raw)
    if not m:
        raise ScenarioError(f"key {key!r} expects decay(M, omega), got {raw!r}",
                            line=line, key=key)
    return DecayEnvelope(_parse_float(m.group(1), key, line),
                         _parse_float(m.group(2), key, line))


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text; strict about unknown keys."""
    values: dict[str, object] = {}
    budget_kw: dict[str, object] = {}
    seen: set[str] = set()
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        body = rawline.split("#", 1)[0]
        if not body.strip():
            continue
        m = _KEY_RE.match(body.strip())
        if not m:
            col = body.find("=") + 1 if "=" in body else len(body.rstrip()) + 1
            raise ScenarioError(f"expected 'section.key = value', got {body.strip()!r}",
                                line=lineno, column=col)
        key, raw = m.group(1), m.group(2).strip()
        if key in seen:
            raise ScenarioError(f"duplicate key {key!r}", line=lineno, key=key)
        seen.add(key)

        if key == "system.preset":
            if raw not in ("heat_dirichlet", "diagonal"):
                raise ScenarioError(f"unknown system.preset {raw!r}", line=lineno, key=key)
            values["preset"] = raw
        elif key == "system.a":
            values["a"] = _parse_float(raw, key, lineno)
        elif key == "system.n_modes":
            values["n_modes"] = _parse_int(raw, key, lineno)
        elif key == "system.lambdas":
            values["lambdas"] = _parse_floats(raw, key, lineno)
        elif key == "system.b":
            values["b"] = _parse_floats(raw, key, lineno)
        elif key == "system.label":
            values["label"] = raw
        elif key == "lyapunov.construction":
            if raw not in (NEG_INVERSE, DATKO):
                raise ScenarioError(f"unknown lyapunov.construction {raw!r}",
                                    line=lineno, key=key)
            values["construction"] = raw
        elif key == "lyapunov.epsilon":
            values["epsilon"] = _parse_float(raw, key, lineno)
        elif key == "certificate.beta":
            values["beta"] = _parse_decay(raw, key, lineno)
        elif key in ("certificate.gamma", "certificate.alpha", "certificate.psi",
                     "certificate.sigma", "certificate.uls_sigma"):
            values[key.split(".", 1)[1]] = _parse_cf(raw, key, lineno)
        elif key == "certificate.derive":
            if raw not in ("none", "from_iss"):
                raise ScenarioError(f"certificate.derive must be none or from_iss, "
                                    f"got {raw!r}", line=lineno, key=key)
            values["derive"] = raw
        elif key == "checks.names":
            names = tuple(s.strip() for s in raw.split(",") if s.strip())
            for name in names:
                if name not in CHECK_NAMES:
                    raise ScenarioError(f"unknown check {name!r} in checks.names",
                                        line=lineno, key=key)
            values["checks"] = names
        elif key == "checks.ulim_eps":
            values["ulim_eps"] = _parse_float(raw, key, lineno)
        elif key == "checks.cep_h":
            values["cep_h"] = _parse_float(raw, key, lineno)
        elif key == "checks.brs_c":
            values["brs_c"] = _parse_float(raw, key, lineno)
        elif key == "checks.brs_tau":
            values["brs_tau"] = _parse_float(raw, key, lineno)
        elif key in ("budget.n_states", "budget.n_inputs", "budget.n_times",
                     "budget.seed"):
            budget_kw[key.split(".", 1)[1]] = _parse_int(raw, key, lineno)
        elif key in ("budget.horizon", "budget.radius"):
            budget_kw[key.split(".", 1)[1]] = _parse_float(raw, key, lineno)
        elif key == "output.dir":
            values["out_dir"] = raw
        elif key == "output.trajectories":
            values["write_trajectories"] = _parse_bool(raw, key, lineno)
        else:
            raise ScenarioError(f"unknown key {key!r}", line=lineno, key=key)

    try:
        budget = SampleBudget(**budget_kw)
        scenario = Scenario(budget=budget, **values)
    except (ValidationError, TypeError) as exc:
        raise ScenarioError(str(exc)) from None
    _validate_scenario(scenario)
    return scenario


def _validate_scenario(s: Scenario) -> None:
    if not 0.0 < s.epsilon < 1.0:
        raise ScenarioError("epsilon must lie in (0,1)", key="lyapunov.epsilon")
    if s.preset == "diagonal":
        if s.lambdas is None or s.b is None:
            raise ScenarioError("diagonal systems need system.lambdas and system.b",
                                key="system.lambdas")
        if len(s.lambdas) != len(s.b):
            raise ScenarioError("system.lambdas and system.b must have equal length",
                                key="system.b")
        lam = np.asarray(s.lambdas)
        if lam.size < 1 or lam[0] <= 0.0 or np.any(np.diff(lam) <= 0.0):
            raise ScenarioError("system.lambdas must be strictly increasing and "
                                "positive", key="system.lambdas")
    else:
        if s.a <= 0.0:
            raise ScenarioError("system.a must be positive", key="system.a")
        if s.n_modes < 1:
            raise ScenarioError("system.n_modes must be at least 1", key="system.n_modes")
    if s.ulim_eps <= 0.0:
        raise ScenarioError("checks.ulim_eps must be positive", key="checks.ulim_eps")
    if s.cep_h <= 0.0:
        raise ScenarioError("checks.cep_h must be positive", key="checks.cep_h")
    if s.brs_c is not None and s.brs_c <= 0.0:
        raise ScenarioError("checks.brs_c must be positive", key="checks.brs_c")
    if s.brs_tau is not None and s.brs_tau <= 0.0:
        raise ScenarioError("checks.brs_tau must be positive", key="checks.brs_tau")
    if s.derive == "from_iss" and s.gamma is not None and not s.gamma.unbounded:
        raise ScenarioError("certificate.derive = from_iss needs a K-infinity gamma",
                            key="certificate.derive")


def serialize_scenario(s: Scenario) -> str:
    """Canonical text round-tripping through :func:`parse_scenario`."""
    lines = [f"system.preset = {s.preset}"]
    if s.preset == "diagonal":
        lines.append("system.lambdas = " + ", ".join(repr(v) for v in s.lambdas))
        lines.append("system.b = " + ", ".join(repr(v) for v in s.b))
    else:
        lines.append(f"system.a = {s.a!r}")
        lines.append(f"system.n_modes = {s.n_modes}")
    if s.label:
        lines.append(f"system.label = {s.label}")
    lines.append(f"lyapunov.construction = {s.construction}")
    lines.append(f"lyapunov.epsilon = {s.epsilon!r}")
    if s.beta is not None:
        lines.append(f"certificate.beta = {s.beta.describe()}")
    for name in ("gamma", "alpha", "psi", "sigma", "uls_sigma"):
        fn = getattr(s, name)
        if fn is not None:
            lines.append(f"certificate.{name} = {fn.describe()}")
    if s.derive != "none":
        lines.append(f"certificate.derive = {s.derive}")
    lines.append("checks.names = " + ", ".join(s.checks))
    lines.append(f"checks.ulim_eps = {s.ulim_eps!r}")
    lines.append(f"checks.cep_h = {s.cep_h!r}")
    if s.brs_c is not None:
        lines.append(f"checks.brs_c = {s.brs_c!r}")
    if s.brs_tau is not None:
        lines.append(f"checks.brs_tau = {s.brs_tau!r}")
    b = s.budget
    lines.extend([f"budget.n_states = {b.n_states}", f"budget.n_inputs = {b.n_inputs}",
                  f"budget.n_times = {b.n_times}", f"budget.horizon = {b.horizon!r}",
                  f"budget.radius = {b.radius!r}", f"budget.seed = {b.seed}"])
    lines.append(f"output.dir = {s.out_dir}")
    lines.append(f"output.trajectories = {'true' if s.write_trajectories else 'false'}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# execution


def build_system(s: Scenario) -> SpectralSystem:
    if s.preset == "diagonal":
        return SpectralSystem(np.asarray(s.lambdas), np.asarray(s.b),
                              label=s.label or "diagonal")
    return heat_dirichlet(HeatDirichletParams(a=s.a, n_modes=s.n_modes))


def _resolve(s: Scenario, sys: SpectralSystem):
    """Fill missing certificate pieces with sound defaults for the system."""
    op = build_datko(sys) if s.construction == DATKO else build_neg_inverse(sys)
    params = dissipation_constants(op, sys, s.epsilon)
    beta = s.beta or DecayEnvelope(1.0, float(sys.lambdas[0]))
    gain = float(np.linalg.norm(sys.input_gain_coeffs))
    gamma = s.gamma or linear(max(gain, 1e-6))
    iss_cert = ISSCertificate(beta=beta, gamma=gamma)
    if s.derive == "from_iss":
        nti_cert = derive_norm_to_integral(iss_cert)
    else:
        alpha = s.alpha or power(1.0 - s.epsilon, 2.0)
        psi = s.psi or power(op.operator_norm, 2.0)
        sigma = s.sigma or power(params.c_eps, 2.0)
        nti_cert = NormToIntegralCertificate(alpha=alpha, psi=psi, sigma=sigma)
    uls_sigma = s.uls_sigma or linear(beta.M)
    return op, params, iss_cert, nti_cert, uls_sigma


def run_scenario(s: Scenario, out_dir: str | None = None) -> RunReport:
    """Execute the requested checks in declared order and write the outputs."""
    sys_ = build_system(s)
    op, params, iss_cert, nti_cert, uls_sigma = _resolve(s, sys_)
    budget = s.budget
    dispatch = {
        "identity": lambda: check_identity(sys_, budget),
        "cocycle": lambda: check_cocycle(sys_, budget),
        "iss": lambda: check_iss(sys_, iss_cert, budget),
        "uls": lambda: check_uls(sys_, uls_sigma, iss_cert.gamma, budget.radius, budget),
        "ulim": lambda: check_ulim(sys_, iss_cert.gamma, s.ulim_eps, budget.radius, budget),
        "brs": lambda: check_brs(sys_,
                                 budget.radius if s.brs_c is None else s.brs_c,
                                 budget.horizon if s.brs_tau is None else s.brs_tau,
                                 budget),
        "cep": lambda: check_cep(sys_, budget, s.cep_h),
        "dissipation": lambda: check_dissipation(sys_, op, params, budget),
        "norm_to_integral": lambda: check_norm_to_integral(sys_, nti_cert, budget),
        "integral_to_integral": lambda: check_integral_to_integral(sys_, nti_cert, budget),
    }
    entries = []
    for name in s.checks:
        t0 = time.perf_counter()
        try:
            rep = dispatch[name]()
        except Exception as exc:
            raise RuntimeError(f"check {name!r} aborted: {exc}") from exc
        seconds = time.perf_counter() - t0
        wfile = f"witness_{name}.csv" if rep.violated else None
        entries.append(CheckRun(name=name, report=rep, seconds=seconds,
                                witness_file=wfile))
    run = RunReport(scenario_digest=s.digest(), version=f"isslab {__version__}",
                    entries=tuple(entries))
    emit_csv(run, out_dir or s.out_dir, sys_, s)
    if s.write_trajectories:
        simulate_scenario(s, out_dir or s.out_dir)
    return run


def emit_csv(run: RunReport, out_dir: str, sys_: SpectralSystem, s: Scenario) -> None:
    """Write report.csv, margins.csv, the report lines and witness CSVs."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write("check,verdict,worst_margin,samples,seconds\n")
        for e in run.entries:
            fh.write(f"{e.name},{e.report.verdict.value},"
                     f"{format(e.report.worst_margin, '.17g')},"
                     f"{e.report.samples_checked},{e.seconds:.6f}\n")
    with open(os.path.join(out_dir, "margins.csv"), "w", encoding="utf-8") as fh:
        fh.write("check,sample_index,t,margin\n")
        for e in run.entries:
            for rec in e.report.margins:
                fh.write(f"{e.name},{rec.sample_index},{format(rec.t, '.17g')},"
                         f"{format(rec.margin, '.17g')}\n")
    with open(os.path.join(out_dir, "reports.txt"), "w", encoding="utf-8") as fh:
        for e in run.entries:
            fh.write(e.report.to_line(e.witness_file) + "\n")
    for e in run.entries:
        if e.witness_file is None:
            continue
        w = e.report.witness
        horizon = max(s.budget.horizon, w.t, 1e-6)
        grid = build_time_grid(horizon, w.input, extra=[w.t] if w.t > 0 else None)
        traj = sample_trajectory(sys_, w.x0, w.input, grid)
        write_trajectory_csv(traj, os.path.join(out_dir, e.witness_file))


def simulate_scenario(s: Scenario, out_dir: str | None = None,
                      max_states: int = 4, max_inputs: int = 4) -> list[str]:
    """Write trajectory CSVs for a deterministic slice of the sample set."""
    sys_ = build_system(s)
    out = out_dir or s.out_dir
    os.makedirs(out, exist_ok=True)
    written = []
    for si in range(min(s.budget.n_states, max_states)):
        x0 = draw_state(sys_, s.budget, si)
        for sj in range(min(s.budget.n_inputs, max_inputs)):
            u = draw_input(s.budget, sj)
            # plotting-grade grid; the dense default is for quadrature
            grid = build_time_grid(s.budget.horizon, u, n_uniform=257, per_decade=12)
            traj = sample_trajectory(sys_, x0, u, grid)
            name = f"traj_s{si:02d}_u{sj:02d}.csv"
            write_trajectory_csv(traj, os.path.join(out, name))
            written.append(name)
    return written


# ---------------------------------------------------------------------------
# CLI


def bundled_scenario_path(name: str):
    return resources.files("isslab").joinpath("scenarios", name)


def load_scenario(path: str) -> Scenario:
    """Read a scenario from a file path or from the bundled set by name."""
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8") as fh:
            return parse_scenario(fh.read())
    bundled = bundled_scenario_path(os.path.basename(path))
    if bundled.is_file():
        return parse_scenario(bundled.read_text(encoding="utf-8"))
    raise ScenarioError(f"scenario file not found: {path}")


def _apply_overrides(s: Scenario, seed: int | None, modes: int | None) -> Scenario:
    if seed is not None:
        s = replace(s, budget=replace(s.budget, seed=seed))
    if modes is not None:
        if s.preset == "diagonal":
            if modes > len(s.lambdas):
                raise ScenarioError(f"--modes {modes} exceeds the {len(s.lambdas)} "
                                    "modes of the explicit spectrum")
            s = replace(s, lambdas=s.lambdas[:modes], b=s.b[:modes])
        else:
            s = replace(s, n_modes=modes)
    return s


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="isslab",
        description="Simulate truncated spectral control systems and probe "
                    "their stability estimates.")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, helptext in (("simulate", "write trajectory CSVs only"),
                          ("check", "run the configured checker battery")):
        sp = sub.add_parser(cmd, help=helptext)
        sp.add_argument("scenario", help="scenario file path or bundled scenario name")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="override budget.seed")
        sp.add_argument("--modes", type=int, help="override the truncation order")
    args = parser.parse_args(argv)
    try:
        scenario = _apply_overrides(load_scenario(args.scenario), args.seed, args.modes)
        if args.command == "simulate":
            written = simulate_scenario(scenario, args.out)
            print(f"wrote {len(written)} trajectories to "
                  f"{args.out or scenario.out_dir}")
            return 0
        run = run_scenario(scenario, args.out)
        for e in run.entries:
            print(f"{e.name}: {e.report.verdict.value} "
                  f"(worst margin {e.report.worst_margin:.6g}, "
                  f"{e.report.samples_checked} samples, {e.seconds:.3f}s)")
        return 1 if run.any_violated else 0
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=_sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime error: {exc}", file=_sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
