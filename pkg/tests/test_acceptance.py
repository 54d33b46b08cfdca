"""Acceptance gate: every criterion below runs at its stated tolerance and
prints one pass/fail line (run with ``pytest tests/test_acceptance.py -v -s``).

Two assertions are expected to fail and are kept deliberately red, with the
measured numbers in the failure message: the admissibility upper bound of the
64-mode heat preset at t = 1e-3 is 0.159 (its achievable lower bound alone is
0.133, and the bound decays like t**(1/4), crossing 1e-2 only near t = 8e-6),
so the gates demanding "below 1e-2 at t = 1e-3" cannot hold for this system.
Everything else passes.
"""

import math
import time

import numpy as np
import pytest

from isslab import (DecayEnvelope, HeatDirichletParams, ISSCertificate, InputSignal,
                    NormToIntegralCertificate, SampleBudget, build_datko,
                    build_neg_inverse, check_cocycle, check_identity, check_iss,
                    check_norm_to_integral, dini_estimate, draw_input, draw_state,
                    heat_dirichlet, invert, iss_margin, kappa_bounds, linear,
                    load_scenario, lyapunov_residual, mild_solution, power,
                    run_iss_equivalence_battery, run_scenario,
                    sontag_factor_exponential, state_norm, v_value, evaluate)

PI2 = math.pi ** 2
SQRT3 = math.sqrt(3.0)


def heat(n=64):
    return heat_dirichlet(HeatDirichletParams(a=1.0, n_modes=n))


def record(num: str, label: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] {num} {label}: {status}" + (f" ({detail})" if detail else ""))


def test_criterion_01_steady_state_gain():
    t0 = time.perf_counter()
    sys = heat(128)
    u = InputSignal.constant(1.0, 3.0)
    norm = state_norm(mild_solution(sys, np.zeros(128), u, 3.0))
    elapsed = time.perf_counter() - t0
    gap = abs(norm - 1.0 / SQRT3)
    ok = gap <= 2e-3 and elapsed < 1.0
    record("C01", "heat steady-state gain 1/sqrt(3)", ok,
           f"|phi(3)|={norm:.6f} gap={gap:.2e} {elapsed:.3f}s")
    assert gap <= 2e-3
    assert elapsed < 1.0


def test_criterion_02_iss_envelope_500_samples():
    t0 = time.perf_counter()
    sys = heat(64)
    cert = ISSCertificate(DecayEnvelope(1.0, PI2), linear(1.0 / SQRT3))
    budget = SampleBudget(n_states=25, n_inputs=20, n_times=16,
                          horizon=2.0, radius=1.0, seed=2025)
    rep = check_iss(sys, cert, budget)
    elapsed = time.perf_counter() - t0
    ok = rep.samples_checked == 500 and rep.worst_margin >= -1e-6 and elapsed < 5.0
    record("C02", "ISS envelope over 500 samples", ok,
           f"worst margin={rep.worst_margin:.3e} {elapsed:.2f}s")
    assert rep.samples_checked == 500
    assert rep.worst_margin >= -1e-6
    assert elapsed < 5.0


def test_criterion_03_decay_envelope_exact():
    sys = heat(64)
    x0 = np.zeros(64)
    x0[0] = 1.0
    worst = 0.0
    for t in (0.1, 0.5, 1.0):
        ratio = state_norm(mild_solution(sys, x0, InputSignal.zero(), t))
        target = math.exp(-PI2 * t)
        worst = max(worst, abs(ratio - target) / target)
    ok = worst <= 1e-12
    record("C03", "pure-mode decay exp(-pi^2 t) to 1e-12", ok, f"worst rel={worst:.2e}")
    assert worst <= 1e-12


def test_criterion_04_lyapunov_equation_residual():
    sys = heat(64)
    op = build_datko(sys)
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(1000):
        x = rng.standard_normal(64)
        worst = max(worst, abs(lyapunov_residual(op, x)) / float(np.dot(x, x)))
    ok = worst <= 1e-12
    record("C04", "Lyapunov-equation residual", ok, f"worst rel={worst:.2e}")
    assert worst <= 1e-12


def test_criterion_05_non_coercivity_exhibit():
    sys = heat(64)
    op = build_neg_inverse(sys)
    e1 = np.zeros(64); e1[0] = 1.0
    e64 = np.zeros(64); e64[-1] = 1.0
    v_last = v_value(op, e64)
    v_first = v_value(op, e1)
    gap_last = abs(v_last - 1.0 / (PI2 * 4096.0))
    gap_first = abs(v_first - 1.0 / PI2)
    ok = gap_last <= 1e-9 and gap_first <= 1e-9 and v_last < 1e-4
    record("C05", "non-coercive tail of V", ok,
           f"V(e64)={v_last:.3e} V(e1)={v_first:.6f}")
    assert v_last < 1e-4
    assert gap_last <= 1e-9
    assert gap_first <= 1e-9


def _dissipation_samples(sys, n_states=20, n_inputs=10, seed=606):
    budget = SampleBudget(n_states=n_states, n_inputs=n_inputs, n_times=1,
                          horizon=2.0, radius=1.0, seed=seed)
    for si in range(n_states):
        x0 = draw_state(sys, budget, si)
        for sj in range(n_inputs):
            yield x0, draw_input(budget, sj)


def test_criterion_06_dissipation_margin_with_pinned_constant():
    # epsilon = 1/2 and c = 2/3: analytic Vdot <= -|x|^2/2 + (2/3)|u|^2
    sys = heat(64)
    op = build_neg_inverse(sys)
    worst = math.inf
    count = 0
    for x0, u in _dissipation_samples(sys):
        est = dini_estimate(op, sys, x0, u, h_seq=(2e-8, 1e-8))
        rhs = -0.5 * state_norm(x0) ** 2 + (2.0 / 3.0) * u.sup_norm ** 2
        worst = min(worst, rhs - est.analytic)
        count += 1
    ok = count == 200 and worst >= -1e-9
    record("C06", "dissipation inequality, analytic Vdot, c=2/3", ok,
           f"worst margin={worst:.3e} over {count} samples")
    assert count == 200
    assert worst >= -1e-9


def test_criterion_06_finite_difference_agreement():
    sys = heat(64)
    op = build_neg_inverse(sys)
    worst = 0.0
    for x0, u in _dissipation_samples(sys):
        est = dini_estimate(op, sys, x0, u, h_seq=(2e-8, 1e-8))
        worst = max(worst, abs(est.value - est.analytic) / (1.0 + abs(est.analytic)))
    ok = worst <= 1e-3
    record("C06", "finite-difference Dini agrees with analytic to 1e-3", ok,
           f"worst rel={worst:.2e}")
    assert worst <= 1e-3


def test_criterion_06_kappa_zero_gate():
    # stated gate: kappa(0) = 0 is to be accepted because the admissibility
    # upper bound at t = 1e-3 falls below 1e-2.  It does not: the bound is
    # ~0.159 there (and the achievable lower bound is already ~0.133), since
    # kappa(t) decays only like t**(1/4).  Kept red; same quantity as C10.
    sys = heat(64)
    upper = kappa_bounds(sys, 1e-3).upper
    ok = upper < 1e-2
    record("C06", "kappa(0)=0 gate at t=1e-3 (expected red)", ok,
           f"upper(1e-3)={upper:.4f}, threshold 1e-2")
    assert upper < 1e-2, (
        f"admissibility upper bound at t=1e-3 is {upper:.4f}, not below 1e-2; "
        "the achievable lower bound there is already "
        f"{kappa_bounds(sys, 1e-3).lower:.4f} and the bound scales like t**0.25, "
        "so this gate cannot pass for the 64-mode heat preset")


def test_criterion_07_norm_to_integral_certificate():
    sys = heat(64)
    cert = NormToIntegralCertificate(alpha=power(0.5, 2.0),
                                     psi=power(1.0 / PI2, 2.0),
                                     sigma=power(2.0 / 3.0, 2.0))
    budget = SampleBudget(n_states=20, n_inputs=10, n_times=9,
                          horizon=2.0, radius=1.0, seed=707)
    rep = check_norm_to_integral(sys, cert, budget)
    ok = rep.samples_checked == 200 and rep.worst_margin >= -1e-6 and not rep.violated
    record("C07", "norm-to-integral certificate on 200 samples", ok,
           f"worst margin={rep.worst_margin:.3e}")
    assert rep.samples_checked == 200
    assert rep.worst_margin >= -1e-6
    assert not rep.violated


def test_criterion_08_sontag_factorization_exact():
    rng = np.random.default_rng(808)
    worst = 0.0
    for _ in range(100):
        env = DecayEnvelope(float(rng.uniform(0.2, 20.0)),
                            float(rng.uniform(0.05, 20.0)))
        r = float(rng.uniform(0.0, 10.0))
        t = float(rng.uniform(0.0, 5.0))
        xi1, xi2 = sontag_factor_exponential(env)
        recon = invert(xi1, math.exp(-t) * evaluate(xi2, r))
        target = env(r, t)
        worst = max(worst, abs(recon - target) / (1.0 + target))
    ok = worst <= 1e-10
    record("C08", "exact KL factorization", ok, f"worst rel={worst:.2e}")
    assert worst <= 1e-10


def test_criterion_09_axiom_conformance():
    sys = heat(64)
    budget = SampleBudget(n_states=20, n_inputs=10, n_times=3,
                          horizon=2.0, radius=1.0, seed=909)
    identity = check_identity(sys, budget)     # identity and causality, exact
    cocycle = check_cocycle(sys, budget)       # 200 random (x0, u, t, h)
    ok = (not identity.violated and identity.worst_margin == 0.0
          and not cocycle.violated and cocycle.samples_checked == 200)
    record("C09", "identity/causality exact, cocycle within 1e-10", ok,
           f"cocycle worst margin={cocycle.worst_margin:.3e}")
    assert not identity.violated
    assert identity.worst_margin == 0.0
    assert not cocycle.violated
    assert cocycle.samples_checked == 200


def test_criterion_10_kappa_upper_strictly_decreasing():
    sys = heat(64)
    uppers = [kappa_bounds(sys, t).upper for t in (1e-1, 1e-2, 1e-3)]
    ok = uppers[0] > uppers[1] > uppers[2] > 0.0
    record("C10", "kappa upper bound strictly decreasing toward 0", ok,
           "uppers=" + ", ".join(f"{v:.4f}" for v in uppers))
    assert uppers[0] > uppers[1] > uppers[2] > 0.0


def test_criterion_10_kappa_upper_small_at_1e3():
    # stated: the upper bound is below 1e-2 at t = 1e-3.  Measured: 0.159
    # (lower bound 0.133); first below 1e-2 near t = 8e-6.  Kept red.
    sys = heat(64)
    bound = kappa_bounds(sys, 1e-3)
    ok = bound.upper < 1e-2
    record("C10", "kappa upper bound < 1e-2 at t=1e-3 (expected red)", ok,
           f"upper={bound.upper:.4f} lower={bound.lower:.4f}")
    assert bound.upper < 1e-2, (
        f"upper bound at t=1e-3 is {bound.upper:.4f} with achievable lower "
        f"bound {bound.lower:.4f}; the t**(1/4) decay reaches 1e-2 only near "
        "t=8e-6, so the stated threshold is unattainable at N=64")


def test_criterion_11_negative_control_bad_gain(tmp_path):
    s = load_scenario("heat_bad_gain.scn")
    run = run_scenario(s, out_dir=str(tmp_path))
    entry = run.entries[0]
    rep = entry.report
    w = rep.witness
    replay = iss_margin(heat(64), ISSCertificate(DecayEnvelope(1.0, PI2), linear(0.1)),
                        w.x0, w.input, w.t) if rep.violated else 0.0
    ok = rep.violated and w.margin < -0.4 and replay < -0.4
    record("C11", "bad-gain scenario refuted with replayable witness", ok,
           f"witness margin={w.margin:.4f}" if rep.violated else "no violation")
    assert rep.violated
    assert w.margin < -0.4
    assert replay == pytest.approx(w.margin, rel=1e-12)
    assert (tmp_path / entry.witness_file).exists()


def test_criterion_12_battery_and_bundled_runtime(tmp_path):
    t0 = time.perf_counter()
    sys = heat(64)
    cert = ISSCertificate(DecayEnvelope(1.0, PI2), linear(1.0 / SQRT3))
    reports = run_iss_equivalence_battery(sys, cert, SampleBudget())
    battery_ok = all(not rep.violated for rep in reports)
    codes = {}
    for name in ("heat_iss.scn", "heat_bad_gain.scn", "diagonal_custom.scn",
                 "datko_vs_neginverse.scn"):
        run = run_scenario(load_scenario(name), out_dir=str(tmp_path / name[:-4]))
        codes[name] = 1 if run.any_violated else 0
    elapsed = time.perf_counter() - t0
    ok = (battery_ok and elapsed < 60.0 and codes["heat_bad_gain.scn"] == 1
          and sum(codes.values()) == 1)
    record("C12", "ULIM/ULS/BRS/ISS battery and bundled suite under 60s", ok,
           f"{elapsed:.1f}s, exit codes {codes}")
    assert battery_ok
    assert codes["heat_bad_gain.scn"] == 1
    assert codes["heat_iss.scn"] == 0
    assert codes["diagonal_custom.scn"] == 0
    assert codes["datko_vs_neginverse.scn"] == 0
    assert elapsed < 60.0
