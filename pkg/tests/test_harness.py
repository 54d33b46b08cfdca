"""Tests for the scenario grammar, the runner, CSV outputs and the CLI."""

import csv
import subprocess
import sys

import pytest

from isslab import (SampleBudget, ScenarioError, Verdict, iss_margin, build_system,
                    load_scenario, main, parse_scenario, run_scenario,
                    serialize_scenario, simulate_scenario, ISSCertificate,
                    DecayEnvelope, linear)

MINIMAL = """
# minimal heat scenario
system.preset = heat_dirichlet
system.a = 1.0
system.n_modes = 64
checks.names = iss
"""

BUNDLED = ("heat_iss.scn", "heat_bad_gain.scn", "diagonal_custom.scn",
           "datko_vs_neginverse.scn")


# ---------------------------------------------------------------------------
# parsing


def test_minimal_scenario_defaults():
    s = parse_scenario(MINIMAL)
    assert s.preset == "heat_dirichlet"
    assert s.n_modes == 64
    assert s.checks == ("iss",)
    assert s.budget == SampleBudget()
    assert s.epsilon == 0.5


def test_unknown_key_rejected():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("system.wavelength = 3\n")
    assert "system.wavelength" in str(err.value)
    assert err.value.line == 1


def test_syntax_error_carries_line_and_column():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("system.preset = heat_dirichlet\nthis is not a pair\n")
    assert err.value.line == 2
    assert err.value.column is not None


def test_lambdas_must_increase():
    text = ("system.preset = diagonal\n"
            "system.lambdas = 2.0, 1.0\n"
            "system.b = 1.0, 1.0\n"
            "checks.names = iss\n")
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert "lambdas" in str(err.value)


def test_epsilon_outside_unit_interval():
    with pytest.raises(ScenarioError) as err:
        parse_scenario(MINIMAL + "lyapunov.epsilon = 1.5\n")
    assert "epsilon must lie in (0,1)" in str(err.value)


def test_duplicate_key_rejected():
    with pytest.raises(ScenarioError):
        parse_scenario("system.a = 1.0\nsystem.a = 2.0\nchecks.names = iss\n")


def test_unknown_check_name_rejected():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("checks.names = iss, levitation\n")
    assert "levitation" in str(err.value)


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_scenarios_round_trip(name):
    s = load_scenario(name)
    assert parse_scenario(serialize_scenario(s)) == s


def test_round_trip_with_all_sections():
    s = load_scenario("heat_iss.scn")
    text = serialize_scenario(s)
    assert parse_scenario(text) == s
    # serialization is canonical: a second pass is identical
    assert serialize_scenario(parse_scenario(text)) == text


def test_missing_scenario_file():
    with pytest.raises(ScenarioError):
        load_scenario("no_such_scenario.scn")


# ---------------------------------------------------------------------------
# running


@pytest.fixture(scope="module")
def heat_iss_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("heat_iss")
    s = load_scenario("heat_iss.scn")
    return s, run_scenario(s, out_dir=str(out)), out


def test_heat_iss_scenario_all_clean(heat_iss_run):
    s, run, _ = heat_iss_run
    assert [e.name for e in run.entries] == list(s.checks)
    assert not run.any_violated
    assert run.version.startswith("isslab ")
    for e in run.entries:
        assert e.report.verdict is Verdict.NO_VIOLATION_FOUND


def test_report_csv_shape(heat_iss_run):
    _, run, tmp_path = heat_iss_run
    with open(tmp_path / "report.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["check", "verdict", "worst_margin", "samples", "seconds"]
    assert len(rows) == 1 + len(run.entries)
    with open(tmp_path / "margins.csv") as fh:
        margin_rows = list(csv.reader(fh))
    assert margin_rows[0] == ["check", "sample_index", "t", "margin"]
    total_samples = sum(e.report.samples_checked for e in run.entries)
    assert len(margin_rows) == 1 + total_samples


def test_rerun_is_deterministic_modulo_timing(tmp_path):
    s = load_scenario("heat_iss.scn")
    run_scenario(s, out_dir=str(tmp_path / "a"))
    run_scenario(s, out_dir=str(tmp_path / "b"))

    def masked(path):
        with open(path) as fh:
            return [",".join(line.split(",")[:4]) for line in fh]

    assert masked(tmp_path / "a" / "report.csv") == masked(tmp_path / "b" / "report.csv")
    assert open(tmp_path / "a" / "margins.csv").read() == \
        open(tmp_path / "b" / "margins.csv").read()


def test_bad_gain_scenario_writes_replayable_witness(tmp_path):
    s = load_scenario("heat_bad_gain.scn")
    run = run_scenario(s, out_dir=str(tmp_path))
    assert run.any_violated
    entry = run.entries[0]
    assert entry.witness_file is not None
    assert (tmp_path / entry.witness_file).exists()
    w = entry.report.witness
    sys_ = build_system(s)
    cert = ISSCertificate(DecayEnvelope(1.0, 9.869604401089358), linear(0.1))
    assert iss_margin(sys_, cert, w.x0, w.input, w.t) < -0.4


def test_empty_checks_list(tmp_path):
    s = parse_scenario("system.preset = heat_dirichlet\nchecks.names =\n")
    run = run_scenario(s, out_dir=str(tmp_path))
    assert run.entries == ()
    assert not run.any_violated


def test_minimal_scenario_runs_with_default_certificates(tmp_path):
    # defaults: beta = decay(1, lambda_1), gamma = the aggregated per-mode
    # gain bound; both are sound for the heat preset, so iss passes
    s = parse_scenario(MINIMAL)
    run = run_scenario(s, out_dir=str(tmp_path))
    assert not run.any_violated


def test_output_trajectories_flag(tmp_path):
    s = parse_scenario(MINIMAL + "output.trajectories = true\n"
                       "budget.n_states = 2\nbudget.n_inputs = 2\n")
    run_scenario(s, out_dir=str(tmp_path))
    assert (tmp_path / "traj_s00_u00.csv").exists()
    assert (tmp_path / "traj_s01_u01.csv").exists()


def test_brs_parameters_validated():
    with pytest.raises(ScenarioError) as err:
        parse_scenario(MINIMAL + "checks.brs_c = -1.0\n")
    assert "brs_c" in str(err.value)


def test_diagonal_scenario_clean(tmp_path):
    s = load_scenario("diagonal_custom.scn")
    run = run_scenario(s, out_dir=str(tmp_path))
    assert not run.any_violated


def test_datko_scenario_clean(tmp_path):
    s = load_scenario("datko_vs_neginverse.scn")
    run = run_scenario(s, out_dir=str(tmp_path))
    assert not run.any_violated


def test_simulate_writes_trajectories(tmp_path):
    s = load_scenario("heat_iss.scn")
    written = simulate_scenario(s, out_dir=str(tmp_path))
    assert written
    for name in written:
        assert (tmp_path / name).exists()
    with open(tmp_path / written[0]) as fh:
        header = fh.readline().strip().split(",")
    assert header[:2] == ["t", "norm"]
    assert len(header) == 2 + s.n_modes


# ---------------------------------------------------------------------------
# CLI


def test_cli_check_exit_codes(tmp_path):
    assert main(["check", "heat_iss.scn", "--out", str(tmp_path / "ok")]) == 0
    assert main(["check", "heat_bad_gain.scn", "--out", str(tmp_path / "bad")]) == 1


def test_cli_missing_scenario_is_config_error(tmp_path, capsys):
    assert main(["check", "definitely_missing.scn", "--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_cli_bad_scenario_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("system.preset = perpetuum_mobile\nchecks.names = iss\n")
    assert main(["check", str(bad)]) == 2


def test_cli_io_error(tmp_path, capsys):
    blocking = tmp_path / "blocked"
    blocking.write_text("a file, not a directory")
    code = main(["check", "heat_iss.scn", "--out", str(blocking / "sub")])
    assert code == 3


def test_cli_seed_override_changes_digest_not_determinism(tmp_path):
    a1 = main(["check", "heat_bad_gain.scn", "--seed", "7",
               "--out", str(tmp_path / "s7")])
    a2 = main(["check", "heat_bad_gain.scn", "--seed", "7",
               "--out", str(tmp_path / "s7b")])
    assert a1 == a2 == 1
    m1 = open(tmp_path / "s7" / "margins.csv").read()
    m2 = open(tmp_path / "s7b" / "margins.csv").read()
    assert m1 == m2


def test_cli_modes_override(tmp_path):
    code = main(["simulate", "heat_iss.scn", "--modes", "8",
                 "--out", str(tmp_path)])
    assert code == 0
    with open(tmp_path / "traj_s00_u00.csv") as fh:
        header = fh.readline().strip().split(",")
    assert len(header) == 2 + 8


def test_cli_entry_point_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "isslab.harness", "check",
                           "heat_bad_gain.scn", "--out", str(tmp_path / "cli")],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "violated" in proc.stdout
