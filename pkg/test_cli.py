import json

import pandas as pd
import pytest

from cli import (
    DECISIONS,
    RunManifest,
    check_busemann_cocycle,
    check_circle_residuals,
    check_gibbs_cocycle,
    check_growth_slope,
    check_sections,
    main,
    run_command,
)
from config import load_run_config, read_config_file
from constants import ConfigError
from hypgeom import ProjPoint

X = ProjPoint.from_chart(0.37 + 0j)


def run(*argv):
    return main(list(argv) + ["--quiet"])


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_theta_command(tmp_path):
    assert run("theta", "--R", "4", "--out", str(tmp_path)) == 0
    frame = pd.read_csv(tmp_path / "theta.csv")
    assert frame["weight"].sum() == pytest.approx(1.0, abs=1e-12)
    assert (tmp_path / "theta_sphere.svg").exists()
    manifest = read_json(tmp_path / "manifest.json")
    assert manifest["command"] == "theta"
    assert manifest["radius"] == 4.0
    assert len(manifest["hash"]) == 64


def test_bad_potential_is_a_configuration_error(tmp_path):
    assert run("theta", "--potential", "wiggle:1", "--out", str(tmp_path)) == 1


def test_degenerate_cocycle_exits_with_numerical_failure(tmp_path):
    matrices = tmp_path / "identity.json"
    matrices.write_text(json.dumps({"matrices": [[[1, 0], [0, 1]]], "probabilities": [1.0]}), encoding="utf-8")
    out = tmp_path / "basin"
    assert run("basin", "--matrices", str(matrices), "--steps", "1000", "--points", "2", "--out", str(out)) == 2
    assert (out / "manifest.json").exists()


def test_missing_cocycle_file(tmp_path):
    assert run("basin", "--matrices", str(tmp_path / "nope.json"), "--out", str(tmp_path / "out")) == 1


def test_ball_outputs_are_reproducible(tmp_path):
    # R = 7 pushes the enumeration frontier past the threading threshold
    assert run("ball", "--R", "7", "--threads", "1", "--out", str(tmp_path / "a")) == 0
    assert run("ball", "--R", "7", "--threads", "2", "--out", str(tmp_path / "b")) == 0
    assert (tmp_path / "a" / "ball.csv").read_bytes() == (tmp_path / "b" / "ball.csv").read_bytes()
    assert (tmp_path / "a" / "ball.json").read_bytes() == (tmp_path / "b" / "ball.json").read_bytes()
    assert read_json(tmp_path / "a" / "manifest.json")["hash"] == read_json(tmp_path / "b" / "manifest.json")["hash"]


def test_manifest_hash_ignores_threads_but_not_seed():
    digest = RunManifest.from_config("theta", load_run_config(overrides={"threads": 1})).digest
    assert RunManifest.from_config("theta", load_run_config(overrides={"threads": 4})).digest == digest
    assert RunManifest.from_config("theta", load_run_config(overrides={"seed": 1})).digest != digest


def test_lyapunov_command_for_fuchsian(tmp_path):
    assert run("lyapunov", "--R", "6", "--out", str(tmp_path)) == 0
    assert read_json(tmp_path / "lyapunov.json")["chi_plus"] == pytest.approx(0.5, abs=1e-9)


def test_section_command_matches_closed_form(tmp_path):
    assert run("section", "--points", "3", "--T", "10", "--threads", "1", "--out", str(tmp_path)) == 0
    assert read_json(tmp_path / "section.json")["max_chordal_to_closed_form"] < 1e-4


def test_section_command_applies_configured_tolerance(tmp_path):
    path = tmp_path / "loose.cfg"
    path.write_text("[tolerances]\nsection_tol = 1.01\n", encoding="utf-8")
    common = ["--points", "3", "--T", "5", "--threads", "1"]
    assert run("section", "--config", str(path), *common, "--out", str(tmp_path / "loose")) == 0
    assert run("section", "--section-tol", "1e-8", *common, "--out", str(tmp_path / "strict")) == 0
    loose = read_json(tmp_path / "loose" / "section.json")
    strict = read_json(tmp_path / "strict" / "section.json")
    assert loose["tolerance"] == 1.01
    assert read_json(tmp_path / "loose" / "manifest.json")["tolerances"]["section"] == 1.01
    assert read_json(tmp_path / "strict" / "manifest.json")["tolerances"]["section"] == 1e-8
    assert strict["max_chordal_to_closed_form"] < loose["max_chordal_to_closed_form"]


def test_report_refuses_existing_directory(tmp_path):
    (tmp_path / "old.txt").write_text("previous run", encoding="utf-8")
    result = run_command("report", load_run_config(), out=tmp_path, verbose=False)
    assert not result['success']
    assert result['exit_code'] == 1
    assert not (tmp_path / "manifest.json").exists()


def test_unknown_command():
    result = run_command("dance", load_run_config(), verbose=False)
    assert result['exit_code'] == 1
    assert "dance" in result['error']


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("OUTPUT_DIR", str(tmp_path))
    result = run_command("ball", load_run_config(overrides={"R": 3.0}), verbose=False)
    assert result['success']
    out = tmp_path / result['output_dir'].rsplit("/", 1)[-1]
    assert out.name.startswith("ball-")
    assert (out / "ball.csv").exists()


def test_config_file_overrides_defaults(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("[ball]\nR = 5\n\n[potential]\npotential = bump:0.5\n", encoding="utf-8")
    cfg = load_run_config(path)
    assert cfg.R == 5.0
    assert cfg.potential == "bump:0.5"
    assert cfg.window == "8:11"
    assert load_run_config(path, {"R": 6.0, "seed": None}).R == 6.0


@pytest.mark.parametrize("text", ["[colors]\nred = 1\n", "[ball]\nradius = 3\n", "[ball]\nR = big\n"])
def test_bad_config_files(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        read_config_file(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.cfg")


@pytest.mark.parametrize("overrides", [{"threads": 0}, {"radii": "9,8"}, {"window": "11:8"}, {"rep": "bent:2"}])
def test_invalid_overrides(overrides):
    with pytest.raises(ConfigError):
        load_run_config(overrides=overrides)


def test_manifest_records_decisions_and_keeps_checks_out_of_the_hash():
    manifest = RunManifest.from_config("report", load_run_config())
    digest = manifest.digest
    manifest.checks = {"growth_slope": True}
    assert manifest.digest == digest
    data = manifest.to_dict()
    assert data["decisions"] == DECISIONS
    assert data["decisions"]["pressure_method"] == "orbital growth of J"
    assert data["decisions"]["bending_discreteness"] == "assumed"


def test_busemann_check():
    result = check_busemann_cocycle(n_triples=50, n_limits=5, seed=2)
    assert result["passed"]
    assert result["max_identity_error"] <= 1e-8


def test_gibbs_check_records_its_tolerance():
    result = check_gibbs_cocycle(1.0, n_triples=2, seed=1, tol=1e-7)
    assert result["passed"]
    assert result["tolerance"] == 1e-7
    assert set(result["max_relative_error"]) == {"zero", "const:0.3", "bump:0.5"}


def test_growth_check_uses_the_last_six_radii(ball_8):
    result = check_growth_slope(ball_8)
    assert result["radii"] == [3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
    assert result["counts"] == sorted(result["counts"])


@pytest.mark.slow
def test_growth_check_passes_at_radius_eleven(ball_11):
    result = check_growth_slope(ball_11)
    assert result["radii"][0] == 6.0
    assert result["passed"]


def test_section_check_at_small_scale():
    result = check_sections(3, 10.0, seed=0, n_equivariant=1)
    assert result["max_chordal_to_closed_form"] < 1e-4
    assert result["max_equivariance_error"] < 1e-3


def test_circle_residual_check_covers_both_representations(ball_8):
    result = check_circle_residuals(ball_8, X)
    assert set(result["round_circle_residual"]) == {"fuchsian", "bent:0.3"}
    assert result["round_circle_residual"]["fuchsian"] < 1e-6
    assert result["round_circle_residual"]["bent:0.3"] > result["round_circle_residual"]["fuchsian"]


@pytest.mark.slow
def test_report_lists_its_checks_in_the_manifest(tmp_path):
    argv = ["report", "--R", "7", "--radii", "5,6,7", "--window", "4:7", "--samples", "1000",
            "--points", "3", "--T", "10", "--steps", "3000", "--section-tol", "1e-5", "--out", str(tmp_path)]
    assert run(*argv) == 0
    report = read_json(tmp_path / "report.json")
    manifest = read_json(tmp_path / "manifest.json")
    names = {"busemann_cocycle", "gibbs_cocycle", "growth_slope", "pressure", "cauchy", "ball_average_vs_theta",
             "lyapunov", "section_vs_closed_form", "circle_residual", "basin"}
    assert set(manifest["checks"]) == names
    assert report["section_vs_closed_form"]["tolerance"] == 1e-5
    assert report["gibbs_cocycle"]["tolerance"] == manifest["tolerances"]["delta"]
    assert manifest["checks"]["busemann_cocycle"]
    assert manifest["decisions"]["pressure_method"] == "orbital growth of J"
