"""Tests for the batch front end: config handling, artifacts, exit codes."""

import math

import numpy as np
import pytest

from osclab.cli import (
    RunConfig,
    config_hash,
    dispatch,
    emit_plot,
    parse_config_file,
    read_series_csv,
)
from osclab.decay import fit_decay
from osclab.grid_ops import gaussian_field, read_field, write_field


def _cfg(**kw):
    base = dict(
        tolerances={"identity_rel": 1e-3},
        grid=(256, 32.0),
        constants=(12, 0, 8.0, 0.05),
        seed=1,
        output_dir=".",
    )
    base.update(kw)
    return RunConfig(**base)


# ---------------------------------------------------------------------------
# configuration


def test_config_invariants():
    with pytest.raises(ValueError, match="C1"):
        _cfg(constants=(10, 0, 8.0, 0.05))
    with pytest.raises(ValueError, match="power of two"):
        _cfg(grid=(100, 32.0))
    with pytest.raises(ValueError, match="positive"):
        _cfg(tolerances={"identity_rel": 0.0})
    assert _cfg(constants=(14, 1, 8.0, 0.05)).constants[0] == 14


def test_config_hash_tracks_content():
    a, b = _cfg(), _cfg()
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(_cfg(seed=2))
    assert len(config_hash(a)) == 12
    # artifact location does not change run identity
    assert config_hash(a) == config_hash(_cfg(output_dir="/elsewhere"))


def test_parse_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# comment\n"
        "[tolerances]\n"
        "flat = 1e-7  # inline comment\n"
        "[run]\n"
        "seed = 7\n"
    )
    sections = parse_config_file(path)
    assert sections == {"tolerances": {"flat": "1e-7"}, "run": {"seed": "7"}}
    path.write_text("[nosuch]\nx = 1\n")
    with pytest.raises(ValueError, match="unknown section"):
        parse_config_file(path)
    path.write_text("[run]\njust a line\n")
    with pytest.raises(ValueError, match="key = value"):
        parse_config_file(path)
    path.write_text("orphan = 1\n")
    with pytest.raises(ValueError, match="section"):
        parse_config_file(path)


def test_config_file_and_flag_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "[grid]\nn = 128\nbox = 32.0\n"
        "[run]\nseed = 7\noutput_dir = %s\n" % (tmp_path / "from_file")
    )
    rc = dispatch(["dump-bumps", "--config", str(path), "--points", "16"])
    assert rc == 0
    assert (tmp_path / "from_file" / "bumps.csv").exists()
    # flag wins over the file
    rc = dispatch(["dump-bumps", "--config", str(path), "--points", "16",
                   "--output-dir", str(tmp_path / "from_flag")])
    assert rc == 0
    assert (tmp_path / "from_flag" / "bumps.csv").exists()


def test_output_dir_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("OSC_OUTPUT_DIR", str(tmp_path / "envdir"))
    assert dispatch(["dump-bumps", "--points", "16"]) == 0
    assert (tmp_path / "envdir" / "bumps.csv").exists()


# ---------------------------------------------------------------------------
# exit codes


def test_usage_exit_codes(tmp_path, capsys):
    assert dispatch(["no-such-command"]) == 2
    assert dispatch(["dump-bumps", "--bogus-flag"]) == 2
    assert dispatch(["--help"]) == 0
    # bad parameter values rejected by the library are usage errors too
    assert dispatch(["verify", "--lemma", "vdc1", "--set", "eta=10",
                     "--output-dir", str(tmp_path)]) == 2
    capsys.readouterr()


def test_verify_fail_exit_code(tmp_path, capsys):
    # an unreachable threshold turns a healthy run into a FAIL
    rc = dispatch(["verify", "--lemma", "mult_dec_ell",
                   "--set", "threshold=-9.0",
                   "--output-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 1
    assert "LEMMA mult_dec_ell" in out and "FAIL" in out


# ---------------------------------------------------------------------------
# artifacts


def test_identities_csv_schema(tmp_path, capsys):
    rc = dispatch(["verify-identities", "--samples", "50",
                   "--output-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0
    lines = (tmp_path / "identities.csv").read_text().splitlines()
    assert lines[0].startswith("w,xi,eta,branch,")
    assert lines[1].startswith("# config ") and lines[2].startswith("# seed ")
    data = [l for l in lines[1:] if not l.startswith("#")]
    assert len(data) == 50
    assert out.count("PASS") == 6 and "FAIL" not in out


def test_identities_deterministic(tmp_path):
    for sub in ("a", "b"):
        rc = dispatch(["verify-identities", "--samples", "40",
                       "--output-dir", str(tmp_path / sub)])
        assert rc == 0
    assert (tmp_path / "a" / "identities.csv").read_bytes() == \
        (tmp_path / "b" / "identities.csv").read_bytes()
    rc = dispatch(["verify-identities", "--samples", "40", "--seed", "99",
                   "--output-dir", str(tmp_path / "c")])
    assert rc == 0
    assert (tmp_path / "a" / "identities.csv").read_bytes() != \
        (tmp_path / "c" / "identities.csv").read_bytes()


def test_verify_lemma_csv_and_summary(tmp_path, capsys):
    rc = dispatch(["verify", "--lemma", "vdc1", "--output-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "LEMMA vdc1 slope=-0.5" in out
    assert "threshold=-0.4000 PASS" in out
    series = read_series_csv(tmp_path / "verify_vdc1.csv")
    assert len(series) == 9 and series[0][0] == 64.0


def test_sublevel_sweep_matches_exponent(tmp_path, capsys):
    rc = dispatch(["sublevel", "--mu", "3,-3,1", "--sigma-sweep", "1e-6:1e-2",
                   "--samples", "500000", "--output-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0
    slope = float(out.split("slope=")[1].split()[0])
    assert slope == pytest.approx(1.0 / 3.0, abs=0.02)
    assert len(read_series_csv(tmp_path / "sublevel.csv")) == 5


def test_eval_multiplier_row(tmp_path, capsys):
    rc = dispatch(["eval-multiplier", "--n", "8", "--w", "1.0",
                   "--xi", "-509", "--eta", "256",
                   "--output-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "|m| = " in out
    rows = (tmp_path / "multiplier.csv").read_text().splitlines()
    assert rows[0].split(",")[:4] == ["n", "w", "xi", "eta"]


def test_apply_operator_roundtrip(tmp_path, capsys):
    f = gaussian_field(64, 16.0, 1.5)
    write_field(tmp_path / "in.fld", f)
    rc = dispatch(["apply-operator", "--input", str(tmp_path / "in.fld"),
                   "--output", str(tmp_path / "out.fld"),
                   "--n", "4", "--k1", "2", "--k2", "2"])
    capsys.readouterr()
    assert rc == 0
    out = read_field(tmp_path / "out.fld")
    assert out.size == 64 and out.box == 16.0


def test_decay_fit_reads_back_artifact(tmp_path, capsys):
    dispatch(["verify", "--lemma", "vdc1", "--output-dir", str(tmp_path)])
    capsys.readouterr()
    rc = dispatch(["decay-fit", "--input", str(tmp_path / "verify_vdc1.csv"),
                   "--plot", str(tmp_path / "fit.svg")])
    out = capsys.readouterr().out
    assert rc == 0
    assert "FIT slope=-0.500" in out
    assert (tmp_path / "fit.svg").stat().st_size > 0


def test_decay_fit_rejects_bad_input(tmp_path, capsys):
    path = tmp_path / "short.csv"
    path.write_text("scale,value\n2.0,1.0\n4.0,0.5\n")
    assert dispatch(["decay-fit", "--input", str(path)]) == 2
    assert dispatch(["decay-fit", "--input", str(tmp_path / "missing.csv")]) == 2
    capsys.readouterr()


def test_dump_bumps_table(tmp_path):
    rc = dispatch(["dump-bumps", "--points", "129", "--range=-2.0:2.0",
                   "--output-dir", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "bumps.csv").read_text().splitlines()
    assert lines[0] == "t,smoothstep,beta0,beta,beta_tilde,amplitude"
    data = [l.split(",") for l in lines[1:] if not l.startswith("#")]
    assert len(data) == 129
    mid = data[64]  # t = 0 exactly: every cutoff vanishes there
    assert float(mid[0]) == 0.0 and float(mid[3]) == 0.0 and float(mid[5]) == 0.0


def test_maximal_experiment_cli(tmp_path, capsys):
    rc = dispatch(["maximal-experiment", "--grid", "128,32",
                   "--ell-values", "1,2,3,4", "--v-points", "5",
                   "--output-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "CL slope=" in out and "recorded" in out
    assert len(read_series_csv(tmp_path / "maximal_cl.csv")) == 4


# ---------------------------------------------------------------------------
# plots


def test_emit_plot_requires_points(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        emit_plot([], "loglog", tmp_path / "x.svg")
    with pytest.raises(ValueError, match="positive"):
        emit_plot([(2.0, 0.0), (4.0, 0.0)], "loglog", tmp_path / "x.svg")
    with pytest.raises(ValueError, match="style"):
        emit_plot([(1.0, 1.0)], "polar", tmp_path / "x.svg")


def test_emit_plot_two_points(tmp_path):
    path = emit_plot([(2.0, 1.0), (4.0, 0.5)], "loglog", tmp_path / "two.svg")
    assert path.stat().st_size > 0
    text = path.read_text()
    assert text.count("<circle") == 2
    assert "slope" not in text  # no fit below four points


def test_emit_plot_annotation_matches_fit(tmp_path):
    series = [(2.0**n, 3.0 * 2.0 ** (-0.5 * n) * (1 + 0.01 * math.sin(n)))
              for n in range(4, 12)]
    fit = fit_decay(series)
    text = emit_plot(series, "loglog", tmp_path / "fit.svg").read_text()
    assert f"slope = {fit.slope:.6g}" in text


def test_emit_plot_linear_style(tmp_path):
    text = emit_plot([(1.0, 2.0), (2.0, 3.0), (3.0, 5.0)], "linear",
                     tmp_path / "lin.svg").read_text()
    assert text.count("<circle") == 3
