import json
import math
import os

import pytest

from epdlab.cli import main
from epdlab.config import ConfigError, RunConfig, config_to_text, parse_config
from epdlab.exponents import ModelParams
from epdlab.solver import GridSpec


def run_cli(argv, capsys=None):
    code = main(argv)
    return code


def read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# config plumbing

def test_parse_config_round_trip():
    cfg = RunConfig(
        model=ModelParams(n=4, mu=1.5, alpha=0.5, p=1.8, epsilon=0.7),
        grid=GridSpec(r_max=12.0, dr=0.05, cfl=0.4, t_budget=10.0,
                      blowup_threshold=1e5),
        emit_snapshots=(1.0, 2.5),
    )
    assert parse_config(config_to_text(cfg)) == cfg


def test_parse_config_empty_gives_defaults():
    assert parse_config("") == RunConfig()
    assert parse_config(None) == RunConfig()


def test_parse_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config("model.zeta = 1\n")


def test_parse_config_rejects_bad_value():
    with pytest.raises(ConfigError):
        parse_config("model.mu = fast\n")
    with pytest.raises(ConfigError):
        parse_config("model.p = 0.5\n")  # domain type refuses p <= 1


def test_parse_config_flags_override_file():
    cfg = parse_config("model.mu = 1.5\n", {"model.mu": "2"})
    assert cfg.model.mu == 2.0


def test_parse_config_comments_and_blanks():
    cfg = parse_config("# comment\n\nmodel.n = 4  # trailing\n")
    assert cfg.model.n == 4


# ---------------------------------------------------------------------------
# artifact-producing subcommands

def test_exponents_command(tmp_path, capsys):
    out = str(tmp_path / "out")
    assert main(["exponents", "--mu", "1", "--p", "2", "--out", out]) == 0
    doc = json.loads(read(os.path.join(out, "exponents.json")))
    assert doc["schema_version"] == 1
    assert doc["p_S"] == pytest.approx(2.0, abs=1e-14)
    assert doc["gamma_at_p"] == pytest.approx(0.0, abs=1e-12)
    names = [h["name"] for h in doc["hypotheses"]]
    assert "p_critical" in names
    assert os.path.exists(os.path.join(out, "config.resolved"))


def test_bessel_command_deterministic(tmp_path):
    out = str(tmp_path / "out")
    argv = ["bessel", "--nu", "0.5,1.0", "--z-points", "5", "--out", out]
    assert main(argv) == 0
    first = read(os.path.join(out, "bessel.csv"))
    assert main(argv) == 0
    assert read(os.path.join(out, "bessel.csv")) == first
    lines = first.strip().splitlines()
    assert lines[0] == "nu,z,value"
    assert len(lines) == 1 + 2 * 5


def test_hfun_command(tmp_path):
    out = str(tmp_path / "out")
    assert main(["hfun", "--mu", "2", "--t-points", "4", "--out", out]) == 0
    lines = read(os.path.join(out, "hfun.csv")).strip().splitlines()
    assert lines[0] == "mu,t,h,hprime"
    assert len(lines) == 5
    for line in lines[1:]:
        mu, t, h, hp = (float(x) for x in line.split(","))
        assert mu == 2.0 and t > 0.0 and h > 0.0


def test_testfn_verify_command(tmp_path):
    out = str(tmp_path / "out")
    assert main(["testfn-verify", "--tgrid", "1,5", "--rfrac", "0,0.5",
                 "--out", out]) == 0
    doc = json.loads(read(os.path.join(out, "testfn.json")))
    assert doc["identity_ok"] is True
    assert doc["asymptotic_slope"] == pytest.approx(doc["slope_target"],
                                                    abs=0.02)
    lines = read(os.path.join(out, "testfn.csv")).strip().splitlines()
    assert lines[0] == "t,r,b_q,db_q_dt,pde_residual,ratio_tq"
    assert len(lines) == 5


def test_solve_command_survived(tmp_path):
    out = str(tmp_path / "out")
    argv = ["solve", "--eps", "1", "--rmax", "3.2", "--tbudget", "2",
            "--dr", "0.02", "--snapshots", "1.0", "--out", out]
    assert main(argv) == 0
    doc = json.loads(read(os.path.join(out, "verdict.json")))
    assert doc["verdict"] == "survived"
    assert doc["T_num"] == "nan"
    assert doc["grid"]["dr"] == 0.02
    lines = read(os.path.join(out, "trace.csv")).strip().splitlines()
    assert lines[0] == "t,sup_norm,energy,dissipation,support_radius"
    snaps = [f for f in os.listdir(out) if f.startswith("snapshot_t")]
    assert len(snaps) == 1


def test_solve_command_blowup(tmp_path):
    out = str(tmp_path / "out")
    argv = ["solve", "--eps", "16", "--rmax", "4.2", "--tbudget", "3",
            "--dr", "0.02", "--out", out]
    assert main(argv) == 0  # detected blow-up is a successful outcome
    doc = json.loads(read(os.path.join(out, "verdict.json")))
    assert doc["verdict"] == "blew_up"
    assert 0.0 < doc["T_num"] < 3.0
    assert doc["refine_gap"] < 0.01


def test_solve_rejects_containment_violation(tmp_path, capsys):
    out = str(tmp_path / "out")
    code = main(["solve", "--rmax", "3", "--tbudget", "50", "--out", out])
    assert code == 2
    assert "error: config" in capsys.readouterr().err


def test_picard_command(tmp_path):
    out = str(tmp_path / "out")
    assert main(["picard", "--eps", "0.5", "--rmax", "2", "--tbudget", "0.5",
                 "--dr", "0.01", "--tsmall", "0.25", "--out", out]) == 0
    doc = json.loads(read(os.path.join(out, "picard.json")))
    assert doc["contracting"] is True
    assert doc["max_gap_ratio"] < 0.1
    lines = read(os.path.join(out, "picard_gaps.csv")).strip().splitlines()
    assert lines[0] == "iteration,gap"
    assert len(lines) == 1 + doc["iterations"]


def test_functional_command_on_stored_run(tmp_path):
    run_dir = str(tmp_path / "run")
    argv = ["solve", "--eps", "1", "--rmax", "9.2", "--tbudget", "8",
            "--dr", "0.02", "--snapshot-dt", "0.25", "--out", run_dir]
    assert main(argv) == 0
    out = str(tmp_path / "fn")
    assert main(["functional", "--run", run_dir, "--M", "2,4,8",
                 "--out", out]) == 0
    lines = read(os.path.join(out, "functional.csv")).strip().splitlines()
    assert lines[0] == "M,Y,Z"
    rows = [tuple(float(x) for x in ln.split(",")) for ln in lines[1:]]
    assert [r[0] for r in rows] == [2.0, 4.0, 8.0]
    ys = [r[1] for r in rows]
    assert all(y > 0.0 for y in ys) and ys == sorted(ys)


def test_functional_command_missing_run(tmp_path, capsys):
    empty = str(tmp_path / "empty")
    os.makedirs(empty)
    code = main(["functional", "--run", empty, "--out",
                 str(tmp_path / "fn")])
    assert code == 3
    assert "error: numeric" in capsys.readouterr().err


def test_ode_lifespan_command(tmp_path):
    out = str(tmp_path / "out")
    assert main(["ode-lifespan", "--p", "2", "--eps", "0.5",
                 "--out", out]) == 0
    doc = json.loads(read(os.path.join(out, "ode_lifespan.json")))
    assert doc["blew_up"] is True
    assert doc["gap"] < 1e-6
    assert doc["s_numeric"] == pytest.approx(doc["s_closed"], rel=1e-6)


def test_sweep_command(tmp_path):
    out = str(tmp_path / "out")
    argv = ["sweep", "--eps-list", "10,13,16", "--mu", "1", "--p", "2",
            "--rmax", "9.2", "--tbudget", "8", "--dr", "0.02", "--out", out]
    assert main(argv) == 0
    doc = json.loads(read(os.path.join(out, "sweep_fit.json")))
    assert doc["slope"] > 0.0
    assert doc["monotone"] is True
    lines = read(os.path.join(out, "sweep.csv")).strip().splitlines()
    assert lines[0] == "eps,x_fit,T_num,refine_gap"
    assert len(lines) == 4


def test_sweep_command_refuses_sparse_fit(tmp_path, capsys):
    out = str(tmp_path / "out")
    argv = ["sweep", "--eps-list", "0.5,1.0", "--rmax", "3.2",
            "--tbudget", "2", "--dr", "0.02", "--out", out]
    assert main(argv) == 3
    assert "blowup_lab" in capsys.readouterr().err
    doc = json.loads(read(os.path.join(out, "sweep_fit.json")))
    assert "error" in doc
    assert {b["eps"] for b in doc["budget_outs"]} == {0.5, 1.0}


def test_unknown_subcommand_exits_with_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("model.mu = 1.5\nmodel.p = 2\n", encoding="utf-8")
    out = str(tmp_path / "out")
    assert main(["exponents", "--config", str(cfg_path), "--mu", "2",
                 "--out", out]) == 0
    resolved = read(os.path.join(out, "config.resolved"))
    assert "model.mu = 2" in resolved
    assert "model.p = 2" in resolved


def test_missing_config_file_is_config_error(tmp_path, capsys):
    code = main(["exponents", "--config", str(tmp_path / "nope.cfg")])
    assert code == 2
