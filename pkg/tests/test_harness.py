import json
import math

import numpy as np
import pytest

from stepsplit import harness, protocol, qcore
from stepsplit.harness import ConfigError, RunConfig, build_run_config, main, parse_config_text, read_report
from stepsplit.qcore import EncodingOp
from stepsplit.selftest import run_selftest


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# ---- config -------------------------------------------------------------------


def test_parse_key_value_config():
    text = """
    # comment
    seed = 7
    attack = second_qubit_unitary
    attack-op = U10
    receipt = off
    check_prob = 0.25   # trailing comment
    """
    cfg = parse_config_text(text)
    assert cfg == {"seed": 7, "attack": "second_qubit_unitary", "attack_op": "U10",
                   "receipt": False, "check_prob": 0.25}


def test_parse_json_config():
    assert parse_config_text('{"seed": 3, "reps": 2, "receipt": true}') == {"seed": 3, "reps": 2, "receipt": True}


@pytest.mark.parametrize("text", ["seed 3", "colour = red", "reps = 2.5", "receipt = maybe", "{bad json"])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_cli_overrides_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 1\nrounds = 50\n")
    cfg = build_run_config(str(path), {"rounds": 20, "seed": None})
    assert cfg.seed == 1 and cfg.rounds == 20


@pytest.mark.parametrize("overrides", [
    {}, {"seed": 1, "check_prob": 2.0}, {"seed": 1, "reps": 0}, {"seed": -1},
    {"seed": 1, "attack": "nope"}, {"seed": 1, "attack": "first_qubit_depolarize", "attack_p": 3.0},
])
def test_invalid_run_configs(overrides):
    with pytest.raises(ConfigError):
        build_run_config(None, overrides)


# ---- exit codes ------------------------------------------------------------------


def test_missing_seed_exits_one(capsys):
    code, _, err = run_cli(capsys, "simulate", "--rounds", "10")
    assert code == 1 and "seed" in err


def test_unknown_flag_exits_one(capsys):
    assert run_cli(capsys, "simulate", "--seed", "1", "--bogus")[0] == 1


def test_missing_config_file_exits_one(capsys, tmp_path):
    assert run_cli(capsys, "simulate", "--config", str(tmp_path / "none.cfg"), "--seed", "1")[0] == 1


def test_bad_grid_exits_one(capsys):
    assert run_cli(capsys, "bounds", "--gamma-grid", "0:2:0.5")[0] == 1


def test_selftest_passes(capsys):
    code, out, _ = run_cli(capsys, "selftest")
    assert code == 0
    assert out.count("PASS") == 9 and "FAIL" not in out


def test_selftest_catches_sign_flip(capsys):
    broken = {op: op.matrix for op in EncodingOp}
    u11 = broken[EncodingOp.U11].copy()
    u11[1, 0] *= -1
    broken[EncodingOp.U11] = u11
    checks = {c.name: c.passed for c in run_selftest(matrices=broken)}
    assert not checks["bell_encoding_table"]
    assert harness.cmd_selftest(matrices=broken) == 2
    assert "FAIL" in capsys.readouterr().out


def test_selftest_catches_wrong_log_base(capsys):
    checks = {c.name: c.passed for c in run_selftest(log_base=math.e)}
    assert not checks["entropy_at_gamma_three_quarters"]
    assert not checks["holevo_singlet_and_monotonicity"]
    assert harness.cmd_selftest(log_base=math.e) == 2


# ---- bounds output ---------------------------------------------------------------


def test_bounds_csv(capsys, tmp_path):
    out = tmp_path / "b.csv"
    assert run_cli(capsys, "bounds", "--gamma-grid", "0:1:0.25", "--out", str(out))[0] == 0
    rows = harness.read_bounds_csv(out.read_text())
    assert [r["gamma"] for r in rows] == [0, 0.25, 0.5, 0.75, 1.0]
    assert rows[3]["s_max_bits"] == 2.0 and rows[3]["d_lower"] == 0.375 and rows[3]["d_exact_depolarizing"] == 0.5
    assert rows[2]["s_max_bits"] == pytest.approx(1.79248125, abs=1e-8)


# ---- simulate ----------------------------------------------------------------------


def small_cfg(**kw):
    base = dict(seed=5, rounds=120, reps=3, attack="intercept_resend_bell", abort_threshold=0)
    base.update(kw)
    cfg = RunConfig(**base)
    cfg.validate()
    return cfg


def test_simulate_deterministic_and_seed_sensitive():
    a = harness.report_to_text(harness.simulate(small_cfg()), "json")
    b = harness.report_to_text(harness.simulate(small_cfg()), "json")
    c = harness.report_to_text(harness.simulate(small_cfg(seed=6)), "json")
    assert a == b and a != c


def test_report_contents():
    report = harness.simulate(small_cfg())
    assert report["provenance"]["seed"] == 5
    assert report["provenance"]["config_hash"] == harness.config_hash(report["config"])
    assert report["attack"] == {"attack": "intercept_resend_bell"}
    assert len(report["sessions"]) == 3
    comp = report["bound_comparison"]
    assert comp["gamma_mean"] == pytest.approx(0.75)
    assert comp["d_lower"] == pytest.approx(0.375)
    assert comp["d_exact_mean"] == pytest.approx(0.5)
    assert comp["s_max_bits"] == pytest.approx(2.0)
    assert report["summary"]["eve_decode_accuracy"]["mean"] == 1.0


def test_sessions_are_order_independent():
    """Session i only depends on (seed, i), so a longer run extends a shorter one."""
    short = harness.simulate(small_cfg(reps=2))["sessions"]
    long = harness.simulate(small_cfg(reps=4))["sessions"]
    assert long[:2] == short


def test_totals_equal_sum_of_sessions():
    cfg = small_cfg(attack="first_qubit_depolarize", attack_p=0.4, loss=0.1)
    report = harness.simulate(cfg)
    total = protocol.SessionStats()
    for i in range(cfg.reps):
        msg_rng, rng = harness.session_streams(cfg.seed, i)
        message = [qcore.CODES[k] for k in msg_rng.integers(4, size=cfg.rounds)]
        total = total + protocol.run_session(cfg.session_config(cfg.seed), cfg.make_attack(), message, rng)
    assert report["totals"]["coincidences"] == total.coincidences
    assert report["totals"]["rounds_attempted"] == total.rounds_attempted
    assert report["totals"]["losses"] == total.losses


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_report_round_trip(fmt, tmp_path, capsys):
    path = tmp_path / f"r.{fmt}"
    code, _, _ = run_cli(capsys, "simulate", "--seed", "9", "--rounds", "80", "--reps", "2",
                         "--attack", "second_qubit_measure", "--attack-basis", "Bx",
                         "--format", fmt, "--out", str(path))
    assert code == 0
    parsed = read_report(str(path))
    cfg = small_cfg(seed=9, rounds=80, reps=2, attack="second_qubit_measure", attack_basis="Bx", abort_threshold=1)
    assert parsed == json.loads(json.dumps(harness.simulate(cfg)))


def test_stdout_output(capsys):
    code, out, _ = run_cli(capsys, "simulate", "--seed", "2", "--rounds", "30")
    assert code == 0
    assert json.loads(out)["provenance"]["seed"] == 2


def test_config_file_and_flags_give_same_report(tmp_path, capsys):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"seed": 4, "rounds": 40, "receipt": "off", "attack": "delay_loss_hiding"}))
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    run_cli(capsys, "simulate", "--config", str(cfg_path), "--out", str(out1))
    run_cli(capsys, "simulate", "--seed", "4", "--rounds", "40", "--receipt", "off",
            "--attack", "delay_loss_hiding", "--out", str(out2))
    assert out1.read_bytes() == out2.read_bytes()


def test_message_length_decouples_from_rounds():
    report = harness.simulate(small_cfg(attack="none", rounds=200, message_length=10, reps=1, abort_threshold=1))
    assert report["totals"]["codes_sent"] == 10


def test_session_streams_independent():
    a, b = harness.session_streams(1, 0)
    c, d = harness.session_streams(1, 1)
    draws = [g.integers(2**62) for g in (a, b, c, d)]
    assert len(set(draws)) == 4
    assert harness.session_streams(1, 0)[1].integers(2**62) == draws[1]


def test_sig_rounding():
    assert harness._sig(float("nan")) is None
    assert harness._sig(np.float64(1 / 3)) == 0.333333333
    assert harness._sig(np.int64(3)) == 3
    assert harness._sig(True) is True
