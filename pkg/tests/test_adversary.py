import math

import numpy as np
import pytest

from stepsplit import adversary, qcore
from stepsplit.adversary import (
    DelayLossHiding, EveState, FirstQubitDepolarize, InterceptResendBell, NoAttack,
    SecondQubitMeasure, SecondQubitUnitary, eve_decode_accuracy, make_attack,
)
from stepsplit.protocol import SessionConfig, run_session_detailed
from stepsplit.qcore import EncodingOp, MeasBasis


def session(attack, n=3000, seed=0, **cfg):
    rng = np.random.default_rng(seed)
    message = [qcore.CODES[i] for i in rng.integers(0, 4, size=n)]
    cfg.setdefault("abort_threshold", 0)
    return run_session_detailed(SessionConfig(rounds=n, **cfg), attack, message, rng)


def within_3sigma(value, p, n):
    return abs(value - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_make_attack_builds_each_strategy():
    assert isinstance(make_attack("none"), NoAttack)
    assert isinstance(make_attack("intercept_resend_bell"), InterceptResendBell)
    assert make_attack("second_qubit_measure", basis="Bx").basis is MeasBasis.Bx
    assert make_attack("second_qubit_unitary", op="U10").op is EncodingOp.U10
    assert make_attack("delay_loss_hiding", fraction=0.3).fraction == 0.3
    assert make_attack("first_qubit_depolarize", p=0.2).p == 0.2
    with pytest.raises(ValueError):
        make_attack("clone")


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        SecondQubitUnitary(EncodingOp.U00)
    with pytest.raises(ValueError):
        FirstQubitDepolarize(1.2)
    with pytest.raises(ValueError):
        DelayLossHiding(-0.1)


def test_no_attack_leaves_state_alone():
    res = session(NoAttack(), n=500)
    assert all(r.gamma == pytest.approx(0.0, abs=1e-12) for r in res.records)
    assert res.stats.eve_informed == 0


def test_intercept_resend_joint_state_and_rates():
    res = session(InterceptResendBell(), n=4000)
    assert all(abs(r.gamma - 0.75) <= 1e-12 for r in res.records)
    assert within_3sigma(res.stats.empirical_detection_rate, 0.5, res.stats.check_rounds)
    assert res.stats.eve_decode_accuracy == 1.0
    # Bob's decoding is uniformly random under this attack
    assert within_3sigma(res.stats.bob_decode_accuracy, 0.25, res.stats.bob_decoded)


@pytest.mark.parametrize("attack", [SecondQubitMeasure(MeasBasis.Bz), SecondQubitMeasure(MeasBasis.Bx),
                                    SecondQubitUnitary(EncodingOp.U01), SecondQubitUnitary(EncodingOp.U10),
                                    SecondQubitUnitary(EncodingOp.U11)])
def test_second_qubit_attacks_learn_nothing_and_go_undetected(attack):
    res = session(attack, n=3000)
    assert res.stats.coincidences == 0
    assert res.stats.eve_informed == 0
    assert within_3sigma(res.stats.eve_decode_accuracy, 0.25, res.stats.codes_sent)


@pytest.mark.parametrize("op", [EncodingOp.U01, EncodingOp.U10, EncodingOp.U11])
def test_second_qubit_unitary_shifts_every_decode(op):
    res = session(SecondQubitUnitary(op), n=500, check_probability=0.0)
    assert res.stats.bob_correct == 0
    for r in res.records:
        expected = (EncodingOp.from_code(r.sent_code).matrix @ op.matrix)
        # Bob decodes the code whose matrix equals the combined one up to phase
        got = EncodingOp.from_code(r.decoded_code).matrix
        assert abs(abs(np.vdot(got.ravel(), expected.ravel())) - 2) <= 1e-12


def test_second_qubit_measure_halves_bob_accuracy():
    res = session(SecondQubitMeasure(MeasBasis.Bz), n=4000, check_probability=0.0)
    assert within_3sigma(res.stats.bob_decode_accuracy, 0.5, res.stats.bob_decoded)


@pytest.mark.parametrize("p", [0.0, 0.3, 0.8])
def test_first_qubit_depolarize_detection(p):
    res = session(FirstQubitDepolarize(p), n=20000)
    assert all(abs(r.gamma - 3 * p / 4) <= 1e-12 for r in res.records)
    if p == 0.0:
        assert res.stats.coincidences == 0
    else:
        assert within_3sigma(res.stats.empirical_detection_rate, p / 2, res.stats.check_rounds)


def test_delay_loss_hiding_without_receipt():
    res = session(DelayLossHiding(), n=2000, receipt_enabled=False)
    assert res.stats.coincidences == 0
    converted = [r for r in res.records if r.outcome == "loss" and r.sent_code is not None]
    assert converted and all(r.eve_informed and r.eve_guess == r.sent_code for r in converted)
    # checks look clean because the first qubit is forwarded late
    assert res.stats.check_rounds > 0


def test_delay_loss_hiding_with_receipt_gains_nothing():
    res = session(DelayLossHiding(), n=2000, receipt_enabled=True)
    assert res.stats.eve_informed == 0
    assert res.stats.losses == res.stats.rounds_attempted
    assert res.stats.codes_sent == 0
    assert within_3sigma(res.stats.eve_accuracy_all_rounds, 0.25, res.stats.rounds_attempted)


def test_delay_loss_hiding_fraction():
    res = session(DelayLossHiding(0.25), n=4000, receipt_enabled=True)
    assert within_3sigma(res.stats.losses / res.stats.rounds_attempted, 0.25, res.stats.rounds_attempted)


def test_every_round_gets_a_guess():
    for attack in (NoAttack(), InterceptResendBell(), DelayLossHiding()):
        res = session(attack, n=200)
        assert set(res.eve.guesses) == {r.index for r in res.records}


def test_eve_decode_accuracy_helper():
    eve = EveState()
    eve.guess(0, "00", True)
    eve.guess(1, "11", False)
    codes = {0: "00", 1: "01", 2: "10"}
    assert eve_decode_accuracy(eve, codes) == pytest.approx((1 + 0 + 0.25) / 3)
    assert eve_decode_accuracy(eve, codes, rounds=[0]) == 1.0
    assert math.isnan(eve_decode_accuracy(eve, {}))
    assert eve.informed_rounds() == [0]


def test_describe_is_json_friendly():
    import json
    for name in adversary.ATTACKS:
        json.dumps(make_attack(name).describe())
