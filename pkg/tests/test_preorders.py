import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pid.channels import Channel, compose, join_meet
from pid.errors import AlphabetMismatchError, InvalidChannelError
from pid.builtin_systems import K3_NOT_LN_K4_PAIR, K4_NOT_LN_K3_PAIR
from pid.preorders import (ChainStep, LessNoisyCounterexample, VerdictStatus, check_degradation, check_ds_bounded,
                           check_kolchinsky_axioms, check_less_noisy_sampled, check_more_capable_sampled,
                           check_relation, check_supermodular_reachable, describe_verdict, less_noisy_margin,
                           more_capable_margin)
from pid.probcore import Alphabet

from conftest import random_channel


def test_degradation_holds_for_garbling(k1):
    U = Channel(k1.output_alphabet, Alphabet.of_size(3), [[0.2, 0.3, 0.5], [0.6, 0.4, 0.0]])
    W = compose(k1, U)
    verdict = check_degradation(W, k1)
    assert verdict.holds
    np.testing.assert_allclose(k1.rows @ verdict.witness.rows, W.rows, atol=1e-7)


def test_degradation_reflexive_and_constant(k1):
    assert check_degradation(k1, k1).holds
    assert check_degradation(Channel.constant(k1.input_alphabet), k1).holds


def test_identity_is_not_a_garbling_of_constant(k1):
    verdict = check_degradation(Channel.identity(k1.input_alphabet), Channel.constant(k1.input_alphabet))
    assert verdict.falsified
    assert verdict.counterexample > 0.1


def test_korner_channels_are_not_degraded(k1, k2):
    verdict = check_degradation(k2, k1)
    assert verdict.status is VerdictStatus.FALSIFIED
    assert verdict.budget_info['residual'] > 1e-7


def test_k4_is_not_a_garbling_of_k3(k3, k4):
    assert check_degradation(k4, k3).falsified


def test_degradation_rejects_different_inputs(k1, k3):
    with pytest.raises(AlphabetMismatchError):
        check_degradation(k1, k3)


def test_less_noisy_separating_pairs(k3, k4):
    # K4 ⪯_ln K3 fails: V = K4, W = K3
    verdict = check_less_noisy_sampled(k3, k4, pairs=[K4_NOT_LN_K3_PAIR])
    assert verdict.falsified
    ce = verdict.counterexample
    assert isinstance(ce, LessNoisyCounterexample)
    assert ce.chi_w == pytest.approx(0.0, abs=1e-12)
    assert ce.chi_v == pytest.approx(0.0416667, abs=1e-6)
    # K3 ⪯_ln K4 fails: V = K3, W = K4
    verdict = check_less_noisy_sampled(k4, k3, pairs=[K3_NOT_LN_K4_PAIR])
    assert verdict.falsified
    assert verdict.counterexample.chi_w == pytest.approx(0.8182, abs=1e-4)
    assert verdict.counterexample.chi_v == pytest.approx(1.2222, abs=1e-4)


def test_less_noisy_counterexample_reproduces(k3, k4):
    verdict = check_less_noisy_sampled(k4, k3)
    assert verdict.falsified
    ce = verdict.counterexample
    chi_w, chi_v = less_noisy_margin(k4, k3, ce.p, ce.q)
    assert chi_v > chi_w


def test_korner_k2_never_falsified_less_noisy_below_k1(k1, k2):
    assert check_less_noisy_sampled(k1, k2, grid_resolution=20).unknown
    assert check_relation(k1, k2, 'ln').falsified


def test_more_capable(k3, k4):
    assert check_more_capable_sampled(k3, k4).falsified
    assert check_more_capable_sampled(k4, k3).status is VerdictStatus.UNKNOWN
    identity = Channel.identity(k3.input_alphabet)
    verdict = check_more_capable_sampled(identity, Channel.constant(k3.input_alphabet))
    assert verdict.falsified
    info_w, info_v = more_capable_margin(identity, Channel.constant(k3.input_alphabet), verdict.counterexample.p)
    assert info_w > info_v


def test_sampled_checkers_never_hold(k1):
    assert check_less_noisy_sampled(k1, k1).unknown
    assert check_more_capable_sampled(k1, k1).unknown


def test_supermodular_single_join_meet(k3, k4):
    verdict = check_supermodular_reachable(k4, k3, max_ops=1)
    assert verdict.holds
    assert verdict.witness == [(0, 1)]
    assert "⋄(1,2)" in describe_verdict(verdict)


def test_supermodular_identity_and_exhaustion(k3, k4):
    assert check_supermodular_reachable(k3, k3).witness == []
    verdict = check_supermodular_reachable(k3, k4)
    assert verdict.unknown
    assert verdict.budget_info['exhausted']


def test_supermodular_needs_equal_shapes(k3):
    with pytest.raises(InvalidChannelError):
        check_supermodular_reachable(Channel.constant(k3.input_alphabet), k3)


def test_ds_chain_for_k4_below_k3(k3, k4):
    verdict = check_ds_bounded(k4, k3)
    assert verdict.holds
    step = verdict.witness[0]
    assert isinstance(step, ChainStep)
    assert step.describe() == "⋄(1,2)"
    assert step.channel.allclose(k4)


def test_ds_single_degradation_step(k1):
    U = Channel(k1.output_alphabet, k1.output_alphabet, [[0.9, 0.1], [0.3, 0.7]])
    verdict = check_ds_bounded(compose(k1, U), k1)
    assert verdict.holds
    assert [step.relation for step in verdict.witness] == ['d']


def test_ds_never_falsifies(k3):
    verdict = check_ds_bounded(Channel.identity(k3.input_alphabet), Channel.constant(k3.input_alphabet))
    assert verdict.unknown


def test_check_relation_orientation(k3, k4):
    assert check_relation(k4, k3, 'ds').holds
    assert check_relation(k4, k3, 's').holds
    assert check_relation(k4, k3, 'd').falsified
    assert check_relation(k4, k3, 'mc').unknown
    assert check_relation(k3, k4, 'mc').falsified
    with pytest.raises(ValueError):
        check_relation(k3, k4, 'xx')


def test_kolchinsky_axioms_hold_on_and_gate(and_gate):
    for relation in ('d', 'mc'):
        report = check_kolchinsky_axioms(and_gate, relation)
        assert not any(v.falsified for verdicts in report.values() for v in verdicts)
    assert all(v.holds for v in check_kolchinsky_axioms(and_gate, 'd')['below_joint'])


@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=25, deadline=None)
def test_random_garbling_is_recognized(seed):
    rng = np.random.default_rng(seed)
    n_in, n_mid, n_out = rng.integers(2, 4, size=3)
    V = random_channel(rng, n_in, n_mid)
    U = Channel(V.output_alphabet, Alphabet.of_size(n_out), rng.dirichlet(np.ones(n_out), size=n_mid))
    W = compose(V, U)
    verdict = check_degradation(W, V)
    assert verdict.holds
    assert not check_more_capable_sampled(W, V, grid_resolution=5).falsified
    assert not check_less_noisy_sampled(V, W, grid_resolution=4).falsified


@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=15, deadline=None)
def test_ds_certificates_imply_more_capable(seed):
    rng = np.random.default_rng(seed)
    V = random_channel(rng, 3, 3)
    W = join_meet(V, *rng.choice(3, size=2, replace=False))
    assert check_ds_bounded(W, V, depth=1).holds
    assert not check_more_capable_sampled(W, V, grid_resolution=6).falsified


def test_sampled_checks_stay_within_the_grid_budget(caplog):
    identity = Channel.identity(Alphabet.of_size(8))
    constant = Channel.constant(Alphabet.of_size(8))
    ln = check_less_noisy_sampled(identity, constant)
    assert ln.unknown
    assert ln.budget_info['grid_resolution'] == 3
    assert ln.budget_info['requested_resolution'] == 10
    assert ln.budget_info['pairs_checked'] == 120 ** 2
    mc = check_more_capable_sampled(constant, identity)
    assert mc.unknown
    assert mc.budget_info['grid_resolution'] == 6
    assert mc.budget_info['points_checked'] == 1716
    assert "lowered" in caplog.text
    assert check_more_capable_sampled(identity, constant).falsified
