import numpy as np
import pytest

from pid.builtin_systems import JOINMEET_K4, and_system, copy_source_table, copy_target_example, unq_system
from pid.channels import Channel
from pid.errors import MeasureMismatchError, UnknownNameError
from pid.measures import (CHAIN_ORDER, MeasureKind, check_wb_axioms, common_variable_channel, copy_target_measures,
                          copy_target_system, decompose, gk_common_variable, identity_property_report, ii_measure,
                          measure_chain, pid_decompose, random_copy_source_joint, random_system,
                          specific_information_domination)
from pid.optimize import OptimizerConfig
from pid.probcore import EPS_I, Alphabet, Dist, JointTable, joint_to_system, mutual_information, system_from_channels


def test_gk_common_variable_examples():
    assert gk_common_variable(copy_source_table()).entropy == pytest.approx(0.0)
    assert gk_common_variable(copy_source_table([[0.5, 0.0], [0.0, 0.5]])).entropy == pytest.approx(1.0)
    blocks = JointTable((Alphabet.of_size(2), Alphabet.of_size(3)), np.array([[1, 1, 0], [0, 0, 1]]) / 3)
    common = gk_common_variable(blocks)
    assert common.entropy == pytest.approx(0.9183, abs=1e-4)
    assert common.labeling[(0, 0)] == common.labeling[(0, 1)] == 0
    assert common.labeling[(1, 2)] == 1


def test_common_variable_channel_of_unq_is_constant():
    channel = common_variable_channel(unq_system())
    assert channel.shape == (2, 1)


def test_unknown_measure_name(and_gate):
    with pytest.raises(UnknownNameError):
        ii_measure(and_gate, 'xyz')
    assert ii_measure(and_gate, '◁').value == pytest.approx(0.0)


@pytest.mark.parametrize('kind', ['d', 'ln', 'mc', 'ds', 'mmi'])
def test_and_gate_redundancy(and_gate, fast_config, kind):
    result = ii_measure(and_gate, kind, fast_config)
    assert result.value == pytest.approx(0.311, abs=1e-3)
    assert result.argmax is not None


def test_decomposition_identity(and_gate, fast_config):
    for kind in ('gh', 'd', 'mmi'):
        dec = pid_decompose(and_gate, kind, fast_config)
        assert dec.redundancy + sum(dec.unique) + dec.synergy == pytest.approx(dec.total, abs=1e-9)
        for info, unique in zip(dec.informations, dec.unique):
            assert unique == pytest.approx(info - dec.redundancy, abs=1e-12)


def test_unq_decomposition(fast_config):
    dec = pid_decompose(unq_system(), 'mmi', fast_config)
    assert dec.redundancy == pytest.approx(0.0, abs=EPS_I)
    assert dec.unique[0] == pytest.approx(1.0, abs=EPS_I)
    assert dec.unique[1] == pytest.approx(0.0, abs=EPS_I)
    assert dec.synergy == pytest.approx(0.0, abs=EPS_I)


def test_pid_decompose_needs_two_sources(and_gate):
    with pytest.raises(ValueError):
        pid_decompose(and_gate.with_sources([0]), 'mmi')
    dec = decompose(and_gate.with_sources([0, 1, 0]), 'mmi')
    assert dec.unique is None and dec.synergy is None
    assert dec.redundancy == pytest.approx(0.311, abs=1e-3)


def test_measures_ignore_source_coupling(fast_config):
    """Same p(t) and channels, different joint law of the sources."""
    K = Channel.from_rows([[0.5, 0.5], [1.0, 0.0]])
    p_t = Dist.from_probs([0.5, 0.5])
    independent = system_from_channels(p_t, [K, K])
    probs = np.zeros((2, 2, 2))
    probs[0, 0, 0] = probs[0, 1, 1] = 0.25
    probs[1, 0, 0] = 0.5
    coupled = joint_to_system(JointTable((Alphabet.of_size(2),) * 3, probs))
    for kind in ('d', 'ln', 'mc', 'mmi'):
        assert ii_measure(independent, kind, fast_config).value == ii_measure(coupled, kind, fast_config).value
    assert ii_measure(independent, 'gh').value == pytest.approx(0.0)
    assert ii_measure(coupled, 'gh').value > 0.1


@pytest.mark.parametrize('system_name', ['and_gate', 'cex1', 'cex2'])
def test_measure_chain_is_ordered(request, fast_config, system_name):
    system = request.getfixturevalue(system_name)
    chain = measure_chain(system, fast_config)
    assert list(chain) == list(CHAIN_ORDER)
    values = [chain[kind].value for kind in (MeasureKind.GH, MeasureKind.D, MeasureKind.LN, MeasureKind.MC,
                                              MeasureKind.MMI)]
    assert all(a <= b + EPS_I for a, b in zip(values, values[1:]))
    assert chain[MeasureKind.D].value <= chain[MeasureKind.DS].value + EPS_I
    assert chain[MeasureKind.DS].value <= chain[MeasureKind.MC].value + EPS_I
    assert chain[MeasureKind.LN].flag == 'upper_bound'
    assert chain[MeasureKind.DS].flag == 'lower_bound'


def _ordered(values, tol):
    return all(a <= b + tol for a, b in zip(values, values[1:]))


@pytest.mark.slow
def test_measure_chain_on_hundred_random_systems():
    rng = np.random.default_rng(2025)
    config = OptimizerConfig()
    for index in range(100):
        chain = measure_chain(random_system(rng), config)
        values = [chain[kind].value for kind in (MeasureKind.GH, MeasureKind.D, MeasureKind.LN, MeasureKind.MC,
                                                  MeasureKind.MMI)]
        assert _ordered(values, 1e-3), (index, values)


def test_standalone_measures_are_ordered(fast_config):
    rng = np.random.default_rng(1)
    for _ in range(6):
        system = random_system(rng)
        values = [ii_measure(system, kind, fast_config).value for kind in ('gh', 'd', 'ln', 'mc', 'mmi')]
        assert _ordered(values, EPS_I), values


@pytest.mark.slow
def test_standalone_measures_are_ordered_on_forty_systems():
    rng = np.random.default_rng(1)
    config = OptimizerConfig()
    for index in range(40):
        system = random_system(rng)
        values = [decompose(system, kind, config).redundancy for kind in ('gh', 'd', 'ln', 'mc', 'mmi')]
        assert _ordered(values, EPS_I), (index, values)


def test_standalone_value_matches_the_chain(cex1, fast_config):
    chain = measure_chain(cex1, fast_config)
    for kind in (MeasureKind.D, MeasureKind.LN, MeasureKind.MC):
        assert ii_measure(cex1, kind, fast_config).value == chain[kind].value


def test_degradation_is_at_least_common_information_on_coupled_sources(fast_config):
    probs = np.zeros((2, 3, 3))
    probs[0, 0, 0] = probs[0, 1, 1] = 0.2
    probs[1, 2, 2] = 0.3
    probs[1, 0, 1] = 0.3
    system = joint_to_system(JointTable((Alphabet.of_size(2), Alphabet.of_size(3), Alphabet.of_size(3)), probs))
    gh = ii_measure(system, 'gh').value
    assert gh > 0.1
    assert ii_measure(system, 'd', fast_config).value >= gh - EPS_I


def test_sampled_measures_report_the_resolution_used():
    system = copy_target_example()
    config = OptimizerConfig(num_starts=1, max_iters=20)
    ln = decompose(system, 'ln', config)
    assert ln.details['grid_resolution'] == 9
    assert ln.details['mc_grid_resolution'] == 10
    assert decompose(system, 'mc', config).details['grid_resolution'] == 10


def test_ds_uses_join_meet_certificate(cex2, fast_config):
    result = ii_measure(cex2, 'ds', fast_config)
    assert result.value == pytest.approx(0.322, abs=5e-4)
    assert result.details['ds_below_all'] == [1]


@pytest.mark.parametrize('kind', ['mmi', 'gh'])
def test_wb_axioms_exact_measures(kind):
    report = check_wb_axioms(kind, trials=100, tol=1e-9)
    assert report.ok, report.violations


def test_wb_axioms_degradation(fast_config):
    assert check_wb_axioms('d', trials=30, tol=1e-3, config=fast_config).ok


@pytest.mark.slow
@pytest.mark.parametrize('kind', ['d', 'ln', 'mc', 'ds'])
def test_wb_axioms_hundred_systems(kind, fast_config):
    report = check_wb_axioms(kind, trials=100, tol=1e-3, config=fast_config)
    assert report.ok, report.violations


def test_wb_axioms_custom_generator():
    report = check_wb_axioms('mmi', generator=lambda rng: unq_system(), trials=3)
    assert report.ok and report.trials == 3
    with pytest.raises(ValueError):
        check_wb_axioms('mmi', trials=0)


def test_copy_target_system_layout():
    system = copy_target_system(copy_source_table([[0.5, 0.0], [0.25, 0.25]]))
    assert system.target_alphabet.labels == ('0,0', '1,0', '1,1')
    assert system.names == ('T', 'Y1', 'Y2')
    for k in system.channels:
        assert set(np.unique(k.rows)) <= {0.0, 1.0}


@pytest.mark.parametrize('probs, expected', [
    ([[0.25, 0.25], [0.25, 0.25]], 0.0),
    ([[0.5, 0.0], [0.0, 0.5]], 1.0),
    ([[1 / 3, 1 / 3, 0.0], [0.0, 0.0, 1 / 3]], 0.9183),
])
def test_copy_target_mc_equals_common_information(fast_config, probs, expected):
    assert copy_target_measures(copy_source_table(probs), fast_config) == pytest.approx(expected, abs=1e-4)


@pytest.mark.slow
def test_copy_target_random_systems(fast_config):
    rng = np.random.default_rng(2024)
    for _ in range(20):
        copy_target_measures(random_copy_source_joint(rng), fast_config, tol=1e-2)


def test_copy_target_mismatch_is_raised(fast_config, monkeypatch):
    import pid.measures as measures
    monkeypatch.setattr(measures, 'ii_measure',
                        lambda *args, **kwargs: measures.MeasureResult(0.5, None, 'upper_bound'))
    with pytest.raises(MeasureMismatchError):
        copy_target_measures(copy_source_table(), fast_config)


def test_identity_property_fails_on_correlated_sources(fast_config):
    report = identity_property_report(copy_source_table([[0.4, 0.1], [0.1, 0.4]]), fast_config)
    assert report['mutual_information'] == pytest.approx(0.278, abs=1e-3)
    assert report['common_information'] == pytest.approx(0.0)
    assert report['mc'] == pytest.approx(0.0, abs=1e-3)
    assert not report['identity_property']


def test_specific_information_domination_failure(cex2):
    Q = Channel.from_rows(JOINMEET_K4)
    failures = specific_information_domination(cex2, Q)
    assert len(failures) == 1
    failure = failures[0]
    assert (failure.target, failure.source) == ('2', 0)
    assert failure.source_information == pytest.approx(0.0, abs=1e-12)
    assert failure.q_information == pytest.approx(0.322, abs=1e-3)


@pytest.mark.parametrize('factory', [and_system, unq_system])
def test_specific_information_domination_at_mc_argmax(factory, fast_config):
    system = factory()
    result = ii_measure(system, 'mc', fast_config)
    assert specific_information_domination(system, result.argmax) == []


def test_specific_information_domination_holds_for_sources(and_gate):
    informations = [mutual_information(and_gate.target_marginal, k) for k in and_gate.channels]
    weakest = and_gate.channels[int(np.argmin(informations))]
    assert specific_information_domination(and_gate, weakest) == []
