import math

import pytest

from config.scenario import ORIENTATIONS, ScenarioConfig
from utils.errors import ScenarioError

from .conftest import QUICK_SCENARIO, SCENARIO_DIR


@pytest.mark.parametrize('name', ['fig2a', 'fig2b'])
def test_shipped_scenarios_round_trip(name):
    config = ScenarioConfig.find(name, SCENARIO_DIR)
    assert config.name == name
    again = ScenarioConfig.from_string(config.serialize())
    assert again == config


def test_shipped_scenarios_differ_in_orientation():
    a = ScenarioConfig.find('fig2a', SCENARIO_DIR)
    b = ScenarioConfig.find('fig2b', SCENARIO_DIR)
    assert a.theta_rel == pytest.approx(math.pi / 2)
    assert b.theta_rel == 0.0
    assert a['biphoton']['bandwidth_mhz'] < b['biphoton']['bandwidth_mhz']


def test_auto_values_are_none(quick_scenario):
    assert quick_scenario['biphoton']['contrast'] is None
    assert quick_scenario['source']['pair_rate_per_s'] is None
    assert quick_scenario['biphoton']['mode_count'] == 1
    assert 'auto' in quick_scenario.serialize()


def test_defaults_fill_missing_sections(quick_scenario):
    assert quick_scenario['correlator'] == {'bin_ns': 0.8, 'range_ns': 100.0}
    assert quick_scenario['chopper']['duty'] == 0.5
    assert quick_scenario['targets']['nonclassical'] is True


def test_skeleton_takes_round_trip_from_cavity(quick_scenario):
    from utils.cavity import derive_report

    report = derive_report(quick_scenario.cavity_params())
    skeleton = quick_scenario.biphoton_skeleton(report)
    assert skeleton.round_trip_ns == pytest.approx(report.round_trip_time_ns)
    assert skeleton.contrast == 1.0
    assert quick_scenario.combined_jitter_ps() == pytest.approx(400.0 * math.sqrt(2))


@pytest.mark.parametrize('old, new', [
    ('seed = 7', 'seed = 7\ncolour = blue'),
    ('[spatial]', '[lasers]\npower = 1\n\n[spatial]'),
    ('efficiency_s = 0.01\n', ''),
    ('orientation = horizontal', 'orientation = vertical'),
    ('seed = 7', 'seed = seven'),
    ('residual_loss = 0.074', 'residual_loss = 1.5'),
    ('efficiency_i = 0.01', 'efficiency_i = 1.5'),
    ('target_g2_0 = 5.7', 'target_g2_0 = 0.9'),
    ('grid_samples = 65', 'grid_samples = 64'),
    ('model_chi2_per_dof_min = 0.5', 'model_chi2_per_dof_min = 3.0'),
])
def test_bad_scenarios_rejected(old, new):
    assert old in QUICK_SCENARIO
    with pytest.raises(ScenarioError):
        ScenarioConfig.from_string(QUICK_SCENARIO.replace(old, new))


def test_section_named_in_wrapped_errors():
    with pytest.raises(ScenarioError, match=r'\[cavity\]'):
        ScenarioConfig.from_string(QUICK_SCENARIO.replace('residual_loss = 0.074', 'residual_loss = 1.5'))


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ScenarioError):
        ScenarioConfig.load(tmp_path / 'absent.ini')


def test_orientation_labels():
    assert ORIENTATIONS == {'horizontal': 0.0, 'diagonal': math.pi / 2}


def test_shipped_scenarios_bound_model_chi2():
    for name in ('fig2a', 'fig2b'):
        targets = ScenarioConfig.find(name, SCENARIO_DIR)['targets']
        assert (targets['model_chi2_per_dof_min'], targets['model_chi2_per_dof_max']) == (0.7, 1.3)
        assert targets['pair_rate_tolerance_fraction'] == 0.1


def fake_report(chi2_per_dof, recovered_rate):
    return {
        'fit_bandwidth_mhz': 20.8,
        'fit_fwhm_ns': 10.6,
        'g2_0_dimensionless': 5.7,
        'g2_0_err_dimensionless': 0.2,
        'brightness_per_s_mhz_mw': 4.4,
        'model_chi2_per_dof_dimensionless': chi2_per_dof,
        'generated_pair_rate_per_s': 1.0e7,
        'simulated_corrected_pair_rate_per_s': recovered_rate,
        'nonclassical': True,
    }


@pytest.mark.parametrize('chi2_per_dof, passed', [(1.0, True), (0.55, True), (1.95, True), (2.5, False), (0.3, False)])
def test_model_chi2_window(quick_scenario, chi2_per_dof, passed):
    from utils.scenario_runner import evaluate_targets

    checks = evaluate_targets(quick_scenario, fake_report(chi2_per_dof, 1.0e7))
    assert checks['model_chi2_per_dof_dimensionless']['passed'] is passed


@pytest.mark.parametrize('recovered, passed', [(1.0e7, True), (0.6e7, True), (0.4e7, False), (1.6e7, False)])
def test_recovered_pair_rate_is_checked_against_generated(quick_scenario, recovered, passed):
    from utils.scenario_runner import evaluate_targets

    checks = evaluate_targets(quick_scenario, fake_report(1.0, recovered))
    assert checks['corrected_pair_rate_per_s']['passed'] is passed
    assert checks['corrected_pair_rate_per_s']['target'] == 1.0e7
