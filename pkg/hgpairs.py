#!/usr/bin/env python3
"""
hgpairs - cavity-enhanced HG-mode photon-pair simulator and analysis toolchain
Command-line entry point
"""

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import click

from config.scenario import ORIENTATIONS, ScenarioConfig
from config.settings import (
    CONFIG_DIR,
    DEFAULT_BIN_NS,
    DEFAULT_GRID_SAMPLES,
    DEFAULT_OPTICAL_PATH_MM,
    DEFAULT_PDH_MODULATION_MHZ,
    DEFAULT_RANGE_NS,
    DEFAULT_WAIST_MM,
    LOG_FILE,
    LOG_FORMAT,
    LOG_LEVEL,
    N_JOBS,
    OUTPUT_DIR,
)
from storage.results_manager import ResultsManager
from storage.timetag_store import TimeTagStore
from utils.cavity import (
    CavityParams,
    derive_report,
    longitudinal_mode_count,
    pdh_lock_points,
    pdh_scan,
    pdh_zero_crossings,
)
from utils.correlator import analyze, histogram, normalize
from utils.errors import HGPairsError, TimeTagFormatError
from utils.event_sim import IDLER_CHANNEL, SIGNAL_CHANNEL, generate
from utils.scenario_runner import (
    HISTOGRAM_FILE,
    REPORT_FILE,
    build_source,
    estimate_summary,
    model_curve,
    modes_render,
    run_scenario,
)

logger = logging.getLogger(__name__)


def setup_logging():
    """Root logger to stderr, plus LOG_FILE when set"""
    handlers = [logging.StreamHandler(sys.stderr)]
    if LOG_FILE:
        handlers.append(logging.FileHandler(LOG_FILE))
    logging.basicConfig(format=LOG_FORMAT, level=LOG_LEVEL, handlers=handlers)


def echo_json(payload):
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


class HGPairsGroup(click.Group):
    """Turns HGPairsError into a one-line message and exit status 2"""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except HGPairsError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(2)


def _load(config_path: Optional[str]) -> Optional[ScenarioConfig]:
    return ScenarioConfig.find(config_path) if config_path else None


@click.group(cls=HGPairsGroup)
def cli():
    """Cavity-enhanced HG-mode photon-pair simulator."""


@cli.group(cls=HGPairsGroup)
def cavity():
    """Resonator quantities and the PDH error signal."""


@cavity.command('report')
@click.option('--config', 'config_path', help='Scenario file or name')
@click.option('--phase-matching-ghz', type=float, help='Phase-matching FWHM for the mode count')
@click.option('--out', type=click.Path(dir_okay=False), help='Also write the report JSON here')
def cavity_report(config_path, phase_matching_ghz, out):
    """Round trip, FSR, finesse and linewidth."""
    config = _load(config_path)
    params = config.cavity_params() if config else CavityParams(optical_path_length_mm=DEFAULT_OPTICAL_PATH_MM)
    report = derive_report(params)
    payload = report.to_dict()
    if phase_matching_ghz is None and config:
        phase_matching_ghz = config['cavity']['phase_matching_bandwidth_ghz']
    if phase_matching_ghz:
        payload['mode_count'] = longitudinal_mode_count(phase_matching_ghz, report.fsr_ghz)
    echo_json(payload)
    if out:
        ResultsManager(Path(out).parent).write_json(Path(out).name, payload)


@cavity.command('pdh')
@click.option('--config', 'config_path', help='Scenario file or name')
@click.option('--modulation-mhz', type=float, default=None, help='Phase modulation frequency')
@click.option('--span-mhz', type=float, default=None, help='Half span of the scan (default FSR/4)')
@click.option('--points', type=int, default=4001, show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), default='pdh.csv', show_default=True)
def cavity_pdh(config_path, modulation_mhz, span_mhz, points, out):
    """Sampled PDH error signal as CSV (detuning_mhz, error_signal).

    Prints every zero crossing of the scan and, separately, the lock points:
    the crossings with the slope of the resonance crossing. The sideband
    crossings near +/-fm have the opposite slope and are left out of the
    lock points.
    """
    config = _load(config_path)
    params = config.cavity_params() if config else CavityParams(optical_path_length_mm=DEFAULT_OPTICAL_PATH_MM)
    if modulation_mhz is None:
        modulation_mhz = config['cavity']['pdh_modulation_mhz'] if config else DEFAULT_PDH_MODULATION_MHZ
    span = span_mhz or derive_report(params).fsr_ghz * 1e3 / 4.0
    detuning, signal = pdh_scan(params, modulation_mhz, span, points)
    ResultsManager(Path(out).parent).write_table(Path(out).name, {'detuning_mhz': detuning, 'error_signal': signal})
    locks = pdh_lock_points(params, modulation_mhz, span)
    crossings = pdh_zero_crossings(params, modulation_mhz, span)
    echo_json({
        'lock_points_mhz': [float(f) for f in locks],
        'zero_crossings_mhz': [float(f) for f in crossings],
        'modulation_mhz': modulation_mhz,
        'span_mhz': span,
    })


@cli.group(cls=HGPairsGroup)
def modes():
    """Transverse mode images."""


@modes.command('render')
@click.option('--family', type=click.Choice(['superposition', 'LG', 'HG']), default='superposition', show_default=True)
@click.option('--l', 'l_index', type=int, default=1, show_default=True, help='LG azimuthal index')
@click.option('--m', 'm_index', type=int, default=1, show_default=True, help='HG x index')
@click.option('--n', 'n_index', type=int, default=0, show_default=True, help='HG y index')
@click.option('--orientation', type=click.Choice(sorted(ORIENTATIONS)), default=None)
@click.option('--theta-rel', type=float, default=None, help='Relative LG phase (rad); overrides --orientation')
@click.option('--waist-mm', type=float, default=DEFAULT_WAIST_MM, show_default=True)
@click.option('--samples', type=int, default=DEFAULT_GRID_SAMPLES, show_default=True)
@click.option('--out-dir', type=click.Path(file_okay=False), default=OUTPUT_DIR, show_default=True)
def modes_render_cmd(family, l_index, m_index, n_index, orientation, theta_rel, waist_mm, samples, out_dir):
    """Intensity map as PGM + CSV with the principal axis in a JSON summary."""
    if theta_rel is None:
        theta_rel = ORIENTATIONS[orientation or 'diagonal']
    summary = modes_render(family, out_dir, theta_rel=theta_rel, l=l_index, m=m_index, n=n_index,
                           waist_mm=waist_mm, samples=samples)
    echo_json(summary)


@cli.command()
@click.option('--config', 'config_path', required=True, help='Scenario file or name')
@click.option('--out-dir', type=click.Path(file_okay=False), default=OUTPUT_DIR, show_default=True)
@click.option('--merged/--per-channel', default=True, show_default=True)
@click.option('--csv', 'export_csv', is_flag=True, help='Also export channel,timestamp_ps CSV')
@click.option('--n-jobs', type=int, default=N_JOBS, show_default=True)
def simulate(config_path, out_dir, merged, export_csv, n_jobs):
    """Generate signal/idler time-tag files for a scenario."""
    config = _load(config_path)
    source = build_source(config)
    signal, idler = generate(source, config.detector_configs(), config.chopper_config(),
                             config['scenario']['duration_s'], n_jobs=n_jobs, progress=True)
    store = TimeTagStore(out_dir)
    metadata = {'scenario': config.name, 'seed': config.seed, 'pair_rate_per_s': source.pair_rate_per_s}
    if merged:
        files = [store.write('tags.ttag', [signal, idler], metadata)]
    else:
        files = [store.write(f"{s.label}.ttag", [s], metadata) for s in (signal, idler)]
    if export_csv:
        for path in files:
            store.export_csv(path, path.with_suffix('.csv').name)
    echo_json({'files': [str(p) for p in files], 'signal_count': len(signal), 'idler_count': len(idler)})


@cli.command()
@click.argument('tagfile', type=click.Path(exists=True, dir_okay=False))
@click.argument('idlerfile', required=False, type=click.Path(exists=True, dir_okay=False))
@click.option('--bin-ns', type=float, default=DEFAULT_BIN_NS, show_default=True)
@click.option('--range-ns', type=float, default=DEFAULT_RANGE_NS, show_default=True)
@click.option('--live-time-s', type=float, default=None, help='Override the normalization duration')
@click.option('--out-dir', type=click.Path(file_okay=False), default=OUTPUT_DIR, show_default=True)
@click.option('--n-jobs', type=int, default=N_JOBS, show_default=True)
def correlate(tagfile, idlerfile, bin_ns, range_ns, live_time_s, out_dir, n_jobs):
    """Histogram, normalize and fit g2 from time-tag files."""
    store = TimeTagStore('.')
    if idlerfile:
        signal = next(iter(store.read(tagfile).values()), None)
        idler = next(iter(store.read(idlerfile).values()), None)
    else:
        streams = store.read(tagfile)
        signal, idler = streams.get(SIGNAL_CHANNEL), streams.get(IDLER_CHANNEL)
    if signal is None or idler is None:
        raise TimeTagFormatError("Need one signal and one idler channel")
    if live_time_s:
        signal = replace(signal, live_time_s=live_time_s)
        idler = replace(idler, live_time_s=live_time_s)

    hist = histogram(signal, idler, bin_ns, range_ns, n_jobs=n_jobs)
    estimate = normalize(hist)
    results = ResultsManager(out_dir)
    results.write_histogram(HISTOGRAM_FILE, estimate, hist.counts)
    estimate = analyze(estimate)
    summary = estimate_summary(hist, estimate)
    results.write_json(REPORT_FILE, summary)
    echo_json(summary)


@cli.group(cls=HGPairsGroup)
def analyze_group():
    """Analytic model curves."""


cli.add_command(analyze_group, name='analyze')


@analyze_group.command('model')
@click.option('--config', 'config_path', default='fig2a', show_default=True, help='Scenario file or name')
@click.option('--blur/--no-blur', default=True, show_default=True)
@click.option('--span-ns', type=float, default=None, help='Half span (default: scenario range)')
@click.option('--out', type=click.Path(dir_okay=False), default='model.csv', show_default=True)
def analyze_model(config_path, blur, span_ns, out):
    """Calibrated g2 model curve (tau_ns, g2) for a scenario."""
    config = _load(config_path)
    curve = model_curve(config, blurred=blur, span_ns=span_ns)
    path = ResultsManager(Path(out).parent).write_curve(Path(out).name, curve.tau_ns, curve.g2)
    echo_json({'file': str(path), 'points_count': int(curve.tau_ns.size), 'step_ns': curve.step_ns})


@cli.command()
@click.argument('scenario')
@click.option('--out-dir', type=click.Path(file_okay=False), default=None, help='Default: <output_dir>/<name>')
@click.option('--n-jobs', type=int, default=N_JOBS, show_default=True)
@click.pass_context
def reproduce(ctx, scenario, out_dir, n_jobs):
    """Run a shipped scenario end to end; exit 1 if any target fails."""
    config = ScenarioConfig.find(scenario, CONFIG_DIR)
    report = run_scenario(config, out_dir=out_dir, n_jobs=n_jobs, progress=True)
    failed = sorted(name for name, check in report['targets'].items() if not check['passed'])
    click.echo(f"{config.name}: {'PASS' if not failed else 'FAIL ' + ', '.join(failed)}")
    if failed:
        ctx.exit(1)


def main():
    """Main function to set up logging and dispatch the command line"""
    setup_logging()
    cli()


if __name__ == "__main__":
    main()
