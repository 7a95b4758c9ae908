"""
    Experiment dispatch: one function per kind builds the tables, derived quantities,
    statistics and acceptance checks of a RunReport from a validated config.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from experiments.outputs import write_outputs
from physics.diffraction import (SlitGeometry, compute_pattern, fraunhofer_sum, gamma_schedule, visibility)
from physics.errors import (CollimatedOutput, DegenerateConjugate, DegenerateTriangle, InsufficientCounts, NoFringes,
                            PhaseMatchImpossible, QMirrorError, ValidationError)
from physics.geometry import (DetectorPlane, Mask, ThinLens, conjugate_triangle, locate_image, magnification,
                              paraxial_sqm_law, relative_area_residual, sqm_image_distance, thin_lens_image,
                              thin_lens_magnification)
from physics.kinematics import (Photon, check_coherence, conjugate_photon, conservation_residual, cross_convert,
                                split_pump)
from physics.wavemix import amplification_sweep, gain_threshold, threshold_length
from simulation.coincidence import (DetectorModel, ObjectPoint, focus_scan, peak_separation, run_direct_qm,
                                    run_ghost_diffraction, run_ghost_image, slit_geometry)
from simulation.sources import SourceModel
from utils.config_manager import ExperimentConfig, _closest
from utils.scheduling import linspace_triple
from utils.stats import bin_averaged_sinc_squared, fit_sinc_squared, flatness_test, max_poisson_deviation

CLOSURE_TOLERANCE = 1e-12
UNFOLDING_TOLERANCE = 1e-9  # m
FLAT_P_VALUE = 0.01
STRUCTURE_P_VALUE = 1e-6

# (law, where it is computed and which check verifies it)
EXPLANATIONS = {
    'phasematch': [
        ('energy:    w_p = w_s + w_i', 'kinematics.split_pump; check conservation'),
        ('momentum:  k_p = k_s + k_i  (emission angles from the law of cosines on |k_p|, |k_s|, |k_i|)',
         'kinematics.emission_angles; checks phase_matched, conservation'),
        ('coherence: v(w_p) >= v(w_f), i.e. Re n(w_p) <= Re n(w_f)', 'kinematics.check_coherence'),
        ('crossing:  p + conj(i) -> s,  conjugation (w, k, h) -> (-w, -k, -h)',
         'kinematics.cross_convert; statistic max_crossing_residual'),
    ],
    'twm': [
        ('dA/dz = i g C exp(i dk z),  dC/dz = -i g* A exp(-i dk z),  A = conj(E_pw)', 'wavemix.integrate_twm'),
        ('AF = E_c(L) / conj(E_pw(0)) = -2i g* sinh(b L / 2) / b * exp(-i dk L / 2),  b = sqrt(4 |g|^2 - dk^2)',
         'wavemix.amplification_factor; check ode_agreement'),
        ('gain threshold: |g| L > pi / 4', 'wavemix.gain_threshold'),
    ],
    'mirror': [
        ('radial law:    w_s / Z_s + w_i / Z_i = (w_p / R) cos(beta)',
         'geometry.sqm_image_distance; check trace_distance'),
        ('exit relation: w_s sin(b_ps) = w_i sin(b_pi)', 'geometry.snell_exit_angles'),
        ('magnification: M = -(Z_i w_s) / (Z_s w_i)', 'geometry.magnification; check trace_magnification'),
        ('paraxial form: (l_p/l_s)/Z_s + (l_p/l_i)/Z_i = 1/(f - d),  R = f - d',
         'geometry.paraxial_sqm_law; check paraxial_law'),
        ("areas:         Area(PAP') = Area(PAC) + Area(AP'C)",
         'geometry.verify_area_identity; check area_identity'),
    ],
    'diffract': [
        ('single slit: I(x2)/I(0) = [sin X / X]^2,  X = pi a x2 / (lambda z2)',
         'diffraction.single_slit_ratio; check fraunhofer_agreement'),
        ('double slit: envelope * (1 + gamma cos(2 pi d x2 / (lambda z2))) / (1 + gamma)',
         'diffraction.double_slit_pattern'),
        ('visibility:  (Imax - Imin) / (Imax + Imin)', 'diffraction.visibility; check visibility_follows_gamma'),
    ],
    'ghost-image': [
        ("thin lens:    1/S + 1/S' = 1/f,  M = -S'/S", 'geometry.thin_lens_image; checks peak_separation, focus'),
        ('coincidences image the mask through the unfolded path (crystal = mirror)',
         'coincidence.run_ghost_image; checks coincidence_structure, unfolding, closure'),
        ('singles stay flat on both detectors', 'checks singles_d1_flat, singles_flat'),
    ],
    'ghost-diffract': [
        ('coincidences follow [sin X / X]^2, X = pi a x2 / (lambda z2), z2 measured along the unfolded path',
         'coincidence.run_ghost_diffraction; checks fitted_width, pattern_deviation, closure'),
        ('singles stay flat on both detectors', 'checks singles_d1_flat, singles_flat'),
    ],
    'direct-qm': [
        ('radial law: w_s / Z_s + w_i / Z_i = w_p / R,  R = f - d',
         'coincidence.run_direct_qm; check image_distance'),
        ('magnification: M = -(Z_i w_s) / (Z_s w_i); the image does not depend on coincidence gating',
         'geometry.magnification; checks magnification, gating_invariance'),
    ],
}


@dataclass
class RunReport:
    kind: str
    config: Dict[str, Any]
    derived: Dict[str, Any] = field(default_factory=dict)
    statistics: Dict[str, Any] = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    table_metadata: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    manifest: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.checks.values())

    def summary(self, files: List[str] = None) -> Dict[str, Any]:
        return {'kind': self.kind,
                'seed': self.config.get('seed'),
                'trials': self.config.get('monte_carlo', {}).get('trials'),
                'config': self.config,
                'derived': self.derived,
                'statistics': self.statistics,
                'checks': self.checks,
                'passed': self.passed,
                'files': list(files if files is not None else self.manifest)}


def explain(kind: str) -> str:
    lines = [f'{kind}:']
    for law, reference in EXPLANATIONS[kind]:
        lines += [f'  {law}', f'      see {reference}']
    return '\n'.join(lines)


# helpers

def _source(cfg: ExperimentConfig) -> SourceModel:
    source = cfg.config['source']
    return SourceModel(pump_omega=cfg.pump_omega, sigma_q=cfg.sigma_q(), seed=cfg.seed,
                       pump_waist=source['pump_waist'], signal_fraction=source['signal_fraction'],
                       helicity=source['helicity'], c=cfg.c, medium=cfg.medium())


def _detectors(cfg: ExperimentConfig) -> DetectorModel:
    mc = cfg.config['monte_carlo']
    return DetectorModel(efficiency_d1=mc['efficiency_d1'], efficiency_d2=mc['efficiency_d2'],
                         background_rate=mc['background_rate'])


def _sweep(value, fallback) -> np.ndarray:
    return linspace_triple(value if value is not None else fallback)


def _p_value(counts) -> Optional[float]:
    try:
        return flatness_test(counts)
    except InsufficientCounts:
        return None


def _is_flat(p_value: Optional[float]) -> bool:
    return p_value is not None and p_value > FLAT_P_VALUE


def _relative(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


# deterministic kinds

def _run_phasematch(cfg: ExperimentConfig) -> RunReport:
    medium = cfg.medium()
    source = cfg.config['source']
    omega_p = cfg.pump_omega
    pump = Photon(omega=omega_p, k=(0.0, 0.0, float(medium.wavenumber(omega_p))), helicity=source['helicity'])
    rows = []
    for fraction in _sweep(cfg.config['sweep']['signal_fraction'], source['signal_fraction']):
        omega_s = omega_p * fraction
        row = {'omega_s': omega_s, 'omega_i': omega_p - omega_s, 'theta_ps': np.nan, 'theta_pi': np.nan,
               'phase_matched': False, 'coherent': bool(check_coherence(medium, omega_p, omega_s)),
               'energy_residual': np.nan, 'momentum_residual': np.nan, 'crossing_residual': np.nan}
        try:
            pair = split_pump(pump, omega_s, medium)
        except PhaseMatchImpossible:
            rows.append(row)
            continue
        signal, idler = pair.signal, pair.idler
        energy, momentum = conservation_residual(omega_p, pump.k_vec, signal.omega, signal.k_vec,
                                                 idler.omega, idler.k_vec)
        # p + conj(i) must give back the signal, helicity included
        back = cross_convert(pump, conjugate_photon(idler))
        crossing = max(abs(back.omega - signal.omega) / omega_p,
                       float(np.max(np.abs(back.k_vec - signal.k_vec))) / pump.k_abs,
                       0.0 if back.helicity == signal.helicity else 1.0)
        row.update(theta_ps=pair.theta_ps, theta_pi=pair.theta_pi, phase_matched=True,
                   energy_residual=energy, momentum_residual=momentum, crossing_residual=crossing)
        rows.append(row)
    table = pd.DataFrame(rows, columns=list(rows[0].keys()))
    matched = table[table['phase_matched']]
    report = RunReport(kind=cfg.kind, config=cfg.config)
    report.derived = {'pump_omega': omega_p, 'pump_wavelength': 2 * np.pi * cfg.c / omega_p,
                      'phase_matched_rows': int(len(matched)), 'rows': int(len(table))}
    report.statistics = {'max_energy_residual': float(matched['energy_residual'].max()) if len(matched) else None,
                         'max_momentum_residual': float(matched['momentum_residual'].max()) if len(matched) else None,
                         'max_crossing_residual': float(matched['crossing_residual'].max()) if len(matched) else None}
    report.checks = {'phase_matched': len(matched) > 0,
                     'conservation': bool(len(matched) > 0 and max(report.statistics['max_energy_residual'],
                                                                   report.statistics['max_momentum_residual'])
                                          < CLOSURE_TOLERANCE),
                     'crossing_identity': bool(len(matched) > 0
                                               and report.statistics['max_crossing_residual'] < CLOSURE_TOLERANCE)}
    report.tables['phasematch'] = table
    return report


def _run_twm(cfg: ExperimentConfig) -> RunReport:
    sweep, medium = cfg.config['sweep'], cfg.config['medium']
    g = complex(*medium['coupling'])
    g_abs = _sweep(sweep['g_abs'], abs(g))
    g_phase = float(sweep['g_phase']) if sweep['g_phase'] is not None else float(np.angle(g))
    lengths = _sweep(sweep['L'], medium['thickness'])
    table = amplification_sweep(g_abs, _sweep(sweep['delta_k'], 0.0), lengths, g_phase=g_phase,
                                steps=int(sweep['steps']))
    above = [bool(gain_threshold(row.g_abs, row.L)) for row in table.itertuples() if row.L > 0]
    report = RunReport(kind=cfg.kind, config=cfg.config)
    report.derived = {'g_phase': g_phase, 'threshold_length_min_g': float(threshold_length(float(np.max(g_abs)))),
                      'rows_above_threshold': int(sum(above)), 'rows': int(len(table))}
    report.statistics = {'max_ode_rel_err': float(table['ode_rel_err'].max()),
                         'max_af_abs': float(table['af_abs'].max())}
    report.checks = {'ode_agreement': bool(report.statistics['max_ode_rel_err'] < 1e-6)}
    report.tables['twm'] = table
    report.table_metadata['twm'] = {'g_phase': g_phase, 'steps': int(sweep['steps'])}
    return report


def _run_mirror(cfg: ExperimentConfig) -> RunReport:
    layout = cfg.build_layout()
    mirror = layout.mirror
    obj = cfg.config['object']
    omega_s, omega_i, omega_p = cfg.omega_s, cfg.omega_i, cfg.pump_omega
    R = mirror.radius
    wavelength = {name: 2 * np.pi * cfg.c / omega for name, omega in
                  (('s', omega_s), ('i', omega_i), ('p', omega_p))}
    degenerate = np.isclose(omega_s, omega_i, rtol=1e-12)
    rows = []
    for Z_s in linspace_triple(obj['z_s']):
        image = sqm_image_distance(Z_s, omega_s, omega_i, R, beta_ps=obj['beta_ps'])
        M = magnification(Z_s, image.distance, omega_s, omega_i)
        traced = locate_image(Z_s, obj['height'], R, omega_s, omega_i, max_angle=obj['max_angle'])
        paraxial = paraxial_sqm_law(Z_s, image.distance, wavelength['s'], wavelength['i'], wavelength['p'], R, 0.0)
        area = np.nan
        if np.isfinite(R):
            try:
                area = relative_area_residual(*conjugate_triangle(Z_s, omega_s, omega_i, R, obj['max_angle']))
            except (DegenerateTriangle, DegenerateConjugate):
                pass
        rows.append({'z_s': float(Z_s), 'z_i': image.distance, 'virtual': image.virtual, 'magnification': M,
                     'traced_z_i': traced.distance, 'traced_magnification': traced.magnification,
                     'paraxial_residual': paraxial, 'area_residual': area})
    table = pd.DataFrame(rows, columns=list(rows[0].keys()))
    distance_error = max(_relative(r['traced_z_i'], r['z_i']) for r in rows)
    magnification_error = max(_relative(r['traced_magnification'], r['magnification']) for r in rows)
    scale = abs(R) if np.isfinite(R) else 1.0
    report = RunReport(kind=cfg.kind, config=cfg.config)
    report.derived = {'radius': R, 'omega_s': omega_s, 'omega_i': omega_i, 'degenerate': bool(degenerate)}
    report.statistics = {'max_trace_distance_error': distance_error,
                         'max_trace_magnification_error': magnification_error,
                         'max_paraxial_residual': float(np.max(np.abs(table['paraxial_residual']))) * scale}
    report.checks = {'trace_distance': distance_error < 5e-3, 'trace_magnification': magnification_error < 1e-2}
    if obj['beta_ps'] == 0:
        report.checks['paraxial_law'] = bool(report.statistics['max_paraxial_residual'] < 1e-9)
    if degenerate and np.isfinite(R):
        residuals = table['area_residual'].dropna()
        report.statistics['max_area_residual'] = float(residuals.max()) if len(residuals) else None
        report.checks['area_identity'] = bool(len(residuals) > 0 and residuals.max() < 1e-9)
    report.tables['mirror'] = table
    return report


def _run_diffract(cfg: ExperimentConfig) -> RunReport:
    slit = cfg.config['slit']
    wavelength = slit['wavelength'] if slit['wavelength'] is not None else 2 * np.pi * cfg.c / cfg.omega_s
    geom = SlitGeometry(a=slit['a'], wavelength=wavelength, z2=slit['z2'], d_sep=slit['d_sep'])
    x = linspace_triple(slit['scan'])
    pattern = compute_pattern(geom, slit['gamma'], x)
    oracle = fraunhofer_sum(geom, x, n_sources=int(slit['n_sources']), gamma=slit['gamma'])
    deviation = float(np.max(np.abs(pattern.intensity - oracle / oracle.max())))
    # fringes are read inside the central envelope lobe
    inside = np.flatnonzero(np.abs(x) < geom.first_zero)
    window = (int(inside[0]), int(inside[-1]) + 1) if len(inside) else None
    report = RunReport(kind=cfg.kind, config=cfg.config)
    try:
        report.derived['visibility'] = visibility(pattern, window=window)
    except NoFringes:
        report.derived['visibility'] = None
    report.derived.update(first_zero=geom.first_zero, wavelength=wavelength)
    report.statistics['max_oracle_deviation'] = deviation
    report.checks['fraunhofer_agreement'] = deviation < 1e-3
    report.tables['pattern'] = pd.DataFrame({'x2': pattern.x, 'intensity': pattern.intensity})
    report.table_metadata['pattern'] = {'a': geom.a, 'wavelength': wavelength, 'z2': geom.z2, 'd_sep': geom.d_sep,
                                        'gamma': slit['gamma']}
    if slit['gamma_schedule'] is not None:
        controls = _sweep(slit['controls'], [0.0, 1.0, 11])
        rows = []
        for control in controls:
            gamma = gamma_schedule(slit['gamma_schedule'], control)
            try:
                v = visibility(compute_pattern(geom, gamma, x), window=window)
            except NoFringes:
                v = 0.0
            rows.append({'control': float(control), 'gamma': gamma, 'visibility': v})
        table = pd.DataFrame(rows, columns=['control', 'gamma', 'visibility'])
        ordered = table.sort_values('gamma', kind='stable')['visibility'].to_numpy()
        report.checks['visibility_follows_gamma'] = bool(np.all(np.diff(ordered) >= -1e-12))
        report.tables['visibility'] = table
    return report


# Monte Carlo kinds

def _mask_separation(mask: Mask) -> Optional[float]:
    """ Distance between the transmission centroids on either side of the mask centre. """
    cells = np.asarray(mask.transmission)
    centres = mask.center - mask.half_width + (np.arange(len(cells)) + 0.5) * mask.pitch
    left, right = (centres < mask.center) & (cells > 0), (centres > mask.center) & (cells > 0)
    if not left.any() or not right.any():
        return None
    return float(np.average(centres[right], weights=cells[right]) - np.average(centres[left], weights=cells[left]))


def _mc_options(cfg: ExperimentConfig) -> Dict[str, Any]:
    return {'shards': int(cfg.config['shards']), 'workers': int(cfg.config['workers'])}


def _run_ghost_image(cfg: ExperimentConfig) -> RunReport:
    layout = cfg.build_layout()
    src, detectors = _source(cfg), _detectors(cfg)
    trials = int(cfg.config['monte_carlo']['trials'])
    run = run_ghost_image(layout, src, trials, detectors=detectors, progress=cfg.config['progress'],
                          **_mc_options(cfg))
    lens, mask, detector = layout.first(ThinLens), layout.first(Mask), layout.first(DetectorPlane)
    S = lens.position - mask.position
    try:
        s_prime = thin_lens_image(S, lens.focal_length)
    except CollimatedOutput:
        s_prime = None
    histogram = run.histogram
    report = RunReport(kind=cfg.kind, config=cfg.config)
    report.derived = {'S': S, 'S_prime': s_prime, 'detector_distance': detector.position - lens.position,
                      'magnification': thin_lens_magnification(S, s_prime) if s_prime is not None else None,
                      'coincidences': int(histogram.coincidences.sum()),
                      'singles_d1': int(histogram.singles_d1[0]) if len(histogram.singles_d1) else 0}
    report.statistics = {'singles_d1_flatness_p': _p_value(histogram.singles_d1),
                         'singles_d2_flatness_p': _p_value(histogram.singles_d2),
                         'coincidence_flatness_p': _p_value(histogram.coincidences),
                         'closure_residual': run.closure_residual,
                         'unfolding_residual': run.unfolding_residual}
    report.checks = {
        'singles_d1_flat': _is_flat(report.statistics['singles_d1_flatness_p']),
        'singles_flat': _is_flat(report.statistics['singles_d2_flatness_p']),
        'coincidence_structure': report.statistics['coincidence_flatness_p'] is not None
                                 and report.statistics['coincidence_flatness_p'] < STRUCTURE_P_VALUE,
        'closure': run.closure_residual < CLOSURE_TOLERANCE,
        'unfolding': run.unfolding_residual < UNFOLDING_TOLERANCE,
    }
    mask_separation = _mask_separation(mask)
    if mask_separation is not None and s_prime is not None:
        expected = mask_separation * abs(s_prime / S)
        try:
            measured = peak_separation(histogram, center=detector.center)
        except InsufficientCounts:
            measured = None
        report.derived.update(expected_peak_separation=expected, peak_separation=measured)
        report.checks['peak_separation'] = measured is not None and abs(measured - expected) <= 2 * detector.pitch
    mc = cfg.config['monte_carlo']
    if mc['focus_points'] > 0 and s_prime is not None:
        offsets = np.arange(mc['focus_points']) - (mc['focus_points'] - 1) / 2
        distances = s_prime * (1 + mc['focus_step'] * offsets)
        scan = focus_scan(layout, src, trials, distances, detectors=detectors, **_mc_options(cfg))
        best = float(scan['s_prime'][scan['sharpness'].idxmax()])
        report.derived['sharpest_S_prime'] = best
        report.checks['focus'] = abs(best - s_prime) <= mc['focus_step'] * s_prime * (1 + 1e-9)
        report.tables['focus_scan'] = scan
    report.tables['histogram'] = histogram.to_frame()
    report.table_metadata['histogram'] = {'trials': histogram.trials, 'seed': cfg.seed}
    return report


def _run_ghost_diffract(cfg: ExperimentConfig) -> RunReport:
    layout = cfg.build_layout()
    src = _source(cfg)
    trials = int(cfg.config['monte_carlo']['trials'])
    gamma = cfg.config['slit']['gamma']
    run = run_ghost_diffraction(layout, src, trials, detectors=_detectors(cfg), gamma=gamma,
                                progress=cfg.config['progress'], **_mc_options(cfg))
    geom = slit_geometry(layout, src)
    detector = layout.first(DetectorPlane)
    histogram = run.histogram
    counts = histogram.coincidences
    report = RunReport(kind=cfg.kind, config=cfg.config)
    report.derived = {'a': geom.a, 'd_sep': geom.d_sep, 'wavelength': geom.wavelength, 'z2': geom.z2,
                      'first_zero': geom.first_zero, 'coincidences': int(counts.sum())}
    report.statistics = {'singles_d1_flatness_p': _p_value(histogram.singles_d1),
                         'singles_d2_flatness_p': _p_value(histogram.singles_d2),
                         'closure_residual': run.closure_residual}
    report.checks = {'singles_d1_flat': _is_flat(report.statistics['singles_d1_flatness_p']),
                     'singles_flat': _is_flat(report.statistics['singles_d2_flatness_p']),
                     'closure': run.closure_residual < CLOSURE_TOLERANCE}
    if geom.d_sep == 0:
        if counts.sum() > 0:
            a_fit, amplitude = fit_sinc_squared(histogram.bin_centers, counts, geom.wavelength, geom.z2, geom.a)
            expected = amplitude * bin_averaged_sinc_squared(histogram.bin_centers, detector.pitch, geom.a,
                                                             geom.wavelength, geom.z2)
            deviation = max_poisson_deviation(counts, expected)
        else:
            a_fit, amplitude, deviation = None, None, None
        report.derived.update(fitted_a=a_fit, fitted_amplitude=amplitude)
        report.statistics['max_poisson_deviation'] = deviation
        report.checks['fitted_width'] = a_fit is not None and _relative(a_fit, geom.a) < 0.02
        report.checks['pattern_deviation'] = deviation is not None and deviation < 4
    report.tables['histogram'] = histogram.to_frame()
    report.table_metadata['histogram'] = {'trials': histogram.trials, 'seed': cfg.seed}
    report.tables['pattern'] = pd.DataFrame({'x2': histogram.bin_centers, 'intensity': histogram.image})
    report.table_metadata['pattern'] = {'a': geom.a, 'wavelength': geom.wavelength, 'z2': geom.z2,
                                        'd_sep': geom.d_sep, 'gamma': gamma}
    return report


def _run_direct_qm(cfg: ExperimentConfig) -> RunReport:
    layout = cfg.build_layout()
    src = _source(cfg)
    mirror = layout.mirror
    obj = cfg.config['object']
    trials = int(cfg.config['monte_carlo']['trials'])
    point = ObjectPoint(height=obj['height'], max_angle=obj['max_angle'])
    scan = linspace_triple(obj['image_scan']) if obj['image_scan'] is not None else None
    gate = cfg.config['monte_carlo']['efficiency_d1']
    images = {enabled: run_direct_qm(layout, src, point, trials, coincidence_enabled=enabled,
                                     gate_efficiency=gate, image_scan=scan) for enabled in (False, True)}
    image = images[bool(obj['coincidence_enabled'])]
    predicted = sqm_image_distance(mirror.position, src.omega_s, src.omega_i, mirror.radius)
    M = magnification(mirror.position, predicted.distance, src.omega_s, src.omega_i)
    report = RunReport(kind=cfg.kind, config=cfg.config)
    report.derived = {'Z_s': mirror.position, 'radius': mirror.radius, 'predicted_Z_i': predicted.distance,
                      'predicted_magnification': M, 'Z_i': image.distance, 'scan_Z_i': image.scan_distance,
                      'magnification': image.magnification, 'rms_radius': image.rms_radius,
                      'Z_i_gated': images[True].distance, 'Z_i_ungated': images[False].distance,
                      'rays_gated': images[True].rays_used, 'rays_ungated': images[False].rays_used}
    report.checks = {
        'image_distance': _relative(image.distance, predicted.distance) <= 5e-3,
        'magnification': _relative(image.magnification, M) <= 1e-2,
        'gating_invariance': abs(images[True].distance - images[False].distance) <= 5e-3 * abs(predicted.distance),
    }
    report.tables['rms_scan'] = image.scan
    return report


RUNNERS: Dict[str, Callable[[ExperimentConfig], RunReport]] = {
    'phasematch': _run_phasematch,
    'twm': _run_twm,
    'mirror': _run_mirror,
    'diffract': _run_diffract,
    'ghost-image': _run_ghost_image,
    'ghost-diffract': _run_ghost_diffract,
    'direct-qm': _run_direct_qm,
}


def _select_checks(report: RunReport, wanted: Optional[List[str]]):
    if wanted is None:
        return
    for name in wanted:
        if name not in report.checks:
            raise ValidationError(str(name), f'{report.kind} has no check {name!r}',
                                  suggestion=_closest(name, report.checks))
    report.checks = {name: ok for name, ok in report.checks.items() if name in wanted}


def _log_summaries(cfg: ExperimentConfig, report: RunReport):
    from utils.logging_utils import SummaryManager

    summary = SummaryManager(log_dir=cfg.config['log_directory'], kind=cfg.kind,
                             max_plot_frequency=int(cfg.config['log_plot_frequency']))
    summary.display_derived({**report.derived, **report.statistics})
    for name, table in report.tables.items():
        if {'bin_center', 'coincidences'} <= set(table.columns):
            for column in ('coincidences', 'singles_d1', 'singles_d2'):
                summary.display_counts(table['bin_center'], table[column], tag=f'{name}/{column}')
        elif {'x2', 'intensity'} <= set(table.columns):
            summary.display_curves(table['x2'], {'intensity': table['intensity']}, tag=name, xlabel='x2 (m)')
    if 'focus_scan' in report.tables:
        for i, row in enumerate(report.tables['focus_scan'].itertuples()):
            summary.display_scan_point('focus/sharpness', row.sharpness, step=i)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RunReport:
    """
    Runs the experiment named by the config and writes its outputs. Module errors keep
    their class; the experiment kind and config path are prepended to the message.
    """
    try:
        report = RUNNERS[cfg.kind](cfg)
        _select_checks(report, cfg.config['checks'])
    except QMirrorError as e:
        e.args = (f'[{cfg.kind}, {cfg.config_path}] {e}',)
        raise
    if cfg.config['log_directory'] is not None:
        _log_summaries(cfg, report)
    if write:
        report.manifest = [str(p) for p in write_outputs(report, cfg.output_directory, cfg.output_format,
                                                         precision=int(cfg.config['csv_precision']))]
    return report
