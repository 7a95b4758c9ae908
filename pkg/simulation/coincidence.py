"""
    Monte Carlo coincidence engine.

    Each trial draws one pair at the crystal. The signal is traced through the signal arm
    to D1 and the idler through the idler arm to the D2 scan plane. When the signal gets
    through, its path is also followed backwards along the unfolded layout: sent back from
    the D1 side to the crystal, cross-converted with the pair's pump photon and carried on
    to the D2 plane. With a bucket D1 that return path lands on the idler itself; with a
    point trigger D1 it is the geometric centre of the far-field pattern the trigger
    selects. Trials are split in shards seeded from (seed, shard) whose histograms are summed.
"""
from dataclasses import dataclass, replace
from functools import partial
from multiprocessing import Pool
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from physics.diffraction import SlitGeometry, double_slit_pattern
from physics.errors import ConfigInvalid, GammaOutOfRange, InsufficientCounts
from physics.geometry import (DetectorPlane, Mask, OpticalLayout, QuantumMirror, RayBundle, ThinLens,
                              sqm_image_distance, trace_bundle)
from physics.kinematics import conservation_residual
from simulation.histograms import CoincidenceHistogram
from simulation.sources import PairBatch, SourceModel, sample_pairs

BUCKET = 'bucket'
PINHOLE = 'pinhole'
CHUNK_SIZE = 200_000
AUDIT_STRIDE = 100


@dataclass(frozen=True)
class DetectorModel:
    efficiency_d1: float = 1.0
    efficiency_d2: float = 1.0
    background_rate: float = 0.0  # mean accidentals per bin per trial, at most one per trial overall
    d1_mode: str = BUCKET

    def __post_init__(self):
        for name in ('efficiency_d1', 'efficiency_d2'):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ConfigInvalid(f'{name} must lie in [0, 1], got {value}')
        if self.background_rate < 0:
            raise ConfigInvalid(f'background_rate must be non-negative, got {self.background_rate}')
        if self.d1_mode not in (BUCKET, PINHOLE):
            raise ConfigInvalid(f'd1_mode must be {BUCKET!r} or {PINHOLE!r}, got {self.d1_mode!r}')


@dataclass(frozen=True)
class CoincidenceRun:
    histogram: CoincidenceHistogram
    closure_residual: float
    unfolding_residual: float = 0.0  # m, bucket mode only

    @property
    def image(self) -> np.ndarray:
        return self.histogram.image

    def merge(self, other: 'CoincidenceRun') -> 'CoincidenceRun':
        return CoincidenceRun(histogram=self.histogram.merge(other.histogram),
                              closure_residual=max(self.closure_residual, other.closure_residual),
                              unfolding_residual=max(self.unfolding_residual, other.unfolding_residual))


@dataclass(frozen=True)
class PointTrigger:
    """
    Point D1 behind the slit(s). The joint probability of a trigger and an idler at offset
    x2 from the geometric return point is the slit far-field pattern, which peaks at 1.

    This is a modeling choice: the trigger is not sampled through the aperture, its
    acceptance is the analytic far-field intensity. A coincidence histogram therefore tests
    the sampling, the geometric return point and the binning against that pattern, not the
    diffraction integral itself, which is checked separately against a direct sum over the
    aperture.
    """
    geometry: SlitGeometry
    gamma: float = 1.0

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise GammaOutOfRange(f'gamma must lie in [0, 1], got {self.gamma}')

    def acceptance(self, offset: np.ndarray) -> np.ndarray:
        return np.asarray(double_slit_pattern(self.geometry, self.gamma, offset), dtype=float)


def shard_sizes(trials: int, shards: int) -> List[int]:
    if trials < 0:
        raise ConfigInvalid(f'trials must be non-negative, got {trials}')
    if shards < 1:
        raise ConfigInvalid(f'shards must be at least 1, got {shards}')
    base, extra = divmod(trials, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def run_sharded(task: Callable[[int, int], CoincidenceRun], trials: int, shards: int = 1, workers: int = 1,
                progress: bool = False) -> CoincidenceRun:
    """ Runs task(shard, n) for every shard and merges the results in shard order. """
    jobs = list(enumerate(shard_sizes(trials, shards)))
    if workers > 1 and shards > 1:
        with Pool(processes=min(workers, shards)) as pool:
            results = pool.imap(_call_task, [(task, shard, n) for shard, n in jobs])
            results = list(tqdm(results, total=len(jobs), disable=not progress))
    else:
        results = [task(shard, n) for shard, n in tqdm(jobs, disable=not progress)]
    merged = results[0]
    for result in results[1:]:
        merged = merged.merge(result)
    return merged


def _call_task(job):
    task, shard, n = job
    return task(shard, n)


# Layout checks

def _require(layout: OpticalLayout, kind, what: str):
    element = layout.first(kind)
    if element is None:
        raise ConfigInvalid(f'layout has no {what}')
    return element


def _ghost_elements(layout: OpticalLayout) -> Tuple[QuantumMirror, DetectorPlane]:
    mirror = _require(layout, QuantumMirror, 'quantum mirror (crystal plane)')
    detector = _require(layout, DetectorPlane, 'D2 scan plane')
    _require(layout, Mask, 'mask in the signal arm')
    if detector.position < mirror.position:
        raise ConfigInvalid('the D2 scan plane must lie in the idler arm (after the crystal)')
    if not any(isinstance(e, Mask) for e in layout.folded_arm().elements):
        raise ConfigInvalid('the mask must lie in the signal arm (before the crystal)')
    return mirror, detector


def _check_background(detectors: DetectorModel, detector: DetectorPlane):
    """ Accidentals are drawn per trial, so the rate summed over all bins must stay below one. """
    per_trial = detectors.background_rate * detector.bins
    if per_trial > 1:
        raise ConfigInvalid(f'background_rate * bins must not exceed 1 accidental per trial, got {per_trial:.3g}')


def slit_geometry(layout: OpticalLayout, src: SourceModel) -> SlitGeometry:
    """ Slit width, separation and far-field distance read off the mask and D2 plane. """
    mirror, detector = _ghost_elements(layout)
    mask = layout.first(Mask)
    cells = mask.transmission
    d_sep = 0.0 if len(cells) == 1 else (len(cells) - 1) * mask.pitch
    wavelength = 2 * np.pi * src.c / src.omega_s
    return SlitGeometry(a=mask.pitch, wavelength=wavelength, z2=detector.position - mask.position, d_sep=d_sep)


# Tracing helpers

def _direct_idlers(batch: PairBatch, idler_arm: OpticalLayout, c: float) -> RayBundle:
    """ Idler leaving the crystal face on its own, conserving the transverse wavevector. """
    sin_out = batch.idler_k[:, 0] * c / batch.omega_i
    escaping = np.abs(sin_out) < 1
    sin_out = np.where(escaping, sin_out, 0.)
    bundle = RayBundle.from_slopes(z=0., y=batch.y0, slope=sin_out / np.sqrt(1 - sin_out ** 2), omega=batch.omega_i)
    bundle.alive &= escaping
    return trace_bundle(bundle, idler_arm, c=c)


def _return_path(layout: OpticalLayout, start: float, y: np.ndarray, slope: np.ndarray, batch: PairBatch,
                 c: float) -> RayBundle:
    """ Unfolded path from the D1 side through the crystal (cross-conversion) to D2. """
    rest = OpticalLayout(tuple(e for e in layout.elements if e.position > start))
    bundle = RayBundle.from_slopes(z=start, y=y, slope=slope, omega=batch.omega_s)
    return trace_bundle(bundle, rest, c=c, pump_k=batch.pump_k)


def audit_closure(batch: PairBatch, index: np.ndarray) -> float:
    """ Largest relative residual of w_p = w_s + w_i and k_p = k_s + k_i over the sampled pairs. """
    if len(index) == 0:
        return 0.0
    omega_res, k_res = conservation_residual(batch.omega_p, batch.pump_k[index], batch.omega_s,
                                             batch.signal_k[index], batch.omega_i, batch.idler_k[index])
    return max(omega_res, k_res)


def _ghost_chunk(layout: OpticalLayout, src: SourceModel, detectors: DetectorModel,
                 trigger: Optional[PointTrigger], rng: np.random.Generator, n: int) -> CoincidenceRun:
    mirror = layout.mirror
    detector = layout.first(DetectorPlane)
    folded = layout.folded_arm()
    c = src.c
    batch = sample_pairs(src, rng, n)

    signal = RayBundle.from_slopes(z=0., y=batch.y0, slope=batch.signal_slope, omega=batch.omega_s)
    trace_bundle(signal, folded, c=c)
    passed = signal.alive & (rng.random(n) < signal.weight)
    direct = _direct_idlers(batch, layout.idler_arm(), c)

    # unfolded position of the last signal-arm element
    start = mirror.position - folded.elements[-1].position
    unfolding = 0.0
    if detectors.d1_mode == PINHOLE:
        reference = _return_path(layout, start, signal.y, np.zeros(n), batch, c)
        accepted = rng.random(n) < trigger.acceptance(direct.y - reference.y)
        passed &= accepted & reference.alive
        y_d2, reached = direct.y, direct.alive
    else:
        returned = _return_path(layout, start, signal.y, -signal.slope, batch, c)
        y_d2 = np.where(passed, returned.y, direct.y)
        reached = np.where(passed, returned.alive, direct.alive)
    bins = np.where(reached, detector.bin_index(y_d2), -1)

    d1 = passed & (rng.random(n) < detectors.efficiency_d1)
    d2 = (bins >= 0) & (rng.random(n) < detectors.efficiency_d2)
    both = d1 & d2

    coincidences = np.bincount(bins[both], minlength=detector.bins)
    singles_d2 = np.bincount(bins[d2], minlength=detector.bins)
    singles_d1 = np.full(detector.bins, int(d1.sum()))
    if detectors.background_rate > 0:
        # at most one accidental per trial, only in trials where neither detector fired
        idle = ~d1 & ~d2
        hit = idle & (rng.random(n) < detectors.background_rate * detector.bins)
        accidentals = np.bincount(rng.integers(0, detector.bins, n)[hit], minlength=detector.bins)
        coincidences = coincidences + accidentals
        singles_d1 = singles_d1 + int(hit.sum())
        singles_d2 = singles_d2 + accidentals

    audited = np.flatnonzero(both)[::AUDIT_STRIDE]
    if detectors.d1_mode == BUCKET and len(audited):
        unfolding = float(np.max(np.abs(returned.y[audited] - direct.y[audited])))
    histogram = CoincidenceHistogram(bin_centers=detector.bin_centers, coincidences=coincidences,
                                     singles_d1=singles_d1, singles_d2=singles_d2, trials=n)
    return CoincidenceRun(histogram=histogram, closure_residual=audit_closure(batch, audited),
                          unfolding_residual=unfolding)


def _ghost_shard(layout: OpticalLayout, src: SourceModel, detectors: DetectorModel,
                 trigger: Optional[PointTrigger], shard: int, n: int) -> CoincidenceRun:
    rng = src.rng(shard)
    detector = layout.first(DetectorPlane)
    run = CoincidenceRun(histogram=CoincidenceHistogram.empty(detector.bin_centers), closure_residual=0.)
    for offset in range(0, n, CHUNK_SIZE):
        run = run.merge(_ghost_chunk(layout, src, detectors, trigger, rng, min(CHUNK_SIZE, n - offset)))
    return run


def run_ghost_image(layout: OpticalLayout, src: SourceModel, trials: int, detectors: DetectorModel = None,
                    shards: int = 1, workers: int = 1, progress: bool = False) -> CoincidenceRun:
    """ Ghost imaging with a bucket D1 behind the mask; the image is the normalised coincidence row. """
    detectors = replace(detectors or DetectorModel(), d1_mode=BUCKET)
    _, detector = _ghost_elements(layout)
    _check_background(detectors, detector)
    _require(layout, ThinLens, 'imaging lens')
    task = partial(_ghost_shard, layout, src, detectors, None)
    return run_sharded(task, trials, shards=shards, workers=workers, progress=progress)


def run_ghost_diffraction(layout: OpticalLayout, src: SourceModel, trials: int, detectors: DetectorModel = None,
                          gamma: float = 1.0, shards: int = 1, workers: int = 1,
                          progress: bool = False) -> CoincidenceRun:
    """ Ghost diffraction with a point trigger behind the slit(s) and D2 in the far field. """
    detectors = replace(detectors or DetectorModel(), d1_mode=PINHOLE)
    trigger = PointTrigger(slit_geometry(layout, src), gamma=gamma)
    _check_background(detectors, layout.first(DetectorPlane))
    task = partial(_ghost_shard, layout, src, detectors, trigger)
    return run_sharded(task, trials, shards=shards, workers=workers, progress=progress)


# Image metrics

def sharpness(image: Sequence[float]) -> float:
    """ Edge-gradient metric: sum of squared first differences of the max-normalised image. """
    image = np.asarray(image, dtype=float)
    peak = image.max() if len(image) else 0.
    if peak <= 0:
        return 0.0
    return float(np.sum(np.diff(image / peak) ** 2))


def peak_separation(histogram: CoincidenceHistogram, center: float = 0.0) -> float:
    """ Distance between the coincidence centroids on either side of `center`. """
    x = histogram.bin_centers
    counts = histogram.coincidences.astype(float)
    left, right = x < center, x > center
    if counts[left].sum() == 0 or counts[right].sum() == 0:
        raise InsufficientCounts('need coincidences on both sides to measure a peak separation')
    centroid_left = np.average(x[left], weights=counts[left])
    centroid_right = np.average(x[right], weights=counts[right])
    return float(centroid_right - centroid_left)


def focus_scan(layout: OpticalLayout, src: SourceModel, trials: int, image_distances: Sequence[float],
               detectors: DetectorModel = None, shards: int = 1, workers: int = 1) -> pd.DataFrame:
    """
    Ghost-image sharpness as D2 is moved to each image distance S' behind the lens.
    Every point reuses the same seed, so the runs differ only through the geometry.
    """
    lens = _require(layout, ThinLens, 'imaging lens')
    detector = _require(layout, DetectorPlane, 'D2 scan plane')
    rows = []
    for s_prime in image_distances:
        moved = layout.with_element(detector, replace(detector, position=lens.position + float(s_prime)))
        run = run_ghost_image(moved, src, trials, detectors=detectors, shards=shards, workers=workers)
        rows.append({'s_prime': float(s_prime), 'sharpness': sharpness(run.image),
                     'coincidences': int(run.histogram.coincidences.sum())})
    return pd.DataFrame(rows, columns=['s_prime', 'sharpness', 'coincidences'])


# Direct quantum-mirror imaging

@dataclass(frozen=True)
class ObjectPoint:
    """ Point of the object at z = 0, lit by an independent source at the signal frequency. """
    height: float
    max_angle: float = 1e-3


@dataclass(frozen=True)
class DirectImage:
    distance: float
    scan_distance: float
    height: float
    magnification: float
    rms_radius: float
    predicted_distance: float
    rays_used: int
    scan: pd.DataFrame


def _rms_radius(y: np.ndarray, slope: np.ndarray, z) -> np.ndarray:
    spots = y[None, :] + np.atleast_1d(z)[:, None] * slope[None, :]
    return spots.std(axis=1)


def run_direct_qm(layout: OpticalLayout, src: SourceModel, obj: ObjectPoint, trials: int,
                  coincidence_enabled: bool = False, gate_efficiency: float = 1.0,
                  image_scan: Sequence[float] = None, shard: int = 0) -> DirectImage:
    """
    Images an object point through the quantum mirror using the converted idler rays and
    finds the plane of minimum RMS spot radius behind the crystal. With coincidence gating
    on, only the heralded share `gate_efficiency` of the rays is kept; the rays themselves
    are the same for the same seed either way.
    """
    mirror = _require(layout, QuantumMirror, 'quantum mirror')
    if not 0 < gate_efficiency <= 1:
        raise ConfigInvalid(f'gate_efficiency must lie in (0, 1], got {gate_efficiency}')
    if obj.max_angle <= 0:
        raise ConfigInvalid(f'max_angle must be positive, got {obj.max_angle}')
    rng = src.rng(shard)
    chief = -obj.height / mirror.position
    slopes = chief + rng.uniform(-obj.max_angle, obj.max_angle, trials)
    gate = rng.random(trials) < gate_efficiency

    before = OpticalLayout(tuple(e for e in layout.elements if e.position <= mirror.position))
    bundle = RayBundle.from_slopes(z=0., y=np.full(trials, float(obj.height)), slope=slopes, omega=src.omega_s)
    trace_bundle(bundle, before, c=src.c)
    keep = bundle.alive & gate if coincidence_enabled else bundle.alive
    if keep.sum() < 2:
        raise InsufficientCounts('fewer than two converted rays reach the image side')
    y, slope = bundle.y[keep], bundle.slope[keep]

    predicted = sqm_image_distance(mirror.position, src.omega_s, src.omega_i, mirror.radius).distance
    if image_scan is None:
        image_scan = np.linspace(0.5 * predicted, 1.5 * predicted, 401)
    image_scan = np.sort(np.asarray(image_scan, dtype=float))
    rms = _rms_radius(y, slope, image_scan)
    scan_distance = float(image_scan[np.argmin(rms)])

    # the spot variance is quadratic in z, so the scan minimum is refined in closed form
    best = -np.cov(y, slope, bias=True)[0, 1] / np.var(slope)
    if not image_scan[0] <= best <= image_scan[-1]:
        best = scan_distance
    height = float(np.mean(y + best * slope))
    ratio = height / obj.height if obj.height != 0 else 0.0
    return DirectImage(distance=float(best), scan_distance=scan_distance, height=height, magnification=ratio,
                       rms_radius=float(_rms_radius(y, slope, best)[0]), predicted_distance=float(predicted),
                       rays_used=int(keep.sum()),
                       scan=pd.DataFrame({'z_i': image_scan, 'rms_radius': rms}))
