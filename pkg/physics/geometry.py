"""
    Geometric optics of the quantum mirror: thin-lens conjugation, the spherical
    quantum-mirror radial law and magnification, the transverse exit relation, the
    triangle-area check, and a paraxial meridional-plane ray tracer over an unfolded
    layout (object side -> lens -> quantum mirror -> detector side).

    Sign conventions: distances are positive on the real object / image side of the
    element (classical concave-mirror convention); a negative image distance is a
    virtual image behind the element.
"""
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from physics.errors import (CollimatedOutput, NoExitAngle, DegenerateConjugate, DegenerateTriangle, RayBlocked)
from physics.kinematics import cross_convert_wavevectors

# areas below this (m^2) count as collapsed triangles
AREA_FLOOR = 1e-18


# Conjugation laws

def thin_lens_image(S: float, f: float) -> float:
    """ Gaussian thin-lens conjugate 1/S + 1/S' = 1/f. """
    if not S > 0:
        raise ValueError(f'object distance must be positive, got {S}')
    if f == 0:
        raise ValueError('focal length must be non-zero')
    inverse = 1 / f - 1 / S
    if inverse == 0:
        raise CollimatedOutput(f'object at the focal plane (S = f = {f}): no finite image')
    return 1 / inverse


def thin_lens_magnification(S: float, S_prime: float) -> float:
    return -S_prime / S


def snell_exit_angles(omega_s: float, omega_i: float, beta_ps: float) -> float:
    """ Idler exit angle from conservation of the transverse wavevector: w_s sin b_ps = w_i sin b_pi. """
    if not omega_i > 0:
        raise ValueError(f'idler frequency must be positive, got {omega_i}')
    arg = omega_s * np.sin(beta_ps) / omega_i
    if abs(arg) > 1:
        raise NoExitAngle(f'no exit angle: w_s sin(b_ps) / w_i = {arg}')
    return float(np.arcsin(arg))


@dataclass(frozen=True)
class MirrorImage:
    distance: float
    virtual: bool
    cos_beta: float
    beta_pi: float


def sqm_image_distance(Z_s: float, omega_s: float, omega_i: float, R: float, beta_ps: float = 0.0) -> MirrorImage:
    """
    Spherical quantum-mirror radial law
        w_s / Z_s + w_i / Z_i = (w_p / R) cos(beta),
        cos(beta) = (w_s cos(b_ps) + w_i cos(b_pi)) / w_p,  w_p = w_s + w_i.
    R = inf is the planar mirror.
    """
    if not Z_s > 0:
        raise ValueError(f'object distance must be positive, got {Z_s}')
    if R == 0:
        raise ValueError('mirror radius must be non-zero')
    omega_p = omega_s + omega_i
    beta_pi = snell_exit_angles(omega_s, omega_i, beta_ps)
    cos_beta = (omega_s * np.cos(beta_ps) + omega_i * np.cos(beta_pi)) / omega_p
    denominator = omega_p / R * cos_beta - omega_s / Z_s
    if denominator == 0:
        raise DegenerateConjugate(f'image at infinity for Z_s={Z_s}, R={R}')
    Z_i = omega_i / denominator
    return MirrorImage(distance=float(Z_i), virtual=bool(Z_i < 0), cos_beta=float(cos_beta), beta_pi=beta_pi)


def magnification(Z_s: float, Z_i: float, omega_s: float, omega_i: float) -> float:
    if Z_s == 0:
        raise ValueError('object distance must be non-zero')
    return -(Z_i * omega_s) / (Z_s * omega_i)


def paraxial_sqm_law(Z_s: float, Z_i: float, lambda_s: float, lambda_i: float, lambda_p: float,
                     f: float, d: float) -> float:
    """ Residual of the paraxial radial law in wavelengths; zero on conjugate pairs. """
    if f == d:
        raise ValueError('f - d must be non-zero')
    return (lambda_p / lambda_s) / Z_s + (lambda_p / lambda_i) / Z_i - 1 / (f - d)


def mirror_radius(f: float, d: float) -> float:
    """ Radius of the pump wavefront at the crystal: lens focal length minus lens-crystal distance. """
    radius = f - d
    if radius == 0:
        raise ValueError('pump focus on the crystal (f == d) gives no mirror radius')
    return radius


def signed_area(a: Sequence[float], b: Sequence[float], c: Sequence[float]) -> float:
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def verify_area_identity(P: Sequence[float], A: Sequence[float], P_prime: Sequence[float],
                         C: Sequence[float]) -> float:
    """
    Area(PAP') - Area(PAC) - Area(AP'C) with signed areas. The residual is the signed
    area of (C, P', P): it vanishes when the mirror centre lies on the line PP'.
    Four collinear points give 0.
    """
    points = np.array([P, A, P_prime, C], dtype=float)
    span = points - points[0]
    scale = max(np.max(np.abs(span)), 1.0)
    if np.linalg.matrix_rank(span, tol=1e-15 * scale) <= 1:
        return 0.0
    areas = {"PAP'": signed_area(P, A, P_prime), 'PAC': signed_area(P, A, C), "AP'C": signed_area(A, P_prime, C)}
    for name, area in areas.items():
        if abs(area) < AREA_FLOOR:
            raise DegenerateTriangle(f'triangle {name} collapsed (area {area})')
    return areas["PAP'"] - areas['PAC'] - areas["AP'C"]


def relative_area_residual(P, A, P_prime, C) -> float:
    residual = verify_area_identity(P, A, P_prime, C)
    if residual == 0.0:
        return 0.0
    return abs(residual) / abs(signed_area(P, A, P_prime))


def _rotate(v: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def conjugate_triangle(Z_s: float, omega_s: float, omega_i: float, R: float, phi: float,
                       image_scale: float = 1.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Points (P, A, P', C) in the (z, y) plane for an axial object `Z_s` in front of the
    vertex and the ray that meets the mirror sphere at polar angle `phi`. Distances to P
    and P' are taken along the rays from A, P' is put `image_scale * Z_i` along the exit
    ray, Z_i from the radial law at the local incidence angle.
    """
    C = np.array([R, 0.])
    A = np.array([R - R * np.cos(phi), R * np.sin(phi)])
    P = np.array([Z_s, 0.])
    normal = (C - A) / np.linalg.norm(C - A)
    to_source = P - A
    distance = np.linalg.norm(to_source)
    to_source = to_source / distance
    beta_ps = float(np.arctan2(normal[0] * to_source[1] - normal[1] * to_source[0], normal @ to_source))
    image = sqm_image_distance(distance, omega_s, omega_i, R, beta_ps=beta_ps)
    exit_direction = _rotate(normal, -image.beta_pi)
    P_prime = A + image_scale * image.distance * exit_direction
    return P, A, P_prime, C


# Layout elements

@dataclass(frozen=True)
class ThinLens:
    position: float
    focal_length: float

    def __post_init__(self):
        if self.focal_length == 0:
            raise ValueError('lens focal length must be non-zero')


@dataclass(frozen=True)
class Mask:
    """ Transmission grid of `len(transmission)` cells of width `pitch`, centred on `center`. """
    position: float
    pitch: float
    transmission: Tuple[float, ...]
    center: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'transmission', tuple(float(t) for t in self.transmission))
        if not self.pitch > 0:
            raise ValueError(f'mask pitch must be positive, got {self.pitch}')
        if not self.transmission:
            raise ValueError('mask needs at least one cell')
        if any(t < 0 or t > 1 for t in self.transmission):
            raise ValueError('mask transmission values must lie in [0, 1]')

    @classmethod
    def slits(cls, position: float, a: float, d_sep: float = 0.0):
        """ Single slit of width a, or two slits of width a whose centres are d_sep apart. """
        if d_sep == 0:
            return cls(position=position, pitch=a, transmission=(1.0,))
        cells = d_sep / a + 1
        n_cells = int(round(cells))
        if abs(cells - n_cells) > 1e-6:
            raise ValueError(f'slit separation {d_sep} must be a multiple of the slit width {a}')
        transmission = [0.0] * n_cells
        transmission[0] = transmission[-1] = 1.0
        return cls(position=position, pitch=a, transmission=tuple(transmission))

    @property
    def half_width(self) -> float:
        return len(self.transmission) * self.pitch / 2

    def transmission_at(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        index = np.floor((y - self.center + self.half_width) / self.pitch).astype(int)
        inside = (index >= 0) & (index < len(self.transmission))
        cells = np.asarray(self.transmission)
        return np.where(inside, cells[np.clip(index, 0, len(cells) - 1)], 0.0)


@dataclass(frozen=True)
class QuantumMirror:
    """
    Pumped crystal acting as a frequency-converting phase-conjugate mirror.
    `radius` is the pump wavefront radius (inf for a planar mirror).
    """
    position: float
    pump_omega: float
    radius: float = np.inf

    def __post_init__(self):
        if self.radius == 0:
            raise ValueError('spherical mirror radius must be non-zero')
        if not self.pump_omega > 0:
            raise ValueError(f'pump omega must be positive, got {self.pump_omega}')

    @property
    def planar(self) -> bool:
        return np.isinf(self.radius)

    def pump_directions(self, y: np.ndarray) -> np.ndarray:
        """ Unit pump directions (x, y, z) at heights y, pointing at the centre of curvature. """
        y = np.asarray(y, dtype=float)
        directions = np.zeros(y.shape + (3,))
        if self.planar:
            directions[..., 2] = 1.0
            return directions
        norm = np.hypot(y, self.radius)
        sign = np.sign(self.radius)
        directions[..., 0] = -y * sign / norm
        directions[..., 2] = np.abs(self.radius) / norm
        return directions


@dataclass(frozen=True)
class DetectorPlane:
    position: float
    pitch: float
    bins: int = 201
    center: float = 0.0

    def __post_init__(self):
        if not self.pitch > 0:
            raise ValueError(f'detector pitch must be positive, got {self.pitch}')
        if self.bins < 1:
            raise ValueError(f'detector needs at least one bin, got {self.bins}')

    @property
    def edges(self) -> np.ndarray:
        half = self.bins * self.pitch / 2
        return np.linspace(self.center - half, self.center + half, self.bins + 1)

    @property
    def bin_centers(self) -> np.ndarray:
        edges = self.edges
        return (edges[1:] + edges[:-1]) / 2

    def bin_index(self, y) -> np.ndarray:
        """ Bin of each hit, -1 outside the scan. """
        y = np.asarray(y, dtype=float)
        index = np.floor((y - self.edges[0]) / self.pitch).astype(int)
        return np.where((index >= 0) & (index < self.bins), index, -1)


Element = Union[ThinLens, Mask, QuantumMirror, DetectorPlane]


@dataclass(frozen=True)
class OpticalLayout:
    """ Elements along the unfolded axis, in propagation order. """
    elements: Tuple[Element, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'elements', tuple(self.elements))
        positions = [e.position for e in self.elements]
        if np.any(np.diff(positions) <= 0):
            raise ValueError(f'element positions must be strictly increasing, got {positions}')

    def of_type(self, kind) -> List[Element]:
        return [e for e in self.elements if isinstance(e, kind)]

    def first(self, kind) -> Optional[Element]:
        found = self.of_type(kind)
        return found[0] if found else None

    @property
    def mirror(self) -> Optional[QuantumMirror]:
        return self.first(QuantumMirror)

    def folded_arm(self) -> 'OpticalLayout':
        """
        The real signal arm: elements before the quantum mirror, re-measured from the
        mirror outwards, in the order a down-converted signal meets them.
        """
        mirror = self._require_mirror()
        before = [e for e in self.elements if e.position < mirror.position]
        return OpticalLayout(tuple(replace(e, position=mirror.position - e.position) for e in reversed(before)))

    def idler_arm(self) -> 'OpticalLayout':
        """ Elements after the quantum mirror, measured from the mirror. """
        mirror = self._require_mirror()
        after = [e for e in self.elements if e.position > mirror.position]
        return OpticalLayout(tuple(replace(e, position=e.position - mirror.position) for e in after))

    def with_element(self, old: Element, new: Element) -> 'OpticalLayout':
        return OpticalLayout(tuple(sorted((new if e is old else e for e in self.elements),
                                          key=lambda e: e.position)))

    def _require_mirror(self) -> QuantumMirror:
        mirror = self.mirror
        if mirror is None:
            raise ValueError('layout has no quantum mirror')
        return mirror


# Rays

@dataclass(frozen=True)
class Ray:
    origin: Tuple[float, float]  # (z, y)
    direction: Tuple[float, float]  # (dz, dy), unit norm
    omega: float
    weight: float = 1.0

    def __post_init__(self):
        direction = np.asarray(self.direction, dtype=float)
        norm = np.linalg.norm(direction)
        if not norm > 0:
            raise ValueError('ray direction must be non-zero')
        object.__setattr__(self, 'origin', tuple(float(v) for v in self.origin))
        object.__setattr__(self, 'direction', tuple(direction / norm))

    @property
    def slope(self) -> float:
        return self.direction[1] / self.direction[0]


@dataclass
class RayBundle:
    """ Vectorised rays: arrays of z, y, direction components, omega and weight. """
    z: np.ndarray
    y: np.ndarray
    dz: np.ndarray
    dy: np.ndarray
    omega: np.ndarray
    weight: np.ndarray
    alive: np.ndarray

    @classmethod
    def from_slopes(cls, z, y, slope, omega, weight=1.0):
        y = np.asarray(y, dtype=float)
        shape = y.shape
        slope = np.broadcast_to(np.asarray(slope, dtype=float), shape)
        norm = np.sqrt(1 + slope ** 2)
        return cls(z=np.broadcast_to(np.asarray(z, dtype=float), shape).copy(),
                   y=y.copy(),
                   dz=1 / norm,
                   dy=slope / norm,
                   omega=np.broadcast_to(np.asarray(omega, dtype=float), shape).copy(),
                   weight=np.broadcast_to(np.asarray(weight, dtype=float), shape).copy(),
                   alive=np.ones(shape, dtype=bool))

    @classmethod
    def from_ray(cls, ray: Ray):
        return cls(z=np.array([ray.origin[0]]), y=np.array([ray.origin[1]]),
                   dz=np.array([ray.direction[0]]), dy=np.array([ray.direction[1]]),
                   omega=np.array([float(ray.omega)]), weight=np.array([float(ray.weight)]),
                   alive=np.array([True]))

    @property
    def slope(self) -> np.ndarray:
        return self.dy / self.dz

    def propagate_to(self, z: float):
        self.y = self.y + (z - self.z) * self.slope
        self.z = np.full_like(self.y, z)

    def set_slopes(self, slope: np.ndarray):
        norm = np.sqrt(1 + slope ** 2)
        self.dz, self.dy = 1 / norm, slope / norm

    def to_ray(self, index: int = 0) -> Ray:
        return Ray(origin=(self.z[index], self.y[index]), direction=(self.dz[index], self.dy[index]),
                   omega=self.omega[index], weight=self.weight[index])


def _apply_lens(bundle: RayBundle, lens: ThinLens):
    bundle.set_slopes(bundle.slope - bundle.y / lens.focal_length)


def _apply_mask(bundle: RayBundle, mask: Mask):
    transmission = mask.transmission_at(bundle.y)
    bundle.weight = bundle.weight * transmission
    bundle.alive = bundle.alive & (transmission > 0)


def _apply_mirror(bundle: RayBundle, mirror: QuantumMirror, c: float = 1.0, pump_k: np.ndarray = None):
    """
    Returned photon (folded frame: travelling -z) is cross-converted with the local pump
    photon and leaves the crystal face conserving its transverse wavevector.
    `pump_k` replaces the mirror wavefront with one pump wavevector per ray.
    """
    returned_k = np.stack([bundle.dy, np.zeros_like(bundle.dy), -bundle.dz], axis=-1) * (bundle.omega / c)[:, None]
    if pump_k is None:
        pump_k = mirror.pump_directions(bundle.y) * (mirror.pump_omega / c)
    omega_out, k_out = cross_convert_wavevectors(mirror.pump_omega, pump_k, bundle.omega, returned_k)
    sin_out = k_out[:, 0] * c / omega_out
    escaping = np.abs(sin_out) < 1
    bundle.alive = bundle.alive & escaping
    sin_out = np.where(escaping, sin_out, 0.0)
    bundle.dy = sin_out
    bundle.dz = np.sqrt(1 - sin_out ** 2)
    bundle.omega = omega_out


def trace_bundle(bundle: RayBundle, layout: OpticalLayout, c: float = 1.0, pump_k: np.ndarray = None) -> RayBundle:
    """
    Element-by-element transfer: free propagation to each plane, then the element rule.
    Rays ending on an opaque cell or without an exit angle are marked not alive.
    The bundle is modified in place and returned.
    """
    for element in layout.elements:
        bundle.propagate_to(element.position)
        if isinstance(element, ThinLens):
            _apply_lens(bundle, element)
        elif isinstance(element, Mask):
            _apply_mask(bundle, element)
        elif isinstance(element, QuantumMirror):
            _apply_mirror(bundle, element, c=c, pump_k=pump_k)
    return bundle


def trace_ray(ray: Ray, layout: OpticalLayout, c: float = 1.0) -> Ray:
    if layout.elements and ray.origin[0] > layout.elements[0].position:
        raise ValueError(f'ray starts at z={ray.origin[0]}, after the first element')
    bundle = RayBundle.from_ray(ray)
    for element in layout.elements:
        bundle.propagate_to(element.position)
        if isinstance(element, ThinLens):
            _apply_lens(bundle, element)
        elif isinstance(element, Mask):
            _apply_mask(bundle, element)
            if not bundle.alive[0]:
                raise RayBlocked(f'ray blocked by mask at z={element.position}, y={bundle.y[0]}')
        elif isinstance(element, QuantumMirror):
            _apply_mirror(bundle, element, c=c)
            if not bundle.alive[0]:
                raise NoExitAngle(f'converted ray cannot leave the crystal at y={bundle.y[0]}')
    return bundle.to_ray()


@dataclass(frozen=True)
class ImageLocation:
    distance: float
    height: float
    magnification: float


def locate_image(Z_s: float, height: float, mirror_radius: float, omega_s: float, omega_i: float,
                 max_angle: float = 1e-3) -> ImageLocation:
    """
    Two-ray image finder behind a quantum mirror: a chief ray through the mirror vertex
    and a marginal ray `max_angle` away from it, traced from the object point.
    """
    mirror = QuantumMirror(position=Z_s, pump_omega=omega_s + omega_i, radius=mirror_radius)
    layout = OpticalLayout((mirror,))
    chief = -height / Z_s
    bundle = RayBundle.from_slopes(z=0.0, y=np.array([height, height]),
                                   slope=np.array([chief, chief + max_angle]), omega=omega_s)
    trace_bundle(bundle, layout)
    slope = bundle.slope
    if slope[0] == slope[1]:
        raise DegenerateConjugate('rays leave the mirror parallel: image at infinity')
    distance = -(bundle.y[0] - bundle.y[1]) / (slope[0] - slope[1])
    image_height = bundle.y[0] + distance * slope[0]
    ratio = image_height / height if height != 0 else 0.0
    return ImageLocation(distance=float(distance), height=float(image_height), magnification=float(ratio))
