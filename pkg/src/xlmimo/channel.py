"""Steering vectors, LoS wavefront models, the NLoS path model and scene sampling."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid
from .geometry import SceneGeometry, element_offsets, excess_matrix, subarray_centroids

LOS_MODELS = ("nuswm", "uswm", "parabolic", "sopm")


@dataclass(frozen=True)
class SteeringParams:
    """Linear (``phi``) and quadratic (``alpha``, 1/m) phase coefficients."""

    linear: float
    quadratic: float


@dataclass(frozen=True)
class NlosPath:
    gain: complex
    rx: SteeringParams
    tx: SteeringParams
    aoa: float
    aod: float
    rx_range: float
    tx_range: float

    @classmethod
    def from_geometry(cls, gain, aoa, aod, rx_range, tx_range):
        """Build a path from arrival/departure angles and scatterer ranges."""
        vr = np.cos(aoa)
        vt = -np.cos(aod)
        return cls(
            gain=complex(gain),
            rx=SteeringParams(float(vr), float((1 - vr**2) / (2 * rx_range))),
            tx=SteeringParams(float(vt), float(-(1 - vt**2) / (2 * tx_range))),
            aoa=float(aoa),
            aod=float(aod),
            rx_range=float(rx_range),
            tx_range=float(tx_range),
        )


@dataclass(frozen=True)
class NlosPathSet:
    paths: tuple = ()

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)


@dataclass(frozen=True)
class ChannelPair:
    los: np.ndarray
    nlos: np.ndarray
    truth_geom: SceneGeometry
    truth_paths: NlosPathSet = field(default_factory=NlosPathSet)

    @property
    def total(self):
        return self.los + self.nlos


@dataclass(frozen=True)
class SceneConfig:
    """Sampling boxes for random scenes. Angles are in degrees, ranges in meters."""

    range_min: float = 90.0
    range_max: float = 100.0
    angle_max_deg: float = 60.0
    n_paths: int = 3
    kappa: float = 4.0
    scatter_angle_deg: tuple = (30.0, 150.0)
    scatter_range: tuple = (5.0, 50.0)
    los_model: str = "nuswm"

    def __post_init__(self):
        if not 0 < self.range_min <= self.range_max:
            raise ConfigInvalid("need 0 < range_min <= range_max")
        if self.n_paths < 0 or self.kappa < 0:
            raise ConfigInvalid("n_paths and kappa must be non-negative")
        lo, hi = self.scatter_range
        if not 0 < lo <= hi:
            raise ConfigInvalid("scatterer ranges must be positive")
        if self.los_model not in LOS_MODELS:
            raise ConfigInvalid(f"unknown LoS model {self.los_model!r}")


def _wavenumber(config):
    return 2.0 * np.pi / config.wavelength


def steering_matrix(config, side, linear, quadratic, offsets=None):
    """Steering vectors as columns, one per ``(linear, quadratic)`` pair."""
    d = element_offsets(config, side) if offsets is None else np.asarray(offsets)
    lin = np.atleast_1d(np.asarray(linear, dtype=float))
    quad = np.atleast_1d(np.asarray(quadratic, dtype=float))
    phase = np.outer(d, lin) + np.outer(d * d, quad)
    return np.exp(-1j * _wavenumber(config) * phase)


def steering_vector(config, side, params):
    """Unit-modulus steering vector ``exp(-j k (delta phi + delta^2 alpha))``."""
    return steering_matrix(config, side, params.linear, params.quadratic)[:, 0]


def coupling_matrix(config, eta):
    """``exp(+j k eta delta_r delta_t)`` for every element pair."""
    dr = element_offsets(config, "rx")
    dt = element_offsets(config, "tx")
    return np.exp(1j * _wavenumber(config) * eta * np.outer(dr, dt))


def parabolic_channel(config, phi_rx, alpha_rx, phi_tx, alpha_tx, eta, gain=1.0):
    """Outer-product steering matrix times the coupling factor."""
    ar = steering_vector(config, "rx", SteeringParams(phi_rx, alpha_rx))
    at = steering_vector(config, "tx", SteeringParams(phi_tx, alpha_tx))
    return gain * np.outer(ar, at.conj()) * coupling_matrix(config, eta)


def sopm_channel(config, phi_rx, alpha_rx, phi_tx, alpha_tx, eta, gain=1.0):
    """Subarray-wise outer-product channel: block ``(i, j)`` is rank one."""
    k = _wavenumber(config)
    nr, nt = config.n_rx_sub, config.n_tx_sub
    nu_r = subarray_centroids(config, "rx")
    nu_t = subarray_centroids(config, "tx")
    dr = element_offsets(config, "rx")
    dt = element_offsets(config, "tx")
    H = np.empty((config.n_rx, config.n_tx), dtype=complex)
    for i in range(config.k_rx):
        rows = slice(i * nr, (i + 1) * nr)
        for j in range(config.k_tx):
            cols = slice(j * nt, (j + 1) * nt)
            g_ij = gain * np.exp(-1j * k * eta * nu_r[i] * nu_t[j])
            ar = steering_matrix(config, "rx", phi_rx - eta * nu_t[j], alpha_rx, dr[rows])[:, 0]
            at = steering_matrix(config, "tx", phi_tx + eta * nu_r[i], alpha_tx, dt[cols])[:, 0]
            H[rows, cols] = g_ij * np.outer(ar, at.conj())
    return H


def los_channel(config, geom, model="nuswm"):
    """LoS channel under one of the four wavefront models.

    All models take the value ``geom.los_gain`` at the reference elements.
    """
    g = geom.los_gain
    if model in ("nuswm", "uswm"):
        ex = excess_matrix(config, geom, "exact")
        H = g * np.exp(-1j * _wavenumber(config) * ex)
        if model == "nuswm":
            H = H * (geom.range_m / (geom.range_m + ex))
        return H
    args = (geom.phi_rx, geom.alpha_rx, geom.phi_tx, geom.alpha_tx, geom.eta, g)
    if model == "parabolic":
        return parabolic_channel(config, *args)
    if model == "sopm":
        return sopm_channel(config, *args)
    raise ValueError(f"unknown LoS model {model!r}")


def nlos_channel(config, paths):
    """Sum of ``L`` rank-one path contributions scaled by ``sqrt(1/L)``."""
    H = np.zeros((config.n_rx, config.n_tx), dtype=complex)
    if len(paths) == 0:
        return H
    for p in paths:
        ar = steering_vector(config, "rx", p.rx)
        at = steering_vector(config, "tx", p.tx)
        H += p.gain * np.outer(ar, at.conj())
    return H * np.sqrt(1.0 / len(paths))


def sample_scene(config, rng, scene_cfg=None):
    """Draw a random LoS geometry plus NLoS paths and synthesize both channel parts."""
    sc = SceneConfig() if scene_cfg is None else scene_cfg
    amax = np.deg2rad(sc.angle_max_deg)
    R = rng.uniform(sc.range_min, sc.range_max)
    er, et, az = rng.uniform(-amax, amax, size=3)
    g = np.sqrt(sc.kappa / (1.0 + sc.kappa)) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    geom = SceneGeometry(float(R), float(er), float(et), float(az), complex(g))

    lo, hi = np.deg2rad(sc.scatter_angle_deg)
    paths = []
    var = 1.0 / (1.0 + sc.kappa)
    for _ in range(sc.n_paths):
        gl = np.sqrt(var / 2) * (rng.standard_normal() + 1j * rng.standard_normal())
        aoa, aod = rng.uniform(lo, hi, size=2)
        rr, rt = rng.uniform(*sc.scatter_range, size=2)
        paths.append(NlosPath.from_geometry(gl, aoa, aod, rr, rt))
    path_set = NlosPathSet(tuple(paths))
    return ChannelPair(
        los=los_channel(config, geom, sc.los_model),
        nlos=nlos_channel(config, path_set),
        truth_geom=geom,
        truth_paths=path_set,
    )


def matrix_to_csv(M, path):
    """Write a complex matrix as ``row,col,real,imag`` lines (0-based indices)."""
    M = np.asarray(M)
    r, c = np.indices(M.shape)
    table = np.column_stack([r.ravel(), c.ravel(), M.real.ravel(), M.imag.ravel()])
    np.savetxt(path, table, delimiter=",", header="row,col,real,imag", comments="",
               fmt=["%d", "%d", "%.17g", "%.17g"])


def matrix_from_csv(path):
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    rows, cols = int(table[:, 0].max()) + 1, int(table[:, 1].max()) + 1
    M = np.zeros((rows, cols), dtype=complex)
    M[table[:, 0].astype(int), table[:, 1].astype(int)] = table[:, 2] + 1j * table[:, 3]
    return M
