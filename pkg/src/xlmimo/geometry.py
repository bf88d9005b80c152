"""Array geometry, inter-element distances and near-field validity criteria.

Two ULAs face each other at reference distance ``R``. Element offsets are
measured from each array centre; the receive array is tilted by elevation
``elev_rx`` and azimuth ``azim_rx``, the transmit array by ``elev_tx``.
Antenna and subarray indices passed to the scalar helpers are 1-based, as
in the closed-form expressions they evaluate.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid, IndexOutOfRange, SearchFailed

SPEED_OF_LIGHT = 3e8
_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ArrayConfig:
    """Static geometry of a partially-connected hybrid link.

    ``spacing`` defaults to half a wavelength.
    """

    n_rx: int
    n_tx: int
    k_rx: int = 1
    k_tx: int = 1
    carrier_freq: float = 60e9
    spacing: float = None

    def __post_init__(self):
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.wavelength / 2)
        if min(self.n_rx, self.n_tx, self.k_rx, self.k_tx) < 1:
            raise ConfigInvalid("antenna and RF-chain counts must be positive")
        if self.n_rx % self.k_rx or self.n_tx % self.k_tx:
            raise ConfigInvalid("RF-chain counts must divide antenna counts")
        if self.spacing <= 0 or self.carrier_freq <= 0:
            raise ConfigInvalid("spacing and carrier frequency must be positive")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def n_rx_sub(self):
        return self.n_rx // self.k_rx

    @property
    def n_tx_sub(self):
        return self.n_tx // self.k_tx

    @property
    def aperture_rx(self):
        return (self.n_rx - 1) * self.spacing

    @property
    def aperture_tx(self):
        return (self.n_tx - 1) * self.spacing

    @property
    def sub_aperture_rx(self):
        return (self.n_rx_sub - 1) * self.spacing

    @property
    def sub_aperture_tx(self):
        return (self.n_tx_sub - 1) * self.spacing

    def size(self, side):
        """``(antennas, subarrays)`` on one side."""
        if side == "rx":
            return self.n_rx, self.k_rx
        if side == "tx":
            return self.n_tx, self.k_tx
        raise ValueError(f"side must be 'rx' or 'tx', got {side!r}")


@dataclass(frozen=True)
class SceneGeometry:
    """LoS geometry; angles in radians, range in meters."""

    range_m: float
    elev_rx: float
    elev_tx: float
    azim_rx: float
    los_gain: complex = 1.0 + 0.0j

    def __post_init__(self):
        if not self.range_m > 0:
            raise ConfigInvalid("range must be positive")

    @property
    def phi_rx(self):
        return math.sin(self.elev_rx) * math.cos(self.azim_rx)

    @property
    def phi_tx(self):
        return math.sin(self.elev_tx)

    @property
    def alpha_rx(self):
        return (1.0 - self.phi_rx**2) / (2.0 * self.range_m)

    @property
    def alpha_tx(self):
        return -(1.0 - self.phi_tx**2) / (2.0 * self.range_m)

    @property
    def eta(self):
        return math.cos(self.elev_rx) * math.cos(self.elev_tx) / self.range_m


def element_offsets(config, side):
    """Offsets of all elements on ``side`` from the array centre."""
    n, _ = config.size(side)
    return (np.arange(1, n + 1) - (n + 1) / 2.0) * config.spacing


def element_offset(config, side, index):
    n, _ = config.size(side)
    if not 1 <= index <= n:
        raise IndexOutOfRange(f"antenna index {index} outside 1..{n}")
    return (index - (n + 1) / 2.0) * config.spacing


def subarray_centroids(config, side):
    n, k = config.size(side)
    ns = n // k
    return ((2 * np.arange(1, k + 1) - 1) * ns - n) * config.spacing / 2.0


def subarray_centroid(config, side, subarray):
    n, k = config.size(side)
    if not 1 <= subarray <= k:
        raise IndexOutOfRange(f"subarray index {subarray} outside 1..{k}")
    return ((2 * subarray - 1) * (n // k) - n) * config.spacing / 2.0


def element_centroids(config, side):
    """Centroid of the subarray each element belongs to, per element."""
    n, k = config.size(side)
    return np.repeat(subarray_centroids(config, side), n // k)


# -- distance models ---------------------------------------------------------


def _path_terms(R, tr, tt, pr, dr, dt):
    """Pieces of the squared distance ``(R + lin)^2 + b^2 + c^2``."""
    lin = dr * np.sin(tr) * np.cos(pr) - dt * np.sin(tt)
    b = dr * np.sin(tr) * np.sin(pr)
    c = dr * np.cos(tr) - dt * np.cos(tt)
    return lin, b, c


def _excess(model, R, tr, tt, pr, dr, dt, nur=None, nut=None):
    """Distance minus ``R`` for one of ``exact``, ``parabolic``, ``sopm``.

    All arguments broadcast against each other.
    """
    lin, b, c = _path_terms(R, tr, tt, pr, dr, dt)
    q = b * b + c * c
    if model == "exact":
        return _exact_excess(R, lin, q)
    par = lin + q / (2.0 * R)
    if model == "parabolic":
        return par
    if model == "sopm":
        eta = np.cos(tr) * np.cos(tt) / R
        return par + eta * (dr - nur) * (dt - nut)
    raise ValueError(f"unknown distance model {model!r}")


def _exact_excess(R, lin, q):
    # r - R without cancellation when r is close to R
    return (2.0 * R * lin + lin * lin + q) / (np.sqrt((R + lin) ** 2 + q) + R)


def _model_error(model, R, tr, tt, pr, dr, dt, nur, nut):
    """``exact - model`` distance, sharing the path terms."""
    lin, b, c = _path_terms(R, tr, tt, pr, dr, dt)
    q = b * b + c * c
    err = _exact_excess(R, lin, q) - lin - q / (2.0 * R)
    if model == "sopm":
        err = err - np.cos(tr) * np.cos(tt) / R * (dr - nur) * (dt - nut)
    elif model != "parabolic":
        raise ValueError(f"unknown approximate model {model!r}")
    return err


def _pair_args(config, geom, m, n):
    dr = element_offset(config, "rx", m)
    dt = element_offset(config, "tx", n)
    nur = subarray_centroid(config, "rx", (m - 1) // config.n_rx_sub + 1)
    nut = subarray_centroid(config, "tx", (n - 1) // config.n_tx_sub + 1)
    angles = (geom.elev_rx, geom.elev_tx, geom.azim_rx)
    return angles, dr, dt, nur, nut


def exact_distance(config, geom, m, n):
    """Spherical-wave distance between receive element ``m`` and transmit element ``n``."""
    (tr, tt, pr), dr, dt, _, _ = _pair_args(config, geom, m, n)
    return geom.range_m + float(_excess("exact", geom.range_m, tr, tt, pr, dr, dt))


def parabolic_distance(config, geom, m, n):
    """Fresnel (second-order) distance in transformed-parameter form."""
    _, dr, dt, _, _ = _pair_args(config, geom, m, n)
    return (
        geom.range_m
        + dr * dr * geom.alpha_rx
        - dt * dt * geom.alpha_tx
        + dr * geom.phi_rx
        - dt * geom.phi_tx
        - geom.eta * dr * dt
    )


def sopm_distance(config, geom, m, n):
    """Subarray-wise outer-product distance: the coupled term linearized at the subarray centroids."""
    _, dr, dt, nur, nut = _pair_args(config, geom, m, n)
    eta = geom.eta
    return (
        geom.range_m
        + dr * dr * geom.alpha_rx
        - dt * dt * geom.alpha_tx
        + dr * (geom.phi_rx - eta * nut)
        - dt * (geom.phi_tx + eta * nur)
        + eta * nur * nut
    )


def distance_matrix(config, geom, model="exact"):
    """All ``N_r x N_t`` element distances under ``model``."""
    dr = element_offsets(config, "rx")[:, None]
    dt = element_offsets(config, "tx")[None, :]
    nur = element_centroids(config, "rx")[:, None]
    nut = element_centroids(config, "tx")[None, :]
    ex = _excess(model, geom.range_m, geom.elev_rx, geom.elev_tx, geom.azim_rx,
                 dr, dt, nur, nut)
    return geom.range_m + ex


def excess_matrix(config, geom, model="exact"):
    """Like :func:`distance_matrix` minus ``R``, computed without cancellation."""
    dr = element_offsets(config, "rx")[:, None]
    dt = element_offsets(config, "tx")[None, :]
    nur = element_centroids(config, "rx")[:, None]
    nut = element_centroids(config, "tx")[None, :]
    return _excess(model, geom.range_m, geom.elev_rx, geom.elev_tx, geom.azim_rx,
                   dr, dt, nur, nut)


# -- closed-form criteria ----------------------------------------------------


def fraunhofer_distance(aperture, wavelength):
    return 2.0 * aperture**2 / wavelength


def mimo_ard(config):
    """Advanced Rayleigh distance of the whole-array outer-product model."""
    return 4.0 * config.aperture_rx * config.aperture_tx / config.wavelength


def sopd(config):
    """Distance beyond which the subarray-wise model's phase error stays under pi/8."""
    return 4.0 * config.sub_aperture_rx * config.sub_aperture_tx / config.wavelength


def lemma1_bound(config, range_m):
    """Leading-order worst-case phase error (rad) of the subarray-wise model at ``range_m``."""
    return (np.pi * config.sub_aperture_rx * config.sub_aperture_tx
            / (2.0 * range_m * config.wavelength))


# -- worst-case searches -----------------------------------------------------

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo, hi, tol=1e-7, max_iter=80):
    """Golden-section search for a maximum of ``f`` on ``[lo, hi]``."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _element_subset(config, side, n_even=17):
    """Indices (0-based) of array ends, subarray edges and evenly spaced elements."""
    n, k = config.size(side)
    ns = n // k
    idx = set(np.linspace(0, n - 1, min(n, n_even)).round().astype(int).tolist())
    for s in range(k):
        idx.update((s * ns, s * ns + ns - 1))
    return np.array(sorted(idx))


def _angle_search(objective, n_grid=64, top_k=8, sweeps=2):
    """Maximize ``objective(tr, tt, pr)`` over the full angle box.

    The objectives used here are invariant under ``theta -> theta + pi`` on
    either array (it mirrors the element set) and under ``phi -> -phi``, so
    the coarse grid (spacing ``2*pi/n_grid``) covers ``[0, pi)`` for both
    elevations and ``[0, pi]`` for the azimuth. The ``top_k`` best grid cells
    are then refined one coordinate at a time by golden-section search
    within one grid step.
    """
    step = _TWO_PI / n_grid
    th = np.arange(n_grid // 2) * step
    ph = np.arange(n_grid // 2 + 1) * step
    TR, TT, PR = np.meshgrid(th, th, ph, indexing="ij")
    TR, TT, PR = TR.ravel(), TT.ravel(), PR.ravel()
    vals = objective(TR, TT, PR)
    order = np.argsort(-vals, kind="stable")[:top_k]

    def scalar(x):
        return float(objective(np.array([x[0]]), np.array([x[1]]), np.array([x[2]]))[0])

    best_x, best_v = None, -np.inf
    for o in order:
        x = [TR[o], TT[o], PR[o]]
        v = float(vals[o])
        for _ in range(sweeps):
            for c in range(3):
                def along(t, c=c):
                    y = list(x)
                    y[c] = t
                    return scalar(y)
                t, fv = _golden_max(along, x[c] - step, x[c] + step)
                # keep the grid point unless the refinement strictly improves
                if fv > v:
                    x[c], v = t, fv
        if v > best_v:
            best_x, best_v = x, v
    return best_x, best_v


def _chunked_max(fn, A, chunk):
    out = np.empty(A)
    for s in range(0, A, chunk):
        out[s:s + chunk] = fn(slice(s, min(A, s + chunk)))
    return out


def _phase_error_objective(config, R, model, rx_idx=None, tx_idx=None):
    dr_all = element_offsets(config, "rx")
    dt_all = element_offsets(config, "tx")
    nur_all = element_centroids(config, "rx")
    nut_all = element_centroids(config, "tx")
    rx_idx = np.arange(config.n_rx) if rx_idx is None else rx_idx
    tx_idx = np.arange(config.n_tx) if tx_idx is None else tx_idx
    dr = dr_all[rx_idx][None, :, None]
    dt = dt_all[tx_idx][None, None, :]
    nur = nur_all[rx_idx][None, :, None]
    nut = nut_all[tx_idx][None, None, :]
    k = _TWO_PI / config.wavelength
    chunk = max(1, 2_000_000 // (dr.size * dt.size))

    def objective(tr, tt, pr):
        def block(sl):
            a = (tr[sl][:, None, None], tt[sl][:, None, None], pr[sl][:, None, None])
            err = _model_error(model, R, *a, dr, dt, nur, nut)
            return k * np.abs(err).max(axis=(1, 2))
        return _chunked_max(block, tr.size, chunk)

    return objective


def max_phase_error(config, range_m, model="parabolic", grid_density=64):
    """Worst phase error (rad) of ``model`` against the spherical wave at ``range_m``.

    Returns ``(value, (theta_rx, theta_tx, azim_rx))``.
    """
    sub = _phase_error_objective(config, range_m, model,
                                 _element_subset(config, "rx"), _element_subset(config, "tx"))
    x, _ = _angle_search(sub, grid_density)
    full = _phase_error_objective(config, range_m, model)
    v = float(full(*(np.array([t]) for t in x))[0])
    return v, tuple(x)


def _bisect_distance(ok, lo=0.1, hi=10_000.0, tol=0.01):
    """Smallest ``R`` in ``[lo, hi]`` with ``ok(R)`` true, assuming monotonicity."""
    if ok(lo):
        return lo
    if not ok(hi):
        raise SearchFailed(f"criterion not met anywhere in [{lo}, {hi}] m")
    # geometric bracketing first; the criteria of interest sit near the low end
    b = lo
    while b < hi:
        nb = min(2.0 * b, hi)
        if ok(nb):
            lo, hi = b, nb
            break
        b = nb
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def parabolic_validity_distance(config, threshold=np.pi / 8, grid_density=64):
    """Smallest range at which the Fresnel model's worst phase error is below ``threshold``."""
    if config.aperture_rx == 0 and config.aperture_tx == 0:
        return 0.0
    rx_idx, tx_idx = _element_subset(config, "rx"), _element_subset(config, "tx")

    def ok(R):
        obj = _phase_error_objective(config, R, "parabolic", rx_idx, tx_idx)
        _, v = _angle_search(obj, grid_density)
        return v <= threshold

    return _bisect_distance(ok)


def _ratio(r, R, definition, axis):
    if definition == "pair":
        return (r.min(axis=axis) / r.max(axis=axis)) ** 2
    if definition == "reference":
        return (R / r.max(axis=axis)) ** 2
    raise ValueError(f"definition must be 'pair' or 'reference', got {definition!r}")


def _upd_ratio_los(config, R, rx_idx, tx_idx, definition):
    dr = element_offsets(config, "rx")[rx_idx][None, :, None]
    dt = element_offsets(config, "tx")[tx_idx][None, None, :]
    chunk = max(1, 2_000_000 // (dr.size * dt.size))

    def objective(tr, tt, pr):
        def block(sl):
            a = (tr[sl][:, None, None], tt[sl][:, None, None], pr[sl][:, None, None])
            r = R + _excess("exact", R, *a, dr, dt)
            return -_ratio(r, R, definition, (1, 2))  # the search maximizes; we want the worst ratio
        return _chunked_max(block, tr.size, chunk)

    return objective


def power_ratio(config, range_m, mode="los", grid_density=64, definition="pair"):
    """Worst-case (over orientations) element power ratio.

    ``los``: element pairs of the two arrays. ``nlos``: receive array to a
    point scatterer at ``range_m``. With ``definition="pair"`` the ratio is
    weakest over strongest element power; with ``"reference"`` it is the
    weakest element power over the power at the reference distance.
    """
    if mode == "los":
        obj = _upd_ratio_los(config, range_m, _element_subset(config, "rx"),
                             _element_subset(config, "tx"), definition)
        x, v = _angle_search(obj, grid_density)
        full = _upd_ratio_los(config, range_m, np.arange(config.n_rx),
                              np.arange(config.n_tx), definition)
        return float(-full(*(np.array([t]) for t in x))[0])
    if mode == "nlos":
        d = element_offsets(config, "rx")

        def ratio(rho):
            rho = np.atleast_1d(rho)[:, None]
            r = np.sqrt(range_m**2 + d**2 - 2.0 * range_m * d * np.cos(rho))
            return _ratio(r, range_m, definition, 1)

        step = _TWO_PI / grid_density
        grid = np.arange(grid_density) * step
        vals = ratio(grid)
        i = int(np.argmin(vals))
        _, v = _golden_max(lambda t: -float(ratio(t)[0]), grid[i] - step, grid[i] + step)
        return min(float(vals[i]), -v)
    raise ValueError(f"mode must be 'los' or 'nlos', got {mode!r}")


def uniform_power_distance(config, threshold=0.9, mode="los", grid_density=64,
                           definition="pair"):
    """Smallest range at which the worst-case element power ratio reaches ``threshold``.

    See :func:`power_ratio` for ``definition``.
    """
    if not 0 < threshold <= 1:
        raise ConfigInvalid("threshold must lie in (0, 1]")
    aperture = config.aperture_rx + (config.aperture_tx if mode == "los" else 0.0)
    if aperture == 0:
        return 0.0
    if threshold == 1:
        return math.inf
    return _bisect_distance(
        lambda R: power_ratio(config, R, mode, grid_density, definition) >= threshold)


@dataclass(frozen=True)
class WorstCase:
    """Canonical worst-case configuration: both offsets non-negative, azimuth folded to ``[0, pi/2]``."""

    theta_rx: float
    theta_tx: float
    azim_rx: float
    delta_rx: float
    delta_tx: float


@dataclass(frozen=True)
class PhaseErrorReport:
    max_error_rad: float
    argmax_config: WorstCase
    analytic_bound_rad: float
    structure_ok: bool = field(default=False)

    @property
    def ratio(self):
        return self.max_error_rad / self.analytic_bound_rad


def _wrap(x):
    """Wrap an angle to ``(-pi, pi]``."""
    return math.pi - (math.pi - x) % _TWO_PI


def _canonical(tr, tt, pr, dr, dt):
    if dr < 0:
        dr, tr = -dr, tr + math.pi
    if dt < 0:
        dt, tt = -dt, tt + math.pi
    pr = _wrap(pr)
    if pr < 0:
        pr = -pr
    if pr > math.pi / 2:
        # (theta, phi) -> (-theta, phi + pi) leaves the element coordinates unchanged
        pr, tr = math.pi - pr, -tr
    return WorstCase(tr % _TWO_PI, tt % _TWO_PI, pr, dr, dt)


def lemma1_bruteforce(config, range_m, grid_density=64):
    """Brute-force worst phase error of the subarray-wise model against the spherical wave.

    The angle box is searched on a ``grid_density``-per-turn grid with
    golden-section refinement; antenna pairs are searched exhaustively at
    the refined angles. ``structure_ok`` tells whether the maximizer has
    edge antennas on both arrays, opposite elevations and zero azimuth (up
    to one grid step; the azimuth is free when the receive array is
    broadside).
    """
    v, (tr, tt, pr) = max_phase_error(config, range_m, "sopm", grid_density)
    dr = element_offsets(config, "rx")[:, None]
    dt = element_offsets(config, "tx")[None, :]
    nur = element_centroids(config, "rx")[:, None]
    nut = element_centroids(config, "tx")[None, :]
    err = np.abs(_model_error("sopm", range_m, tr, tt, pr, dr, dt, nur, nut))
    m, n = np.unravel_index(int(np.argmax(err)), err.shape)
    wc = _canonical(tr, tt, pr, float(dr[m, 0]), float(dt[0, n]))

    tol = _TWO_PI / grid_density
    edges = (math.isclose(wc.delta_rx, config.aperture_rx / 2, rel_tol=1e-9, abs_tol=1e-12)
             and math.isclose(wc.delta_tx, config.aperture_tx / 2, rel_tol=1e-9, abs_tol=1e-12))
    opposite = abs(_wrap(wc.theta_tx - wc.theta_rx - math.pi)) <= tol
    azimuth = wc.azim_rx <= tol or abs(math.sin(wc.theta_rx)) <= math.sin(tol)
    return PhaseErrorReport(
        max_error_rad=v,
        argmax_config=wc,
        analytic_bound_rad=float(lemma1_bound(config, range_m)),
        structure_ok=bool(edges and opposite and azimuth),
    )
