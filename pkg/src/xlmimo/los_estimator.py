"""Line-of-sight estimation by alternating subarray-wise array-gain maximization.

Per receive/transmit subarray pair the LoS block is rank one, with steering
parameters ``(xi, alpha)`` that differ across subarrays only through
``xi``. The estimator alternates grid argmax steps over the receive and
transmit parameters, recovers ``(phi_r, phi_t, eta)`` from the per-subarray
``xi`` by linear regression and fits the complex gain by least squares.
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .channel import parabolic_channel
from .errors import EtaUnidentifiable, ZeroRegressor, ZeroVector
from .geometry import element_offsets, subarray_centroids
from .numerics import least_squares, solve_lower

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ParamGrid:
    """Candidate values of ``xi`` (linear) and ``alpha`` (quadratic, 1/m) on one side."""

    xi_points: np.ndarray
    alpha_points: np.ndarray

    @classmethod
    def uniform(cls, side, q_xi=320, q_alpha=7, r_min=10.0, xi_range=(-1.0, 1.0)):
        """Uniform grids; ``alpha`` spans ``[0, 1/(2 r_min)]`` (negated on the transmit side)."""
        xi = np.linspace(xi_range[0], xi_range[1], q_xi)
        alpha = np.linspace(0.0, 1.0 / (2.0 * r_min), q_alpha)
        if side == "tx":
            alpha = -alpha
        return cls(xi, alpha)

    @property
    def size(self):
        return len(self.alpha_points) * len(self.xi_points)

    def column(self, a, x):
        """Flat candidate index of ``alpha_points[a]``, ``xi_points[x]``."""
        return a * len(self.xi_points) + x


def make_grids(q_xi=320, q_alpha=7, r_min=10.0):
    """Receive and transmit grids with matching sizes."""
    return (ParamGrid.uniform("rx", q_xi, q_alpha, r_min),
            ParamGrid.uniform("tx", q_xi, q_alpha, r_min))


@dataclass(frozen=True)
class AsagmState:
    """Grid indices of the current estimates; values are read from the grids."""

    xi_rx_idx: tuple
    xi_tx_idx: tuple
    alpha_rx_idx: int
    alpha_tx_idx: int
    objective: float = 0.0


@dataclass
class LosEstimate:
    phi_rx: float
    phi_tx: float
    alpha_rx: float
    alpha_tx: float
    eta: float
    gain: complex
    channel: np.ndarray
    xi_rx: np.ndarray = None
    xi_tx: np.ndarray = None
    state: AsagmState = None
    trace: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    eta_identifiable: bool = True


def _normalize_columns(E):
    n = np.linalg.norm(E, axis=0)
    if np.any(n == 0):
        raise ZeroVector("effective steering vector vanished")
    return E / n


def _side_offsets(config, side, b):
    n, k = config.size(side)
    ns = n // k
    return element_offsets(config, side)[(b - 1) * ns:b * ns]


def _block_steering(config, side, b, linear, quadratic):
    d = _side_offsets(config, side, b)
    k = _TWO_PI / config.wavelength
    return np.exp(-1j * k * (np.outer(d, linear) + np.outer(d * d, quadratic)))


def effective_steering(side, subarray_index, frontend, whitener, params):
    """Normalized steering of one subarray as seen through the (whitened) analog beams.

    Receive side: ``L_i^{-1} W_i^H a_r[block i]``; transmit side:
    ``F_j^H a_t[block j]``. ``whitener`` is ignored on the transmit side.
    """
    cfg = frontend.config
    a = _block_steering(cfg, side, subarray_index, [params.linear], [params.quadratic])
    if side == "rx":
        Wi = frontend.combiner_blocks[subarray_index - 1]
        v = solve_lower(whitener, Wi.conj().T @ a)
    else:
        v = frontend.precoder_blocks[subarray_index - 1].conj().T @ a
    return _normalize_columns(v)[:, 0]


def gain_metric(obs, a_rx, a_tx):
    """``|a_rx^H Ybar a_tx|`` for normalized effective steering vectors."""
    return float(abs(np.vdot(a_rx, obs @ a_tx)))


class AsagmProblem:
    """Whitened observation blocks and precomputed effective-steering tables.

    Parameters
    ----------
    Y : ndarray
        Raw observation ``M_r x M_t``.
    frontend : HybridFrontend
    grids : tuple of ParamGrid
        Receive and transmit grids.
    """

    def __init__(self, Y, frontend, grids):
        self.frontend = frontend
        self.config = cfg = frontend.config
        self.grid_rx, self.grid_tx = grids
        Ybar = frontend.whiten_rows(Y)
        mr, mt = frontend.m_rx_sub, frontend.m_tx_sub
        self.blocks = [[Ybar[i * mr:(i + 1) * mr, j * mt:(j + 1) * mt]
                        for j in range(cfg.k_tx)] for i in range(cfg.k_rx)]
        self.rows = [Ybar[i * mr:(i + 1) * mr] for i in range(cfg.k_rx)]
        self.E_rx = [self._table("rx", i) for i in range(1, cfg.k_rx + 1)]
        self.E_tx = [self._table("tx", j) for j in range(1, cfg.k_tx + 1)]
        self.counters = {"metric_evals": 0, "metric_macs": 0}

    def _table(self, side, b):
        grid = self.grid_rx if side == "rx" else self.grid_tx
        lin = np.tile(grid.xi_points, len(grid.alpha_points))
        quad = np.repeat(grid.alpha_points, len(grid.xi_points))
        A = _block_steering(self.config, side, b, lin, quad)
        if side == "rx":
            L = self.frontend.whiteners[b - 1]
            Wi = self.frontend.combiner_blocks[b - 1]
            return _normalize_columns(solve_lower(L, Wi.conj().T @ A))
        return _normalize_columns(self.frontend.precoder_blocks[b - 1].conj().T @ A)

    def _count(self, n_metrics, length):
        self.counters["metric_evals"] += n_metrics
        self.counters["metric_macs"] += n_metrics * length

    def _rx_vec(self, state, i, j):
        return self.E_rx[i][:, self.grid_rx.column(state.alpha_rx_idx, state.xi_rx_idx[j])]

    def _tx_vec(self, state, i, j):
        return self.E_tx[j][:, self.grid_tx.column(state.alpha_tx_idx, state.xi_tx_idx[i])]

    def objective(self, state):
        """Sum of ``G_ij`` over all subarray pairs, accumulated in a fixed order."""
        kr, kt = self.config.k_rx, self.config.k_tx
        return math.fsum(
            gain_metric(self.blocks[i][j], self._rx_vec(state, i, j), self._tx_vec(state, i, j))
            for i in range(kr) for j in range(kt))

    @staticmethod
    def _argmax(S, grid):
        """Per-alpha best xi for every column of ``S`` (candidates x subarrays), then best alpha."""
        S = S.reshape(len(grid.alpha_points), len(grid.xi_points), -1)
        best_xi = np.argmax(S, axis=1)
        total = np.take_along_axis(S, best_xi[:, None, :], axis=1)[:, 0, :].sum(axis=1)
        a = int(np.argmax(total))
        return a, tuple(int(x) for x in best_xi[a])

    def receive_scores(self, state, noncoherent=False):
        cfg = self.config
        S = np.zeros((self.grid_rx.size, cfg.k_tx))
        mt = self.frontend.m_tx_sub
        for i in range(cfg.k_rx):
            if noncoherent:
                P = self.E_rx[i].conj().T @ self.rows[i]
                V = np.linalg.norm(P.reshape(P.shape[0], cfg.k_tx, mt), axis=2)
                self._count(self.grid_rx.size * cfg.k_tx, self.rows[i].shape[0] * mt)
            else:
                Z = np.column_stack([self.blocks[i][j] @ self._tx_vec(state, i, j)
                                     for j in range(cfg.k_tx)])
                V = np.abs(self.E_rx[i].conj().T @ Z)
                self._count(self.grid_rx.size * cfg.k_tx, Z.shape[0])
            S += V
        return S

    def transmit_scores(self, state):
        cfg = self.config
        S = np.zeros((self.grid_tx.size, cfg.k_rx))
        for j in range(cfg.k_tx):
            Z = np.column_stack([self.blocks[i][j].conj().T @ self._rx_vec(state, i, j)
                                 for i in range(cfg.k_rx)])
            S += np.abs(self.E_tx[j].conj().T @ Z)
            self._count(self.grid_tx.size * cfg.k_rx, Z.shape[0])
        return S


def _accept(problem, old, new, guard):
    new = replace(new, objective=problem.objective(new))
    # a strict argmax can only lose to the previous state by rounding; keep the old one then
    if guard and new.objective < old.objective:
        return old
    return new


def asagm_receive_step(state, problem, noncoherent=False):
    """Update ``alpha_r`` and the ``K_t`` receive ``xi`` given the transmit estimates.

    With ``noncoherent=True`` the transmit estimates are ignored and the
    row energy ``||a_r^H Ybar_ij||`` replaces the bilinear metric.
    """
    S = problem.receive_scores(state, noncoherent)
    a, xi = problem._argmax(S, problem.grid_rx)
    new = replace(state, alpha_rx_idx=a, xi_rx_idx=xi)
    return _accept(problem, state, new, guard=not noncoherent)


def asagm_transmit_step(state, problem, guard=True):
    """Mirror of :func:`asagm_receive_step` on the transmit side."""
    S = problem.transmit_scores(state)
    a, xi = problem._argmax(S, problem.grid_tx)
    new = replace(state, alpha_tx_idx=a, xi_tx_idx=xi)
    return _accept(problem, state, new, guard)


class LinearFit(NamedTuple):
    phi_rx: float
    phi_tx: float
    eta: float
    eta_identifiable: bool


def fit_linear_params(xi_rx, xi_tx, nu_rx, nu_tx, centroid_scale=1.0):
    """Least-squares ``(phi_r, phi_t, eta)`` from the per-subarray linear coefficients.

    The model is ``xi_rx[j] = phi_r - eta s nu_tx[j]`` and
    ``xi_tx[i] = phi_t + eta s nu_rx[i]`` with ``s = centroid_scale``.
    When both centroid sets sum to zero the problem decouples and is
    solved in closed form.
    """
    xi_rx = np.asarray(xi_rx, dtype=float)
    xi_tx = np.asarray(xi_tx, dtype=float)
    nr = centroid_scale * np.asarray(nu_rx, dtype=float)
    nt = centroid_scale * np.asarray(nu_tx, dtype=float)
    energy = math.fsum(nr * nr) + math.fsum(nt * nt)
    if energy == 0.0:
        warnings.warn("all centroids are zero; eta is not identifiable", EtaUnidentifiable,
                      stacklevel=2)
        return LinearFit(float(np.mean(xi_rx)), float(np.mean(xi_tx)), 0.0, False)
    scale = math.fsum(np.abs(nr)) + math.fsum(np.abs(nt))
    if abs(math.fsum(nr)) <= 1e-12 * scale and abs(math.fsum(nt)) <= 1e-12 * scale:
        eta = (math.fsum(nr * xi_tx) - math.fsum(nt * xi_rx)) / energy
        return LinearFit(math.fsum(xi_rx) / len(xi_rx), math.fsum(xi_tx) / len(xi_tx), eta, True)
    A = np.zeros((len(xi_rx) + len(xi_tx), 3))
    A[:len(xi_rx), 0] = 1.0
    A[:len(xi_rx), 2] = -nt
    A[len(xi_rx):, 1] = 1.0
    A[len(xi_rx):, 2] = nr
    x = least_squares(A, np.concatenate([xi_rx, xi_tx]))
    return LinearFit(float(x[0]), float(x[1]), float(x[2]), True)


def fit_gain(Y, frontend, phi_rx, alpha_rx, phi_tx, alpha_tx, eta):
    """Scalar least-squares gain of the unit-gain parabolic regressor ``W^H A F``."""
    A = parabolic_channel(frontend.config, phi_rx, alpha_rx, phi_tx, alpha_tx, eta)
    X = frontend.W.conj().T @ A @ frontend.F
    den = np.vdot(X, X).real
    if den == 0.0:
        raise ZeroRegressor("LoS regressor is zero")
    return complex(np.vdot(X, Y) / den)


def estimate_los(Y, frontend, grids=None, t_iter=3, centroid_scale=1.0):
    """Estimate the LoS channel from the raw observation ``Y``.

    Parameters
    ----------
    grids : tuple of ParamGrid, optional
        Receive and transmit grids, default :func:`make_grids`.
    t_iter : int
        Number of receive/transmit rounds.
    centroid_scale : float
        Multiplier on the centroids in the regression model.

    Returns
    -------
    LosEstimate
        ``trace`` holds the objective after every half-step from the first
        transmit step on.
    """
    if t_iter < 1:
        raise ValueError("t_iter must be at least 1")
    cfg = frontend.config
    problem = AsagmProblem(Y, frontend, make_grids() if grids is None else grids)
    state = AsagmState((0,) * cfg.k_tx, (0,) * cfg.k_rx, 0, 0, -math.inf)
    trace = []
    for it in range(t_iter):
        state = asagm_receive_step(state, problem, noncoherent=(it == 0))
        if it > 0:
            trace.append(state.objective)
        state = asagm_transmit_step(state, problem, guard=(it > 0))
        trace.append(state.objective)

    gr, gt = problem.grid_rx, problem.grid_tx
    xi_rx = gr.xi_points[list(state.xi_rx_idx)]
    xi_tx = gt.xi_points[list(state.xi_tx_idx)]
    alpha_rx = float(gr.alpha_points[state.alpha_rx_idx])
    alpha_tx = float(gt.alpha_points[state.alpha_tx_idx])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EtaUnidentifiable)
        fit = fit_linear_params(xi_rx, xi_tx, subarray_centroids(cfg, "rx"),
                                subarray_centroids(cfg, "tx"), centroid_scale)
    g = fit_gain(Y, frontend, fit.phi_rx, alpha_rx, fit.phi_tx, alpha_tx, fit.eta)
    H = parabolic_channel(cfg, fit.phi_rx, alpha_rx, fit.phi_tx, alpha_tx, fit.eta, g)
    return LosEstimate(
        phi_rx=fit.phi_rx, phi_tx=fit.phi_tx, alpha_rx=alpha_rx, alpha_tx=alpha_tx,
        eta=fit.eta, gain=g, channel=H, xi_rx=xi_rx, xi_tx=xi_tx, state=state,
        trace=trace, counters=dict(problem.counters), eta_identifiable=fit.eta_identifiable,
    )


def trace_to_csv(trace, path):
    """Write an objective trace as ``half_step,objective`` rows."""
    with open(path, "w") as fh:
        fh.write("half_step,objective\n")
        for k, v in enumerate(trace, start=1):
            fh.write(f"{k},{v!r}\n")
