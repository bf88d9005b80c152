"""Reference estimators: joint-dictionary OMP, genie-aided LS and genie-aided grid search."""

import itertools
from dataclasses import dataclass

import numpy as np

from .channel import NlosPathSet, parabolic_channel, steering_vector
from .errors import ConfigInvalid, ScaleRefused
from .geometry import SceneGeometry
from .nlos_estimator import estimate_nlos, side_sensing, whitened_projection
from .numerics import invec, least_squares, vec

JOINT_OMP_LIMIT = 10_000_000


@dataclass(frozen=True)
class GenieInfo:
    geom: SceneGeometry
    paths: NlosPathSet


@dataclass(frozen=True)
class GeoGrid:
    """Grids over the receive/transmit elevations, receive azimuth (radians) and range (meters)."""

    theta_rx: np.ndarray
    theta_tx: np.ndarray
    phi_rx: np.ndarray
    range_m: np.ndarray

    @classmethod
    def uniform(cls, q_angle=196, q_range=256, angle_max_deg=60.0, range_bounds=(5.0, 205.0)):
        ang = np.deg2rad(np.linspace(-angle_max_deg, angle_max_deg, q_angle))
        return cls(ang, ang.copy(), ang.copy(), np.linspace(*range_bounds, q_range))

    @property
    def sizes(self):
        return tuple(len(g) for g in (self.theta_rx, self.theta_tx, self.phi_rx, self.range_m))


def _reconstruct(Dr, Dt, pairs, coef, shape):
    cols = np.column_stack([np.kron(Dt[:, b].conj(), Dr[:, a]) for a, b in pairs])
    return invec(cols @ coef, *shape)


def joint_omp_estimate(Y, frontend, dicts, sparsity, counters=None, return_support=False,
                       normalize=True):
    """OMP over the full joint dictionary ``conj(D_t) kron D_r``.

    Joint correlations are evaluated as ``U_r^H R U_t`` so no joint column
    is materialized until it is selected. A joint column's norm is the
    product of its side column norms; correlations are divided by it
    unless ``normalize`` is false.

    Raises
    ------
    ScaleRefused
        If ``sparsity * Q_Dr * Q_Dt`` exceeds ten million correlation evaluations.
    """
    d_rx, d_tx = dicts
    cfg = frontend.config
    q_r, q_t = d_rx.size, d_tx.size
    if sparsity * q_r * q_t > JOINT_OMP_LIMIT:
        raise ScaleRefused(f"{sparsity} x {q_r} x {q_t} joint correlations exceed the limit")
    H = np.zeros((cfg.n_rx, cfg.n_tx), dtype=complex)
    if sparsity == 0:
        return (H, ()) if return_support else H
    Ybar = frontend.whiten_rows(Y)
    U_r, U_t = side_sensing(frontend, dicts)
    y = vec(Ybar)
    R = Ybar
    pairs, flat = [], []
    coef = None
    scale = np.outer(np.linalg.norm(U_r, axis=0), np.linalg.norm(U_t, axis=0)) if normalize else 1.0
    for _ in range(sparsity):
        C = np.abs(U_r.conj().T @ R @ U_t) / scale
        if counters is not None:
            counters["joint_corr_evals"] = counters.get("joint_corr_evals", 0) + q_r * q_t
        c = C.reshape(-1, order="F")
        c[flat] = -1.0
        k = int(np.argmax(c))
        flat.append(k)
        b, a = divmod(k, q_r)
        pairs.append((a, b))
        S = np.column_stack([np.kron(U_t[:, bb].conj(), U_r[:, aa]) for aa, bb in pairs])
        coef = least_squares(S, y)
        R = invec(y - S @ coef, *Ybar.shape)
    H = _reconstruct(d_rx.columns, d_tx.columns, pairs, coef, H.shape)
    return (H, tuple(pairs)) if return_support else H


def _whitened_regressor(frontend, A):
    return vec(whitened_projection(frontend, A) @ frontend.F)


def genie_ls_estimate(Y, frontend, genie):
    """Joint LS fit of the LoS and path gains with every structural parameter known.

    The LoS regressor is the parabolic-model channel at the true geometry;
    each path contributes its true rank-one steering outer product. The fit
    is done after whitening.
    """
    cfg = frontend.config
    geo = genie.geom
    atoms = [parabolic_channel(cfg, geo.phi_rx, geo.alpha_rx, geo.phi_tx, geo.alpha_tx, geo.eta)]
    for p in genie.paths:
        atoms.append(np.outer(steering_vector(cfg, "rx", p.rx),
                              steering_vector(cfg, "tx", p.tx).conj()))
    X = np.column_stack([_whitened_regressor(frontend, A) for A in atoms])
    g = least_squares(X, vec(frontend.whiten_rows(Y)))
    return sum(gk * A for gk, A in zip(g, atoms))


def _nearest(grid, value, k):
    order = np.argsort(np.abs(np.asarray(grid) - value), kind="stable")[:k]
    return np.asarray(grid)[np.sort(order)]


def _pe_geometry(theta_rx, theta_tx, phi_rx, R):
    return SceneGeometry(float(R), float(theta_rx), float(theta_tx), float(phi_rx))


def exhaustive_pe(Y, frontend, candidates, counters=None):
    """Best parabolic LoS fit over explicit ``(theta_rx, theta_tx, phi_rx, R)`` candidates.

    Each candidate gets its scalar LS gain; the whitened residual is compared.
    Returns ``(geometry, gain, channel)``.
    """
    cfg = frontend.config
    y = vec(frontend.whiten_rows(Y))
    best = None
    for tr, tt, pr, R in candidates:
        geo = _pe_geometry(tr, tt, pr, R)
        A = parabolic_channel(cfg, geo.phi_rx, geo.alpha_rx, geo.phi_tx, geo.alpha_tx, geo.eta)
        x = _whitened_regressor(frontend, A)
        den = np.vdot(x, x).real
        # residual norm is minimized where the projected energy is maximized
        score = abs(np.vdot(x, y)) ** 2 / den
        if counters is not None:
            counters["pe_evals"] = counters.get("pe_evals", 0) + 1
        if best is None or score > best[0]:
            best = (score, geo, np.vdot(x, y) / den, A)
    _, geo, g, A = best
    return geo, complex(g), g * A


def genie_pe_estimate(Y, frontend, grid, genie, neighborhood=5, dicts=None, sparsity=None,
                      nlos_method="joint", counters=None, normalize=True):
    """Grid-search LoS estimation restricted to the grid points nearest the truth,
    followed by sparse recovery of the residual.

    Parameters
    ----------
    neighborhood : int
        Odd number of grid points kept per geometric parameter.
    dicts : tuple of PolarDictionary, optional
        When omitted only the LoS estimate is returned.
    sparsity : int, optional
        NLoS path count for the residual recovery; defaults to the true one.
    nlos_method : {"joint", "smr"}
    """
    if neighborhood < 1 or neighborhood % 2 == 0:
        raise ConfigInvalid("neighborhood must be a positive odd count")
    g = genie.geom
    axes = [
        _nearest(grid.theta_rx, g.elev_rx, neighborhood),
        _nearest(grid.theta_tx, g.elev_tx, neighborhood),
        _nearest(grid.phi_rx, g.azim_rx, neighborhood),
        _nearest(grid.range_m, g.range_m, neighborhood),
    ]
    _, _, H_los = exhaustive_pe(Y, frontend, itertools.product(*axes), counters)
    if dicts is None:
        return H_los
    L = len(genie.paths) if sparsity is None else sparsity
    if L == 0:
        return H_los
    if nlos_method == "joint":
        resid = Y - frontend.W.conj().T @ H_los @ frontend.F
        return H_los + joint_omp_estimate(resid, frontend, dicts, L, counters, normalize=normalize)
    if nlos_method == "smr":
        return H_los + estimate_nlos(Y, frontend, H_los, dicts, L, L,
                                     normalize=normalize).channel
    raise ConfigInvalid(f"unknown NLoS method {nlos_method!r}")

