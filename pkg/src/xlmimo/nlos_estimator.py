"""Scattered-path estimation by sensing-matrix refinement OMP.

Side supports are detected separately with SOMP on the receive and transmit
polar dictionaries; OMP then runs on the small joint dictionary spanned by
the detected columns. The full joint sensing matrix is never formed.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import steering_matrix
from .errors import ConfigInvalid
from .numerics import invec, least_squares, solve_lower, vec


@dataclass(frozen=True)
class PolarDictionary:
    """Steering-vector dictionary sampled in angle and curvature, angle-major.

    Column ``q * q_curv + c`` has linear coefficient ``linear[q * q_curv + c]``
    (the ``q``-th angle) and the ``c``-th curvature level for that angle.
    """

    columns: np.ndarray
    linear: np.ndarray
    quadratic: np.ndarray
    q_angle: int
    q_curv: int
    side: str

    @property
    def size(self):
        return self.columns.shape[1]


def build_polar_dictionary(config, side, q_angle, q_curv, r_min):
    """Angles at the midpoints of ``q_angle`` equal cells of ``[-1, 1]``; for each angle
    ``q_curv`` curvature levels evenly spaced in ``[0, (1 - phi^2) / (2 r_min)]``,
    negated on the transmit side."""
    if q_angle < 2 or q_curv < 1 or not r_min > 0:
        raise ConfigInvalid("need q_angle >= 2, q_curv >= 1 and r_min > 0")
    phi = (2 * np.arange(q_angle) + 1 - q_angle) / q_angle
    levels = np.linspace(0.0, 1.0, q_curv) if q_curv > 1 else np.zeros(1)
    quad = np.outer((1 - phi**2) / (2 * r_min), levels).ravel()
    if side == "tx":
        quad = -quad
    lin = np.repeat(phi, q_curv)
    return PolarDictionary(steering_matrix(config, side, lin, quad), lin, quad,
                           q_angle, q_curv, side)


@dataclass(frozen=True)
class SupportSet:
    indices: tuple
    residual_norms: tuple = ()

    def __len__(self):
        return len(self.indices)


@dataclass
class NlosEstimate:
    channel: np.ndarray
    support: SupportSet
    coeffs: np.ndarray
    rx_support: SupportSet = None
    tx_support: SupportSet = None
    counters: dict = field(default_factory=dict)


def _count(counters, key, n):
    if counters is not None:
        counters[key] = counters.get(key, 0) + n


def _column_norms(sensing):
    n = np.linalg.norm(sensing, axis=0)
    n[n == 0] = np.inf
    return n


def somp(Y, sensing, sparsity, stop_norm=None, counters=None, normalize=True):
    """Simultaneous OMP: greedy row-support detection for ``Y ~ sensing @ C``.

    Each step picks the unselected column with the largest row norm of
    ``sensing^H R`` divided by the column norm (raw row norm when
    ``normalize`` is false; lowest index on ties), then refits all selected
    coefficients jointly. Projected dictionary columns have unequal norms,
    so the raw score favours long columns over the matching one. With
    ``stop_norm`` the loop ends early once the residual Frobenius norm is at
    most ``stop_norm``.
    """
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    if sparsity > sensing.shape[1]:
        raise ConfigInvalid("sparsity exceeds dictionary size")
    R = Y
    chosen = []
    norms = [float(np.linalg.norm(R))]
    scale = _column_norms(sensing) if normalize else 1.0
    for _ in range(sparsity):
        if stop_norm is not None and norms[-1] <= stop_norm:
            break
        corr = np.linalg.norm(sensing.conj().T @ R, axis=1) / scale
        _count(counters, "side_corr_macs", sensing.size * R.shape[1])
        _count(counters, "side_corr_evals", sensing.shape[1])
        corr[chosen] = -1.0
        chosen.append(int(np.argmax(corr)))
        S = sensing[:, chosen]
        C = least_squares(S, Y)
        R = Y - S @ C
        norms.append(float(np.linalg.norm(R)))
    return SupportSet(tuple(chosen), tuple(norms))


def omp(y, sensing, sparsity, stop_norm=None, counters=None, normalize=True):
    """Orthogonal matching pursuit with a joint least-squares refit each step.

    Correlations are divided by the column norms unless ``normalize`` is false.
    Returns the support and the coefficients on it.
    """
    y = np.asarray(y).ravel()
    if sparsity > sensing.shape[1]:
        raise ConfigInvalid("sparsity exceeds dictionary size")
    r = y
    chosen = []
    coef = np.zeros(0, dtype=complex)
    norms = [float(np.linalg.norm(r))]
    scale = _column_norms(sensing) if normalize else 1.0
    for _ in range(sparsity):
        if stop_norm is not None and norms[-1] <= stop_norm:
            break
        corr = np.abs(sensing.conj().T @ r) / scale
        _count(counters, "omp_corr_macs", sensing.size)
        corr[chosen] = -1.0
        chosen.append(int(np.argmax(corr)))
        S = sensing[:, chosen]
        coef = least_squares(S, y)
        r = y - S @ coef
        norms.append(float(np.linalg.norm(r)))
    return SupportSet(tuple(chosen), tuple(norms)), np.asarray(coef, dtype=complex)


def whitened_projection(frontend, D):
    """``L^{-1} W^H D`` computed subarray by subarray."""
    ns = frontend.config.n_rx_sub
    return np.vstack([solve_lower(L, Wi.conj().T @ D[i * ns:(i + 1) * ns])
                      for i, (L, Wi) in enumerate(zip(frontend.whiteners,
                                                      frontend.combiner_blocks))])


def precoder_projection(frontend, D):
    """``F^H D`` computed subarray by subarray."""
    ns = frontend.config.n_tx_sub
    return np.vstack([Fj.conj().T @ D[j * ns:(j + 1) * ns]
                      for j, Fj in enumerate(frontend.precoder_blocks)])


def side_sensing(frontend, dicts):
    """Receive sensing ``L^{-1} W^H D_r`` and transmit sensing ``F^H D_t``."""
    d_rx, d_tx = dicts
    return whitened_projection(frontend, d_rx.columns), precoder_projection(frontend, d_tx.columns)


def detect_side_supports(Ybar, frontend, dicts, l_rx, l_tx, stop_norm=None, counters=None,
                         sensing=None, normalize=True):
    """SOMP on ``Ybar`` against the receive sensing and on ``Ybar^H`` against the transmit sensing."""
    U_r, U_t = side_sensing(frontend, dicts) if sensing is None else sensing
    rx = somp(Ybar, U_r, l_rx, stop_norm, counters, normalize)
    tx = somp(np.asarray(Ybar).conj().T, U_t, l_tx, stop_norm, counters, normalize)
    return rx, tx


def refined_sensing(frontend, d_rx_sel, d_tx_sel):
    """Joint sensing columns for every pair of selected receive/transmit atoms.

    Column ``b * L_r + a`` is ``vec((L^{-1} W^H d_r[a]) (F^H d_t[b])^H)``.
    """
    U = whitened_projection(frontend, np.asarray(d_rx_sel))
    V = precoder_projection(frontend, np.asarray(d_tx_sel))
    return np.kron(V.conj(), U)


def joint_atoms(Dr, Dt, indices):
    """Columns ``vec(d_r[a] d_t[b]^H)`` of the refined joint dictionary at flat ``indices``."""
    Lr = Dr.shape[1]
    cols = [np.kron(Dt[:, k // Lr].conj(), Dr[:, k % Lr]) for k in indices]
    if not cols:
        return np.zeros((Dr.shape[0] * Dt.shape[0], 0), dtype=complex)
    return np.column_stack(cols)


def estimate_nlos(Y, frontend, los_channel, dicts, l_rx, l_tx, stopping="fixed",
                  noise_var=None, normalize=True):
    """Estimate the scattered component after removing an LoS estimate.

    Parameters
    ----------
    los_channel : ndarray or None
        LoS channel estimate to subtract; ``None`` means zero.
    stopping : {"fixed", "residual"}
        ``fixed`` runs ``max(l_rx, l_tx)`` OMP steps. ``residual`` stops every
        greedy loop once the residual norm falls to ``1.1 sqrt(M_r M_t) sigma``
        and lets OMP use up to ``l_rx * l_tx`` steps.
    normalize : bool
        Score candidate columns by normalized correlation in every greedy loop.
    """
    cfg = frontend.config
    Y = np.asarray(Y)
    if los_channel is not None:
        Y = Y - frontend.W.conj().T @ los_channel @ frontend.F
    Ybar = frontend.whiten_rows(Y)
    if stopping == "fixed":
        stop, n_iter = None, max(l_rx, l_tx)
    elif stopping == "residual":
        if noise_var is None:
            raise ConfigInvalid("residual stopping needs the noise variance")
        stop = 1.1 * np.sqrt(Ybar.size * noise_var)
        n_iter = l_rx * l_tx
    else:
        raise ConfigInvalid(f"unknown stopping rule {stopping!r}")

    counters = {}
    d_rx, d_tx = dicts
    rx, tx = detect_side_supports(Ybar, frontend, dicts, l_rx, l_tx, stop, counters,
                                  normalize=normalize)
    empty = np.zeros((cfg.n_rx, cfg.n_tx), dtype=complex)
    if len(rx) == 0 or len(tx) == 0:
        return NlosEstimate(empty, SupportSet(()), np.zeros(0, complex), rx, tx, counters)
    Dr = d_rx.columns[:, list(rx.indices)]
    Dt = d_tx.columns[:, list(tx.indices)]
    ups = refined_sensing(frontend, Dr, Dt)
    support, coef = omp(vec(Ybar), ups, min(n_iter, ups.shape[1]), stop, counters, normalize)
    H = invec(joint_atoms(Dr, Dt, support.indices) @ coef, cfg.n_rx, cfg.n_tx)
    return NlosEstimate(H, support, coef, rx, tx, counters)


def nlos_to_csv(estimate, dicts, path):
    """Write one CSV row per selected atom pair: dictionary columns, their
    steering parameters and the fitted coefficient."""
    d_rx, d_tx = dicts
    n_rx = len(estimate.rx_support) if estimate.rx_support is not None else 0
    with open(path, "w") as fh:
        fh.write("step,rx_column,tx_column,rx_linear,rx_quadratic,tx_linear,tx_quadratic,real,imag\n")
        for step, (k, c) in enumerate(zip(estimate.support.indices, estimate.coeffs), start=1):
            a = estimate.rx_support.indices[k % n_rx]
            b = estimate.tx_support.indices[k // n_rx]
            vals = (d_rx.linear[a], d_rx.quadratic[a], d_tx.linear[b], d_tx.quadratic[b],
                    c.real, c.imag)
            fh.write(f"{step},{a},{b}," + ",".join(repr(float(v)) for v in vals) + "\n")
