"""Partially-connected hybrid combiner/precoder, pilot reception and whitening.

Each RF chain drives a disjoint subarray, so the assembled combiner ``W``
and precoder ``F`` are block diagonal. Subarray indices are 1-based.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ConfigInvalid, DimensionMismatch, IndexOutOfRange
from .numerics import cholesky_lower, solve_lower

MODULUS_CONVENTIONS = ("inv_sqrt_n", "inv_n")


class HybridFrontend:
    """Block-diagonal analog combiner and precoder.

    Parameters
    ----------
    config : ArrayConfig
    combiner_blocks : list of ndarray
        ``K_r`` blocks of shape ``(N_rs, M_rs)``.
    precoder_blocks : list of ndarray
        ``K_t`` blocks of shape ``(N_ts, M_ts)``.
    """

    def __init__(self, config, combiner_blocks, precoder_blocks):
        self.config = config
        self.combiner_blocks = [np.asarray(b, dtype=complex) for b in combiner_blocks]
        self.precoder_blocks = [np.asarray(b, dtype=complex) for b in precoder_blocks]
        if len(self.combiner_blocks) != config.k_rx or len(self.precoder_blocks) != config.k_tx:
            raise DimensionMismatch("one block per RF chain is required")
        for b in self.combiner_blocks:
            if b.shape != self.combiner_blocks[0].shape or b.shape[0] != config.n_rx_sub:
                raise DimensionMismatch("combiner blocks must all be N_rs x M_rs")
        for b in self.precoder_blocks:
            if b.shape != self.precoder_blocks[0].shape or b.shape[0] != config.n_tx_sub:
                raise DimensionMismatch("precoder blocks must all be N_ts x M_ts")
        self._whiteners = None

    @property
    def m_rx_sub(self):
        return self.combiner_blocks[0].shape[1]

    @property
    def m_tx_sub(self):
        return self.precoder_blocks[0].shape[1]

    @property
    def m_rx(self):
        return self.config.k_rx * self.m_rx_sub

    @property
    def m_tx(self):
        return self.config.k_tx * self.m_tx_sub

    @property
    def W(self):
        return linalg.block_diag(*self.combiner_blocks)

    @property
    def F(self):
        return linalg.block_diag(*self.precoder_blocks)

    @property
    def whiteners(self):
        """Lower Cholesky factors ``L_i`` of ``W_i^H W_i``, one per receive subarray."""
        if self._whiteners is None:
            self._whiteners = [cholesky_lower(b.conj().T @ b) for b in self.combiner_blocks]
        return self._whiteners

    def full_whitener(self):
        """Block-diagonal ``L`` with ``L L^H = W^H W``."""
        return linalg.block_diag(*self.whiteners)

    def whitened_combiner(self):
        """``L^{-1} W^H`` (rows orthonormal), assembled block diagonally."""
        return linalg.block_diag(*[solve_lower(L, b.conj().T)
                                   for L, b in zip(self.whiteners, self.combiner_blocks)])

    def whiten_rows(self, Y):
        """Apply ``L^{-1}`` to every receive row block of ``Y``."""
        Y = np.asarray(Y)
        ms = self.m_rx_sub
        if Y.shape[0] != self.m_rx:
            raise DimensionMismatch(f"expected {self.m_rx} rows, got {Y.shape[0]}")
        return np.vstack([solve_lower(L, Y[i * ms:(i + 1) * ms])
                          for i, L in enumerate(self.whiteners)])


def _random_block(rng, n, m, modulus):
    return modulus * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(n, m)))


def build_frontend(config, rng, m_rx_per_sub, m_tx_per_sub, modulus_convention="inv_sqrt_n"):
    """Random-phase constant-modulus blocks.

    With ``inv_sqrt_n`` every beam has unit norm; ``inv_n`` uses modulus
    ``1/N_s`` instead.
    """
    if modulus_convention not in MODULUS_CONVENTIONS:
        raise ConfigInvalid(f"unknown modulus convention {modulus_convention!r}")
    if m_rx_per_sub < 1 or m_tx_per_sub < 1:
        raise ConfigInvalid("need at least one beam per subarray")
    nr, nt = config.n_rx_sub, config.n_tx_sub
    if modulus_convention == "inv_sqrt_n":
        mod_r, mod_t = 1 / np.sqrt(nr), 1 / np.sqrt(nt)
    else:
        mod_r, mod_t = 1 / nr, 1 / nt
    W = [_random_block(rng, nr, m_rx_per_sub, mod_r) for _ in range(config.k_rx)]
    F = [_random_block(rng, nt, m_tx_per_sub, mod_t) for _ in range(config.k_tx)]
    return HybridFrontend(config, W, F)


def complex_normal(rng, shape, var):
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    s = np.sqrt(var / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def receive(frontend, H, rng=None, noise_var=0.0, noise=None):
    """``Y = W^H H F + W^H N``.

    ``noise`` (shape ``N_r x M_t``) overrides sampling from ``rng``.
    """
    cfg = frontend.config
    H = np.asarray(H)
    if H.shape != (cfg.n_rx, cfg.n_tx):
        raise DimensionMismatch(f"channel must be {cfg.n_rx}x{cfg.n_tx}, got {H.shape}")
    WH = frontend.W.conj().T
    Y = WH @ H @ frontend.F
    if noise is None and noise_var > 0:
        noise = complex_normal(rng, (cfg.n_rx, frontend.m_tx), noise_var)
    if noise is not None:
        if noise.shape != (cfg.n_rx, frontend.m_tx):
            raise DimensionMismatch("noise must be N_r x M_t")
        Y = Y + WH @ noise
    return Y


def subarray_block(Y, frontend, i, j):
    """Observation block of receive subarray ``i`` and transmit subarray ``j``."""
    cfg = frontend.config
    if not (1 <= i <= cfg.k_rx and 1 <= j <= cfg.k_tx):
        raise IndexOutOfRange(f"block ({i}, {j}) outside {cfg.k_rx}x{cfg.k_tx}")
    mr, mt = frontend.m_rx_sub, frontend.m_tx_sub
    return Y[(i - 1) * mr:i * mr, (j - 1) * mt:j * mt]


@dataclass(frozen=True)
class WhitenedObservation:
    data: np.ndarray
    whitener: np.ndarray
    noise_var: float


def whiten(Y_block, combiner_block, noise_var=1.0):
    """Whiten one receive block: with ``W_i^H W_i = L_i L_i^H`` return ``L_i^{-1} Y``."""
    Wi = np.asarray(combiner_block)
    L = cholesky_lower(Wi.conj().T @ Wi)
    return WhitenedObservation(solve_lower(L, Y_block), L, noise_var)


def frontend_to_csv(frontend, path):
    """Dump all blocks as ``matrix,block,row,col,real,imag`` (1-based block index)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["matrix", "block", "row", "col", "real", "imag"])
        for name, blocks in (("W", frontend.combiner_blocks), ("F", frontend.precoder_blocks)):
            for b, B in enumerate(blocks, start=1):
                for (r, c), v in np.ndenumerate(B):
                    w.writerow([name, b, r, c, repr(float(v.real)), repr(float(v.imag))])
