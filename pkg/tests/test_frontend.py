import numpy as np
import pytest

from xlmimo.errors import ConfigInvalid, DimensionMismatch, IndexOutOfRange
from xlmimo.frontend import (HybridFrontend, build_frontend, complex_normal, frontend_to_csv,
                             receive, subarray_block, whiten)
from xlmimo.geometry import ArrayConfig

CFG = ArrayConfig(16, 8, 4, 2)


@pytest.fixture
def fe():
    return build_frontend(CFG, np.random.default_rng(0), 3, 2)


def test_block_diagonal_structure(fe):
    W, F = fe.W, fe.F
    assert W.shape == (16, 12) and F.shape == (8, 4)
    assert fe.m_rx == 12 and fe.m_tx == 4 and fe.m_rx_sub == 3
    mask = np.kron(np.eye(4), np.ones((4, 3))).astype(bool)
    assert not W[~mask].any()
    np.testing.assert_allclose(np.abs(W[mask]), 0.5)
    np.testing.assert_allclose(np.abs(F[F != 0]), 0.5)


def test_inv_n_convention():
    fe = build_frontend(CFG, np.random.default_rng(0), 2, 2, "inv_n")
    np.testing.assert_allclose(np.abs(fe.combiner_blocks[0]), 0.25)
    with pytest.raises(ConfigInvalid):
        build_frontend(CFG, np.random.default_rng(0), 2, 2, "unit")
    with pytest.raises(ConfigInvalid):
        build_frontend(CFG, np.random.default_rng(0), 0, 2)


def test_block_shape_checks(fe):
    with pytest.raises(DimensionMismatch):
        HybridFrontend(CFG, fe.combiner_blocks[:3], fe.precoder_blocks)
    bad = list(fe.combiner_blocks)
    bad[1] = np.ones((4, 2))
    with pytest.raises(DimensionMismatch):
        HybridFrontend(CFG, bad, fe.precoder_blocks)


def test_whitened_combiner_has_orthonormal_rows(fe):
    Wb = fe.whitened_combiner()
    np.testing.assert_allclose(Wb @ Wb.conj().T, np.eye(12), atol=1e-12)
    L = fe.full_whitener()
    np.testing.assert_allclose(L @ L.conj().T, fe.W.conj().T @ fe.W, atol=1e-12)


def test_whitening_makes_noise_white(fe):
    # W^H N has covariance sigma^2 W^H W; after whitening it is sigma^2 I
    rng = np.random.default_rng(1)
    N = complex_normal(rng, (16, 20000), 2.0)
    Z = fe.whiten_rows(fe.W.conj().T @ N)
    cov = Z @ Z.conj().T / Z.shape[1]
    np.testing.assert_allclose(cov, 2.0 * np.eye(12), atol=0.1)


def test_complex_normal_variance():
    x = complex_normal(np.random.default_rng(2), 200000, 0.5)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(0.5, rel=0.02)
    assert abs(np.mean(x.real * x.imag)) < 0.01


def test_receive(fe):
    rng = np.random.default_rng(3)
    H = complex_normal(rng, (16, 8), 1.0)
    np.testing.assert_allclose(receive(fe, H), fe.W.conj().T @ H @ fe.F)
    N = complex_normal(rng, (16, 4), 1.0)
    np.testing.assert_allclose(receive(fe, H, noise=N), fe.W.conj().T @ (H @ fe.F + N))
    with pytest.raises(DimensionMismatch):
        receive(fe, H[:4])
    with pytest.raises(DimensionMismatch):
        receive(fe, H, noise=N[:, :2])


def test_subarray_block_and_single_whitening(fe):
    Y = np.arange(48).reshape(12, 4).astype(complex)
    np.testing.assert_array_equal(subarray_block(Y, fe, 2, 1), Y[3:6, 0:2])
    with pytest.raises(IndexOutOfRange):
        subarray_block(Y, fe, 5, 1)
    obs = whiten(Y[3:6], fe.combiner_blocks[1], 0.1)
    np.testing.assert_allclose(obs.data, fe.whiten_rows(Y)[3:6], atol=1e-10)
    with pytest.raises(DimensionMismatch):
        fe.whiten_rows(Y[:5])


def test_frontend_csv(fe, tmp_path):
    p = tmp_path / "fe.csv"
    frontend_to_csv(fe, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "matrix,block,row,col,real,imag"
    assert len(lines) == 1 + 4 * 4 * 3 + 2 * 4 * 2
