import itertools

import numpy as np
import pytest

from xlmimo.baselines import (JOINT_OMP_LIMIT, GenieInfo, GeoGrid, exhaustive_pe,
                              genie_ls_estimate, genie_pe_estimate, joint_omp_estimate)
from xlmimo.channel import NlosPath, NlosPathSet, los_channel, nlos_channel
from xlmimo.errors import ConfigInvalid, RankDeficient, ScaleRefused
from xlmimo.frontend import build_frontend, complex_normal, receive
from xlmimo.geometry import ArrayConfig, SceneGeometry
from xlmimo.harness import nmse
from xlmimo.nlos_estimator import build_polar_dictionary, estimate_nlos

CFG = ArrayConfig(32, 32, 2, 2)


@pytest.fixture(scope="module")
def small_dicts():
    cfg = ArrayConfig(16, 16, 2, 2)
    return cfg, (build_polar_dictionary(cfg, "rx", 8, 2, 0.05),
                 build_polar_dictionary(cfg, "tx", 8, 2, 0.05))


def scene(rng, n_paths=2):
    geom = SceneGeometry(40.0, 0.3, -0.4, 0.2, 0.8 + 0.1j)
    paths = NlosPathSet(tuple(NlosPath.from_geometry(complex(*rng.standard_normal(2)) * 0.3,
                                                     *rng.uniform(0.6, 2.5, 2), 10.0, 20.0)
                              for _ in range(n_paths)))
    return geom, paths


def test_joint_omp_single_path_and_zero_sparsity(small_dicts):
    cfg, dicts = small_dicts
    fe = build_frontend(cfg, np.random.default_rng(0), 8, 8)
    H = 0.5j * np.outer(dicts[0].columns[:, 5], dicts[1].columns[:, 12].conj())
    H_hat, pairs = joint_omp_estimate(receive(fe, H), fe, dicts, 1, return_support=True)
    assert pairs == ((5, 12),)
    assert nmse(H_hat, H) < 1e-24
    assert not joint_omp_estimate(receive(fe, H), fe, dicts, 0).any()


def test_joint_omp_equals_smr_when_sides_cover_grid(small_dicts):
    # with side sparsity equal to the dictionary size the refined dictionary is the full one
    cfg, dicts = small_dicts
    rng = np.random.default_rng(1)
    fe = build_frontend(cfg, rng, 8, 8)
    Y = complex_normal(rng, (16, 16), 1.0)
    counters = {}
    _, pairs = joint_omp_estimate(Y, fe, dicts, 3, counters, return_support=True)
    est = estimate_nlos(Y, fe, None, dicts, 16, 16)
    full = [est.rx_support.indices, est.tx_support.indices]
    assert sorted(full[0]) == list(range(16))
    smr_pairs = [(full[0][k % 16], full[1][k // 16]) for k in est.support.indices[:3]]
    assert smr_pairs == list(pairs)
    assert counters["joint_corr_evals"] == 3 * 16 * 16


def test_joint_omp_scale_guard():
    cfg = ArrayConfig(8, 8)
    big = build_polar_dictionary(cfg, "rx", 1000, 4, 1.0)
    fe = build_frontend(cfg, np.random.default_rng(2), 4, 4)
    with pytest.raises(ScaleRefused):
        joint_omp_estimate(np.zeros((4, 4)), fe, (big, big), 1)
    assert JOINT_OMP_LIMIT == 10_000_000


def test_genie_ls_exact_with_parabolic_truth():
    rng = np.random.default_rng(3)
    fe = build_frontend(CFG, rng, 8, 8)
    geom, paths = scene(rng)
    H = los_channel(CFG, geom, "parabolic") + nlos_channel(CFG, paths)
    assert nmse(genie_ls_estimate(receive(fe, H), fe, GenieInfo(geom, paths)), H) < 1e-24


def test_genie_ls_mismatch_floor_on_spherical_truth():
    rng = np.random.default_rng(4)
    fe = build_frontend(CFG, rng, 8, 8)
    geom, paths = scene(rng)
    H = los_channel(CFG, geom, "nuswm") + nlos_channel(CFG, paths)
    e = nmse(genie_ls_estimate(receive(fe, H), fe, GenieInfo(geom, paths)), H)
    floor = nmse(los_channel(CFG, geom, "parabolic"), los_channel(CFG, geom, "nuswm"))
    assert 0 < e < 10 * floor < 1e-3


def test_genie_ls_error_scales_with_noise_power():
    rng = np.random.default_rng(5)
    fe = build_frontend(CFG, rng, 8, 8)
    geom, paths = scene(rng)
    H = los_channel(CFG, geom, "parabolic") + nlos_channel(CFG, paths)
    N = complex_normal(rng, (32, 16), 1.0)
    e = [nmse(genie_ls_estimate(receive(fe, H, noise=s * N), fe, GenieInfo(geom, paths)), H)
         for s in (1.0, np.sqrt(0.5))]
    assert e[1] == pytest.approx(e[0] / 2, rel=1e-8)


def test_genie_ls_colliding_paths():
    rng = np.random.default_rng(6)
    fe = build_frontend(CFG, rng, 8, 8)
    geom, paths = scene(rng, 1)
    twice = NlosPathSet(paths.paths * 2)
    with pytest.raises(RankDeficient):
        genie_ls_estimate(receive(fe, nlos_channel(CFG, paths)), fe, GenieInfo(geom, twice))


def test_geo_grid():
    g = GeoGrid.uniform(8, 6, 60.0, (10.0, 60.0))
    assert g.sizes == (8, 8, 8, 6)
    assert g.theta_rx[0] == pytest.approx(-np.pi / 3) and g.range_m[-1] == 60.0


def test_genie_pe_picks_on_grid_truth():
    rng = np.random.default_rng(7)
    fe = build_frontend(CFG, rng, 8, 8)
    grid = GeoGrid.uniform(16, 8, 60.0, (10.0, 80.0))
    geom = SceneGeometry(grid.range_m[3], grid.theta_rx[5], grid.theta_tx[9], grid.phi_rx[12],
                         0.6 - 0.2j)
    H = los_channel(CFG, geom, "parabolic")
    counters = {}
    H_hat = genie_pe_estimate(receive(fe, H), fe, grid, GenieInfo(geom, NlosPathSet()), 3,
                              counters=counters)
    assert nmse(H_hat, H) < 1e-24
    assert counters["pe_evals"] == 3**4
    with pytest.raises(ConfigInvalid):
        genie_pe_estimate(receive(fe, H), fe, grid, GenieInfo(geom, NlosPathSet()), 4)


def test_genie_pe_full_neighborhood_equals_exhaustive_search():
    cfg = ArrayConfig(16, 16, 2, 2)
    rng = np.random.default_rng(8)
    fe = build_frontend(cfg, rng, 4, 4)
    grid = GeoGrid.uniform(8, 8, 60.0, (5.0, 40.0))
    geom = SceneGeometry(17.0, 0.31, -0.52, 0.13, 1.0)
    Y = receive(fe, los_channel(cfg, geom), rng, 0.01)
    restricted = genie_pe_estimate(Y, fe, grid, GenieInfo(geom, NlosPathSet()), 9)
    # exhaustive oracle: explicit residual norm at every grid point
    best = None
    for tr, tt, pr, R in itertools.product(grid.theta_rx, grid.theta_tx, grid.phi_rx, grid.range_m):
        A = los_channel(cfg, SceneGeometry(R, tr, tt, pr), "parabolic")
        X = fe.whiten_rows(fe.W.conj().T @ A @ fe.F)
        Yb = fe.whiten_rows(Y)
        g = np.vdot(X, Yb) / np.vdot(X, X)
        res = np.linalg.norm(Yb - g * X)
        if best is None or res < best[0] - 1e-12:
            best = (res, g * A)
    np.testing.assert_allclose(restricted, best[1], atol=1e-10)
    geo, g, H = exhaustive_pe(Y, fe, [(0.31, -0.52, 0.13, 17.0)])
    assert geo.range_m == 17.0


def test_genie_pe_with_nlos_stage():
    rng = np.random.default_rng(9)
    fe = build_frontend(CFG, rng, 8, 8)
    dicts = (build_polar_dictionary(CFG, "rx", 32, 2, 0.5),
             build_polar_dictionary(CFG, "tx", 32, 2, 0.5))
    grid = GeoGrid.uniform(32, 16, 60.0, (10.0, 80.0))
    geom, paths = scene(rng)
    H = los_channel(CFG, geom) + nlos_channel(CFG, paths)
    Y = receive(fe, H, rng, 0.01)
    genie = GenieInfo(geom, paths)
    los_only = nmse(genie_pe_estimate(Y, fe, grid, genie), H)
    for method in ("joint", "smr"):
        assert nmse(genie_pe_estimate(Y, fe, grid, genie, dicts=dicts, nlos_method=method), H) < los_only
    with pytest.raises(ConfigInvalid):
        genie_pe_estimate(Y, fe, grid, genie, dicts=dicts, nlos_method="both")
