import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xlmimo import geometry as G
from xlmimo.errors import ConfigInvalid, IndexOutOfRange, SearchFailed
from xlmimo.geometry import ArrayConfig, SceneGeometry

PAPER = ArrayConfig(128, 128, 4, 2)


def coordinate_distance(config, geom, m, n):
    """Oracle: explicit 3-D element positions, transmit array through the origin."""
    dr = G.element_offset(config, "rx", m)
    dt = G.element_offset(config, "tx", n)
    tr, tt, pr = geom.elev_rx, geom.elev_tx, geom.azim_rx
    rx = np.array([geom.range_m, 0.0, 0.0]) + dr * np.array(
        [math.sin(tr) * math.cos(pr), math.sin(tr) * math.sin(pr), math.cos(tr)])
    tx = dt * np.array([math.sin(tt), 0.0, math.cos(tt)])
    return float(np.linalg.norm(rx - tx))


angles = st.floats(-math.pi, math.pi, allow_nan=False)


def test_wavelength_and_spacing():
    assert PAPER.wavelength == pytest.approx(0.005)
    assert PAPER.spacing == pytest.approx(0.0025)
    assert PAPER.n_rx_sub == 32 and PAPER.n_tx_sub == 64


def test_invalid_arrays():
    with pytest.raises(ConfigInvalid):
        ArrayConfig(10, 8, 3, 1)
    with pytest.raises(ConfigInvalid):
        ArrayConfig(0, 8)
    with pytest.raises(ConfigInvalid):
        SceneGeometry(0.0, 0, 0, 0)


def test_offsets_and_centroids():
    cfg = ArrayConfig(16, 8, 4, 2)
    d = G.element_offsets(cfg, "rx")
    assert d.sum() == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(np.diff(d), cfg.spacing)
    assert G.element_offset(cfg, "rx", 1) == d[0]
    nu = G.subarray_centroids(cfg, "rx")
    np.testing.assert_allclose(nu, d.reshape(4, 4).mean(axis=1), atol=1e-15)
    assert G.subarray_centroid(cfg, "tx", 2) == pytest.approx(G.element_offsets(cfg, "tx")[4:].mean())
    np.testing.assert_allclose(G.element_centroids(cfg, "rx"), np.repeat(nu, 4))
    with pytest.raises(IndexOutOfRange):
        G.element_offset(cfg, "rx", 17)
    with pytest.raises(IndexOutOfRange):
        G.subarray_centroid(cfg, "rx", 0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 500.0), angles, angles, angles, st.integers(1, 16), st.integers(1, 8))
def test_exact_distance_matches_coordinates(R, tr, tt, pr, m, n):
    cfg = ArrayConfig(16, 8, 4, 2)
    geom = SceneGeometry(R, tr, tt, pr)
    assert G.exact_distance(cfg, geom, m, n) == pytest.approx(
        coordinate_distance(cfg, geom, m, n), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 300.0), angles, angles, angles)
def test_distance_matrix_models_agree_with_scalar_forms(R, tr, tt, pr):
    cfg = ArrayConfig(8, 4, 2, 2)
    geom = SceneGeometry(R, tr, tt, pr)
    for model, scalar in (("exact", G.exact_distance), ("parabolic", G.parabolic_distance),
                          ("sopm", G.sopm_distance)):
        D = G.distance_matrix(cfg, geom, model)
        for m, n in ((1, 1), (5, 3), (8, 4)):
            assert D[m - 1, n - 1] == pytest.approx(scalar(cfg, geom, m, n), rel=1e-12)
        np.testing.assert_allclose(G.excess_matrix(cfg, geom, model), D - R, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 300.0), angles, angles, angles)
def test_sopm_is_parabolic_with_single_element_subarrays(R, tr, tt, pr):
    cfg = ArrayConfig(6, 4, 6, 4)
    geom = SceneGeometry(R, tr, tt, pr)
    np.testing.assert_allclose(G.distance_matrix(cfg, geom, "sopm"),
                               G.distance_matrix(cfg, geom, "parabolic"), rtol=0, atol=1e-12)


def test_parabolic_error_is_third_order():
    cfg = ArrayConfig(32, 32)
    geom = lambda R: SceneGeometry(R, 0.4, -0.7, 0.3)  # noqa: E731
    err = [np.abs(G.distance_matrix(cfg, geom(R)) - G.distance_matrix(cfg, geom(R), "parabolic")).max()
           for R in (20.0, 40.0)]
    assert err[1] / err[0] == pytest.approx(0.25, rel=0.05)


def test_closed_form_criteria():
    # 256 half-wavelength elements at 60 GHz
    assert G.fraunhofer_distance(255 * 0.0025, 0.005) == pytest.approx(162.5625)
    assert G.mimo_ard(PAPER) == pytest.approx(4 * 0.3175**2 / 0.005)
    assert G.sopd(PAPER) == pytest.approx(4 * 0.0775 * 0.1575 / 0.005)
    assert G.lemma1_bound(PAPER, 50.0) == pytest.approx(math.pi * 0.0775 * 0.1575 / (2 * 50 * 0.005))


def test_bisect_distance():
    assert G._bisect_distance(lambda R: R >= 3.21) == pytest.approx(3.21, abs=0.01)
    assert G._bisect_distance(lambda R: True) == 0.1
    with pytest.raises(SearchFailed):
        G._bisect_distance(lambda R: False)


def test_golden_max_finds_peak():
    x, v = G._golden_max(lambda t: -(t - 0.3) ** 2, -1.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-5) and v == pytest.approx(0.0, abs=1e-9)


def test_max_phase_error_shrinks_with_range():
    cfg = ArrayConfig(32, 32, 2, 2)
    e1, _ = G.max_phase_error(cfg, 5.0, "parabolic", 32)
    e2, _ = G.max_phase_error(cfg, 10.0, "parabolic", 32)
    assert e2 < e1
    e_sopm, _ = G.max_phase_error(cfg, 5.0, "sopm", 32)
    assert e_sopm > 0


def test_power_ratio_properties():
    cfg = ArrayConfig(32, 32)
    near = G.power_ratio(cfg, 0.5, "los", 32)
    far = G.power_ratio(cfg, 5.0, "los", 32)
    assert 0 < near < far <= 1
    assert G.power_ratio(cfg, 2.0, "nlos", definition="reference") <= 1
    # the weakest element is never stronger than the reference element
    assert (G.power_ratio(cfg, 1.0, "nlos", definition="pair")
            <= G.power_ratio(cfg, 1.0, "nlos", definition="reference"))


def test_nlos_power_ratio_closed_form():
    # endfire worst case: (R - D/2)^2 / (R + D/2)^2 for the pair ratio
    cfg = ArrayConfig(32, 32)
    R, h = 1.0, cfg.aperture_rx / 2
    assert G.power_ratio(cfg, R, "nlos") == pytest.approx(((R - h) / (R + h)) ** 2, rel=1e-9)


def test_uniform_power_distance_is_threshold_crossing():
    cfg = ArrayConfig(32, 32)
    d = G.uniform_power_distance(cfg, 0.9, "nlos")
    assert G.power_ratio(cfg, d, "nlos") >= 0.9
    assert G.power_ratio(cfg, d - 0.02, "nlos") < 0.9
    with pytest.raises(ConfigInvalid):
        G.uniform_power_distance(cfg, 1.5)
    assert G.uniform_power_distance(ArrayConfig(1, 1), 0.9) == 0.0


def test_canonical_worst_case():
    wc = G._canonical(0.3, 1.0, -2.0, -0.1, 0.2)
    assert wc.delta_rx == 0.1 and wc.delta_tx == 0.2
    assert 0 <= wc.azim_rx <= math.pi / 2
    assert G._wrap(3 * math.pi) == pytest.approx(math.pi)
