import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strata_lab.errors import ChartMismatch, ExpDomainError, InvalidParameter
from strata_lab.periods import (
    TangentVector,
    agy_norm,
    agy_norms,
    balanced_projection,
    base_change,
    c2_from_c1,
    default_cutoff,
    evaluate_on_saddle,
    exp_chart,
    exp_map,
    path_length,
    period_chart,
    pushforward,
    saddle_coordinates,
    split_batch,
    stabilization_cutoff,
    stable_unstable_split,
    standard_coefficients,
    standard_projection,
    symplectic_pairing,
    transport_chart,
)
from strata_lab.saddle import SaddleConnection, enumerate_saddle_connections
from strata_lab.sl2 import a_t, u_s
from strata_lab.surface import (
    area,
    build_lshape,
    build_regular_octagon,
    build_torus,
    normalize_area,
    scale,
    three_square_origami,
)

FIXTURES = {
    "torus": build_torus,
    "origami": three_square_origami,
    "octagon": build_regular_octagon,
    "lshape": lambda: build_lshape(math.sqrt(2), math.sqrt(3)),
}


@pytest.fixture(scope="module", params=list(FIXTURES))
def chart(request):
    return period_chart(normalize_area(FIXTURES[request.param]()))


def random_vector(rng, h):
    return rng.normal(size=h) + 1j * rng.normal(size=h)


def test_chart_dimensions():
    assert period_chart(build_torus()).h == 2
    for name in ("origami", "octagon", "lshape"):
        assert period_chart(FIXTURES[name]()).h == 4


def test_periods_rebuild_edges(chart):
    vec = np.asarray(chart.base.polygons)
    np.testing.assert_allclose(chart.edge_values(chart.periods), vec[:, :, 0] + 1j * vec[:, :, 1], atol=1e-12)


def test_torus_periods_are_unit_lattice():
    c = period_chart(build_torus())
    assert sorted(abs(z) for z in c.periods) == pytest.approx([1.0, 1.0])
    assert abs(c.periods[0].real * c.periods[1].imag - c.periods[0].imag * c.periods[1].real) == pytest.approx(1.0)


def test_evaluate_periods_gives_holonomy(chart):
    for sc in enumerate_saddle_connections(chart.base, 3.0):
        assert abs(evaluate_on_saddle(chart, chart.periods, sc) - sc.complex) < 1e-9


def test_evaluate_zero_and_linearity(chart, rng):
    scs = enumerate_saddle_connections(chart.base, 2.0)
    v, w = random_vector(rng, chart.h), random_vector(rng, chart.h)
    alpha = complex(rng.normal(), rng.normal())
    for sc in scs[:20]:
        assert evaluate_on_saddle(chart, np.zeros(chart.h), sc) == 0
        lhs = evaluate_on_saddle(chart, alpha * v + w, sc)
        rhs = alpha * evaluate_on_saddle(chart, v, sc) + evaluate_on_saddle(chart, w, sc)
        assert abs(lhs - rhs) < 1e-10


def test_bad_crossing_sequence_raises(chart):
    sc = SaddleConnection((1.0, 0.0), 0, 0, ((0, 2), (0, 2)), (0, 0))
    with pytest.raises(ChartMismatch):
        saddle_coordinates(chart, sc)


def test_replay_matches_enumeration_chains(chart):
    res = chart.saddles(3.0)
    for i in range(min(len(res), 40)):
        np.testing.assert_array_equal(saddle_coordinates(chart, res.connection(i)), res.chain[i])


@pytest.mark.parametrize("L", [1.0, 2.0, 4.0, 8.0])
def test_norm_of_periods_is_one(chart, L):
    L = max(L, 2 * chart.injectivity_radius())
    assert abs(agy_norm(chart, chart.periods, L) - 1.0) <= 1e-10


def test_norm_homogeneity(chart, rng):
    v = random_vector(rng, chart.h)
    assert agy_norm(chart, 2 * v) == pytest.approx(2 * agy_norm(chart, v), rel=1e-12)
    assert agy_norm(chart, 1j * v) == pytest.approx(agy_norm(chart, v), rel=1e-12)


def test_norm_reports_cutoff(chart):
    val, L = agy_norm(chart, chart.periods, return_cut=True)
    assert L == default_cutoff(chart) == max(4.0, 8 * chart.injectivity_radius())


def test_cutoff_below_twice_inj_rejected(chart):
    with pytest.raises(InvalidParameter):
        agy_norm(chart, chart.periods, 1.5 * chart.injectivity_radius())


def test_norm_stabilizes_on_octagon():
    c = period_chart(normalize_area(build_regular_octagon()))
    v = random_vector(np.random.default_rng(1), 4)
    L_star, val = stabilization_cutoff(c, v)
    assert L_star == 4.0
    assert val == pytest.approx(agy_norm(c, v, 2 * L_star), rel=1e-12)


def test_batch_norms_match_single(chart, rng):
    V = np.array([random_vector(rng, chart.h) for _ in range(5)])
    np.testing.assert_allclose(agy_norms(chart, V), [agy_norm(chart, v) for v in V], rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(0.1, 10.0), seed=st.integers(0, 1000))
def test_norm_scaling_invariance(lam, seed):
    S = normalize_area(three_square_origami())
    c1 = period_chart(S)
    c2 = period_chart(scale(S, lam))
    np.testing.assert_allclose(c2.periods, lam * c1.periods, rtol=1e-12, atol=1e-12)
    v = random_vector(np.random.default_rng(seed), 4)
    L = default_cutoff(c1)
    assert abs(agy_norm(c1, v, L) - agy_norm(c2, lam * v, lam * L)) <= 1e-10 * agy_norm(c1, v, L)


def test_exp_of_zero_is_base(chart):
    assert exp_map(chart, np.zeros(chart.h)).edgewise_equal(chart.base)


@pytest.mark.parametrize("eps", [0.01, 0.05])
def test_exp_along_periods_scales(chart, eps):
    T = exp_map(chart, eps * chart.periods)
    assert area(T) == pytest.approx((1 + eps) ** 2 * area(chart.base), rel=1e-10)
    c = exp_chart(chart, eps * chart.periods)
    np.testing.assert_allclose(c.periods, (1 + eps) * chart.periods, atol=1e-12)


def test_real_vector_keeps_imaginary_periods(chart, rng):
    v = rng.normal(size=chart.h) * 0.02
    c = exp_chart(chart, v)
    np.testing.assert_allclose(c.periods.imag, chart.periods.imag, atol=1e-14)
    vec = np.asarray(c.base.polygons)
    np.testing.assert_allclose(c.edge_values(c.periods).real, vec[:, :, 0], atol=1e-12)


def test_exp_rejects_bad_shape(chart):
    with pytest.raises(InvalidParameter):
        exp_map(chart, np.zeros(chart.h + 1))


def test_exp_collapsing_triangle_raises():
    c = period_chart(build_torus())
    with pytest.raises(ExpDomainError):
        exp_map(c, -c.periods)


def test_stable_unstable_split():
    vu, vs = stable_unstable_split([1 + 2j, 0, 0, 0])
    np.testing.assert_array_equal(vu, [1, 0, 0, 0])
    np.testing.assert_array_equal(vs, [2j, 0, 0, 0])
    vu, vs = stable_unstable_split([1.5, -2.0])
    assert not np.any(vs)
    # idempotent componentwise
    np.testing.assert_array_equal(stable_unstable_split(vu)[0], vu)


def test_pairing_of_periods_is_area(chart):
    assert symplectic_pairing(chart, chart.periods, chart.periods) == pytest.approx(1.0, abs=1e-12)


def test_torus_pairing_oracle():
    c = period_chart(build_torus())
    A, B = c.periods
    expected = 0.5j * (A * np.conj(B) - B * np.conj(A))
    assert expected == pytest.approx(1.0)
    assert symplectic_pairing(c, c.periods, c.periods) == pytest.approx(expected, abs=1e-12)


def test_pairing_is_hermitian_antisymmetric(chart, rng):
    v, w = random_vector(rng, chart.h), random_vector(rng, chart.h)
    assert symplectic_pairing(chart, w, v) == pytest.approx(np.conj(symplectic_pairing(chart, v, w)), abs=1e-12)


def test_balanced_projection_properties(chart, rng):
    if chart.h == 2:
        pytest.skip("no balanced part on the torus")
    assert np.max(np.abs(balanced_projection(chart, chart.periods))) < 1e-12
    v = random_vector(rng, chart.h)
    p = balanced_projection(chart, v)
    np.testing.assert_allclose(balanced_projection(chart, p), p, atol=1e-10)
    np.testing.assert_allclose(p + standard_projection(chart, v), v, atol=1e-12)
    for u in (p.real, p.imag):
        for ref in (chart.periods.real, chart.periods.imag):
            assert abs(symplectic_pairing(chart, u, ref)) < 1e-10


def test_standard_coefficients_reconstruct(chart, rng):
    M = np.array([[0.3, -0.2], [0.5, 0.1]])
    x, y = chart.periods.real, chart.periods.imag
    v = (M[0, 0] * x + M[0, 1] * y) + 1j * (M[1, 0] * x + M[1, 1] * y)
    np.testing.assert_allclose(standard_coefficients(chart, v), M, atol=1e-10)
    W, Ms = split_batch(chart, v[None, :])
    assert np.max(np.abs(W)) < 1e-10


def test_pushforward_identity_and_split(chart, rng):
    v = random_vector(rng, chart.h)
    np.testing.assert_array_equal(pushforward([1, 0, 0, 1], chart, v), v)
    vu, _ = stable_unstable_split(v)
    assert not np.any(pushforward(a_t(0.7), chart, vu).imag)


def test_transport_chart_periods(chart):
    A = a_t(0.8) @ u_s(0.4)
    c2 = transport_chart(chart, A)
    np.testing.assert_allclose(c2.periods, pushforward(A, chart, chart.periods), atol=1e-12)
    assert agy_norm(c2, c2.periods) == pytest.approx(1.0, abs=1e-10)


def test_rechart_after_flips_is_unimodular():
    c = period_chart(three_square_origami())
    moved = transport_chart(c, a_t(1.0) @ u_s(0.3))
    fresh = period_chart(moved.base)
    M = base_change(moved, fresh, moved.coords)
    assert round(abs(np.linalg.det(M.astype(float)))) == 1
    np.testing.assert_allclose(M @ moved.periods, fresh.periods, atol=1e-12)


def test_path_length_of_periods():
    c = period_chart(normalize_area(build_regular_octagon()))
    eps = 0.02
    # along P + tau eps P the norm of eps P is eps / (1 + tau eps)
    expected = math.log(1 + eps)
    assert path_length(c, eps * c.periods, default_cutoff(c), n=200) == pytest.approx(expected, rel=1e-4)


def test_c2():
    assert c2_from_c1(2.0) == 18.0


def test_tangent_vector_serialization(chart):
    tv = TangentVector.of(chart, chart.periods)
    doc = tv.to_json()
    assert doc["chart_id"] == chart.chart_id
    assert len(doc["coords"]) == chart.h
