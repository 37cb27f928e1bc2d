import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strata_lab.closing import (
    ClosingConstants,
    default_t_prime,
    dichotomy_driver,
    find_hyperbolic,
    find_hyperbolic_certificate,
    find_parabolic,
    flowed_delaunay,
    kronecker_samples,
    margulis_f,
    membership_certificate,
    near_returns,
    r_proxy,
    sheet_count_check,
    short_directions,
    snap_integers,
    veech_contains,
)
from strata_lab.delaunay import is_delaunay, translation_equivalent
from strata_lab.errors import InvalidParameter, PreconditionUnmet
from strata_lab.saddle import injectivity_radius
from strata_lab.sl2 import Mat2, a_t, as_mat2, classify, u_s
from strata_lab.surface import apply_matrix, build_lshape, normalize_area, three_square_origami


class _Ret:
    def __init__(self, w):
        self.w_norm = w


def test_r_proxy_formula(origami, lshape):
    assert r_proxy(origami) == pytest.approx(0.25)
    assert r_proxy(lshape) == pytest.approx(0.5 * (math.sqrt(2) - 1))
    assert r_proxy(lshape) <= injectivity_radius(lshape)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0, 3), s=st.floats(0, 1))
def test_r_proxy_under_flow(t, s):
    z = normalize_area(build_lshape(math.sqrt(2), math.sqrt(3)))
    z = apply_matrix(u_s(s), z)
    assert r_proxy(flowed_delaunay(z, a_t(t))) >= 0.5 * math.exp(-t) * r_proxy(z)


def test_flowed_delaunay_matches_direct(origami):
    A = u_s(0.37)
    T = flowed_delaunay(origami, A, 2.0)
    assert is_delaunay(T)
    assert translation_equivalent(T, apply_matrix(a_t(2.0) @ A, origami), tol=1e-7)


def test_margulis_formula():
    assert margulis_f(0.1, []) == pytest.approx(10**0.5)
    assert margulis_f(0.25, [_Ret(0.01)]) == pytest.approx(10.0)
    one = margulis_f(0.25, [_Ret(0.01)])
    assert margulis_f(0.25, [_Ret(0.01), _Ret(0.2)]) > one
    with pytest.raises(InvalidParameter):
        margulis_f(0.1, [], nu=1.5)


def test_sheet_count():
    assert sheet_count_check([], 1.0)
    assert sheet_count_check(10, 1.0, 4.0)
    assert not sheet_count_check(10, 0.0, 4.0)
    with pytest.raises(InvalidParameter):
        sheet_count_check(1, 1.0, kappa4=2.0)


def test_constants():
    c = ClosingConstants()
    assert c.chart_radius == pytest.approx(1 / 18)
    assert c.D_default == 124.0
    with pytest.raises(InvalidParameter):
        ClosingConstants(C1=1.0)


def test_kronecker_samples():
    s = kronecker_samples(16)
    assert len(set(np.round(s, 12))) == 16
    assert np.all((0 <= s) & (s < 1))
    assert s[0] == pytest.approx((math.sqrt(5) - 1) / 2)


@pytest.fixture(scope="module")
def origami_scan():
    return near_returns(three_square_origami(), 3.0, math.exp(-3 / 124), (3, 3, 16))


def test_origami_has_periodic_returns(origami_scan):
    assert len(origami_scan) > 0
    assert min(r.w_norm for r in origami_scan) < 1e-8
    cc = ClosingConstants()
    for r in origami_scan:
        assert r.i1 != r.i2
        assert 0 < r.w_norm < r.r_proxy
        assert r.admissible(cc.tau_bal, cc.residual_floor)


def test_origami_return_matrices_are_veech(origami_scan):
    seen = set()
    for r in origami_scan:
        g = snap_integers(r.gamma)
        key = tuple(round(x, 6) for x in g.as_tuple())
        if key in seen:
            continue
        seen.add(key)
        if len(seen) > 5:
            break
        assert veech_contains(three_square_origami(), g)


def test_generic_lshape_has_no_early_returns():
    x = normalize_area(build_lshape(math.sqrt(2), math.sqrt(3)))
    scan = near_returns(x, 1.0, math.exp(-1 / 124), (3, 3, 16))
    assert len(scan) == 0


def test_near_returns_beta_window(origami):
    with pytest.raises(InvalidParameter):
        near_returns(origami, 1.0, 0.5)


def test_veech_membership_examples(torus, origami, octagon, lshape):
    minus = as_mat2([-1, 0, 0, -1])
    for S in (torus, origami, octagon, lshape):
        assert veech_contains(S, minus)
    assert veech_contains(origami, [1, 2, 0, 1])
    assert not veech_contains(origami, [1, 1, 0, 1])
    for M in ([2, 1, 1, 1], [0, -1, 1, 0], [1, 3, 0, 1]):
        assert veech_contains(torus, M)


def test_membership_certificate_embeds_forms(origami):
    cert = membership_certificate(origami, [1, 2, 0, 1])
    doc = cert.to_json()
    assert doc["member"] is True
    assert doc["surface_canonical"] == doc["image_canonical"]
    bad = membership_certificate(origami, [1, 1, 0, 1]).to_json()
    assert bad["surface_canonical"] != bad["image_canonical"]


def test_parabolics(torus, origami, octagon):
    assert find_parabolic(origami, (1, 0)).as_tuple() == (1, 2, 0, 1)
    assert find_parabolic(origami, (0, 1)).as_tuple() == (1, 0, 2, 1)
    assert find_parabolic(torus, (1, 0)).as_tuple() == (1, 1, 0, 1)
    P = find_parabolic(octagon, (1, 0))
    assert P.b == pytest.approx(2 * (1 + math.sqrt(2)))
    assert classify(P) == "parabolic"


def test_parabolic_in_irrational_direction(lshape):
    assert find_parabolic(lshape, (1, 0)) is None


def test_hyperbolic_on_origami(origami):
    cert = find_hyperbolic_certificate(origami, [(1, 0), (0, 1)])
    assert cert.gamma.as_tuple() == (5, 2, 2, 1)
    assert cert.trace == 6
    assert cert.translation_length == pytest.approx(2 * math.acosh(3), abs=1e-9)
    assert cert.membership.member


def test_hyperbolic_needs_two_directions(origami, lshape):
    assert find_hyperbolic(origami, [(1, 0)]) is None
    assert find_hyperbolic(lshape, [(1, 0), (0, 1)]) is None


def test_short_directions(origami):
    dirs = short_directions(origami, 4)
    assert (1.0, 0.0) in dirs and (0.0, 1.0) in dirs
    assert len(dirs) == 4


def test_snap_integers():
    M = Mat2._unchecked(1 + 1e-12, 2 - 1e-12, 0.0, 1.0)
    assert snap_integers(M).as_tuple() == (1, 2, 0, 1)


def test_driver_preconditions(origami, torus):
    with pytest.raises(PreconditionUnmet):
        dichotomy_driver(origami, 3.0, D=0.0)
    with pytest.raises(PreconditionUnmet):
        dichotomy_driver(torus, 3.0)
    lsmall = build_lshape(1.05, 1.05)
    with pytest.raises(PreconditionUnmet):
        dichotomy_driver(lsmall, 0.5)
    assert default_t_prime(origami) == 0.0


def test_sheet_counts_grow_slowly():
    x = three_square_origami()
    ts = [1.0, 2.0, 3.0, 4.0]
    counts = [len(near_returns(x, t, math.exp(-t / 124), (3, 3, 16))) for t in ts]
    assert all(sheet_count_check(n, t) for n, t in zip(counts, ts))
    slope = np.polyfit(ts, np.log(np.maximum(counts, 1)), 1)[0]
    assert slope < 6 * ClosingConstants().kappa4
