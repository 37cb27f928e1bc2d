import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strata_lab.errors import DisconnectedSurface, InvalidParameter, MalformedSurface
from strata_lab.sl2 import random_sl2
from strata_lab.surface import (
    TranslationSurface,
    apply_matrix,
    area,
    build_lshape,
    build_origami,
    build_torus,
    normalize_area,
    perm_from_cycles,
    scale,
    surface_from_json,
    surface_from_spec,
    validate,
)


def test_octagon_is_in_H2(octagon):
    rep = validate(octagon)
    assert rep.genus == 2
    assert rep.vertex_classes == ((0, 6),)
    assert rep.in_H2
    assert rep.area == pytest.approx(2 * (1 + math.sqrt(2)), abs=1e-12)


def test_origami_is_in_H2(origami):
    rep = validate(origami)
    assert (rep.genus, rep.cone_angles) == (2, [6 * math.pi])
    assert rep.area == pytest.approx(3.0)


def test_marked_torus(torus):
    rep = validate(torus)
    assert (rep.genus, rep.cone_angles, rep.in_H2) == (1, [2 * math.pi], False)
    assert rep.marked_points == 1


def test_lshape_area(lshape):
    rep = validate(lshape)
    assert rep.in_H2
    assert rep.area == pytest.approx(math.sqrt(2) + math.sqrt(3) - 1)


def test_unmatched_gluing_rejected():
    sq = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    with pytest.raises(MalformedSurface):
        TranslationSurface.from_data([sq], [((0, 0), (0, 2))])


def test_non_opposite_gluing_rejected():
    sq = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    S = TranslationSurface.from_data([sq], [((0, 0), (0, 1)), ((0, 2), (0, 3))])
    with pytest.raises(MalformedSurface):
        validate(S)


def test_open_polygon_rejected():
    S = TranslationSurface.from_data([[(1, 0), (0, 1), (-1, 0), (0, -0.5)]], [((0, 0), (0, 2)), ((0, 1), (0, 3))])
    with pytest.raises(MalformedSurface):
        validate(S)


def test_disconnected_rejected():
    sq = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    S = TranslationSurface.from_data([sq, sq], [((0, 0), (0, 2)), ((0, 1), (0, 3)), ((1, 0), (1, 2)), ((1, 1), (1, 3))])
    with pytest.raises(DisconnectedSurface):
        validate(S)


def test_builders_validate_parameters():
    with pytest.raises(InvalidParameter):
        build_lshape(0.5, 2.0)
    with pytest.raises(InvalidParameter):
        build_torus(((0, 1), (1, 0)))
    with pytest.raises(InvalidParameter):
        scale(build_torus(), -1.0)


def test_perm_from_cycles():
    assert perm_from_cycles("(1 2)", 3) == [1, 0, 2]
    assert perm_from_cycles("(1 3)(2)", 3) == [2, 1, 0]


def test_four_square_origami_stratum():
    # a 4-square origami with a regular corner still has genus 2
    S = build_origami(perm_from_cycles("(1 2 3)", 4), perm_from_cycles("(1 4)", 4))
    rep = validate(S)
    assert rep.genus == 2
    assert sorted(k for _, k in rep.vertex_classes) == [2, 6]
    assert not rep.in_H2


def test_normalize_area(octagon):
    assert area(normalize_area(octagon)) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_apply_matrix_preserves_area_and_stratum(seed):
    S = build_lshape(math.sqrt(2), math.sqrt(3))
    A = random_sl2(np.random.default_rng(seed))
    T = apply_matrix(A, S)
    assert area(T) == pytest.approx(area(S), rel=1e-9)
    assert validate(T, tol=1e-7).in_H2


def test_json_roundtrip(octagon, origami):
    for S in (octagon, origami):
        doc = json.dumps(S.to_json())
        back = surface_from_json(doc)
        assert back.edgewise_equal(S)


def test_builder_shorthands():
    assert surface_from_spec("origami:12,13").edgewise_equal(surface_from_json({"origami": {"h": [1, 0, 2], "v": [2, 1, 0]}}))
    assert validate(surface_from_spec("lshape:2,3")).in_H2
    with pytest.raises(InvalidParameter):
        surface_from_spec("klein-bottle")
