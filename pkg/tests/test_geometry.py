import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bowen_dim.errors import EscapeError, ValidationError
from bowen_dim.geometry import (MERGE_TOL, SliceApprox, backward_images, box_count, box_dimension,
                                default_ladder, is_refinement, stable_slice_approx, surviving_anchors)
from bowen_dim.pressure import similarity_dimension
from bowen_dim.systems import build_ifs


def cantor_intervals(n):
    # independent recursive construction of the middle-third approximant
    pieces = [(0.0, 1.0)]
    for _ in range(n):
        pieces = [q for a, b in pieces for q in ((a, a + (b - a) / 3), (b - (b - a) / 3, b))]
    return pieces


def test_depth_zero_is_full_fiber(cantor, example1, example2, rng):
    for sys in (cantor, example1, example2):
        x = surviving_anchors(sys, 1, rng)[0]
        s = stable_slice_approx(sys, x, 0)
        assert np.allclose(s.lo[0], sys.fiber_box[:, 0]) and np.allclose(s.hi[0], sys.fiber_box[:, 1])


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_cantor_slice_matches_recursive_construction(cantor, rng, n):
    x = surviving_anchors(cantor, 1, rng)[0]
    got = stable_slice_approx(cantor, x, n).pieces
    want = cantor_intervals(n)
    assert len(got) == 2 ** n
    assert np.allclose(np.array(got), np.array(want), atol=1e-12)


def test_cantor_depth_two_lengths(cantor, rng):
    s = stable_slice_approx(cantor, surviving_anchors(cantor, 1, rng)[0], 2)
    assert [b - a for a, b in s.pieces] == pytest.approx([1 / 9] * 4, abs=1e-15)


def test_example2_depth_one_pieces_merge(example2):
    # the two branches over the first base interval send the fiber onto [0.5, 1] and [0.1, 0.6]
    s = stable_slice_approx(example2, 0.50000000004, 1)
    assert len(s.pieces) == 1
    a, b = s.pieces[0]
    assert a == pytest.approx(0.1, abs=1e-3) and b == pytest.approx(1.0, abs=1e-3)


def test_box_count_examples():
    assert box_count(SliceApprox.from_pieces([(0.0, 1.0)]), 1 / 8) == 8
    assert box_count(SliceApprox.from_pieces([]), 0.1) == 0
    square = SliceApprox.from_pieces([((0.0, 1.0), (0.0, 1.0))])
    assert box_count(square, 1 / 8) == 64
    assert box_count(SliceApprox.from_pieces([(0.0, 1.0)]), 1e-13).below_merge_tol


def test_box_count_rejects_nonpositive_scale():
    with pytest.raises(ValidationError):
        box_count(SliceApprox.from_pieces([(0.0, 1.0)]), 0.0)


@pytest.mark.parametrize("n", [2, 4, 6, 9])
def test_cantor_counts_at_matching_scale(cantor, rng, n):
    s = stable_slice_approx(cantor, surviving_anchors(cantor, 1, rng)[0], n)
    assert box_count(s, 3.0 ** -n) == 2 ** n


def test_cantor_box_dimension(cantor, rng):
    s = stable_slice_approx(cantor, surviving_anchors(cantor, 1, rng)[0], 10)
    lad = box_dimension(s, [3.0 ** -k for k in range(2, 9)])
    assert abs(lad.slope - math.log(2) / math.log(3)) <= 0.02
    assert [n for _, n in lad.entries] == [2 ** k for k in range(2, 9)]
    assert lad.rows()[0][2] == pytest.approx(2 * math.log(3))


def test_full_square_dimension_two():
    square = SliceApprox.from_pieces([((0.0, 1.0), (0.0, 1.0))])
    lad = box_dimension(square, [2.0 ** -k for k in range(1, 8)])
    assert lad.slope == pytest.approx(2.0, abs=0.02)


def brute_force_cells(rects, eps):
    cells = set()
    m = int(round(1 / eps))
    for i in range(m):
        for j in range(m):
            for (a, b), (c, d) in rects:
                if a < (i + 1) * eps and b > i * eps and c < (j + 1) * eps and d > j * eps:
                    cells.add((i, j))
                    break
    return len(cells)


def _rect(draw_vals):
    x0, x1, y0, y1 = draw_vals
    return (min(x0, x1), max(x0, x1) + 1e-3), (min(y0, y1), max(y0, y1) + 1e-3)


@given(st.lists(st.tuples(*[st.floats(0.0, 0.99)] * 4), min_size=1, max_size=8), st.sampled_from([1 / 4, 1 / 8, 1 / 16]))
@settings(max_examples=60, deadline=None)
def test_two_dimensional_count_matches_rasterisation(raw, eps):
    rects = [_rect(r) for r in raw]
    s = SliceApprox.from_pieces(rects)
    assert box_count(s, eps) == brute_force_cells(rects, eps)


@given(st.lists(st.tuples(st.floats(0.0, 0.99), st.floats(1e-4, 0.2)), min_size=1, max_size=10))
@settings(max_examples=60, deadline=None)
def test_one_dimensional_count_matches_cell_scan(raw):
    pieces = [(a, min(a + w, 1.0)) for a, w in raw]
    s = SliceApprox.from_pieces(pieces)
    for eps in (1 / 8, 1 / 32, 1 / 128):
        m = int(round(1 / eps))
        want = sum(any(a < (i + 1) * eps and b > i * eps for a, b in pieces) for i in range(m))
        assert box_count(s, eps) == want


@pytest.mark.parametrize("name,n", [("cantor", 7), ("example2", 10), ("example1", 5)])
def test_nested_refinement(request, rng, name, n):
    sys = request.getfixturevalue(name)
    x = surviving_anchors(sys, 1, rng)[0]
    prev = stable_slice_approx(sys, x, 0)
    for k in range(1, n + 1):
        cur = stable_slice_approx(sys, x, k)
        assert is_refinement(cur, prev)
        prev = cur


@pytest.mark.parametrize("name,n", [("cantor", 10), ("example2", 12), ("example1", 6)])
def test_counts_nondecreasing_along_ladder(request, rng, name, n):
    sys = request.getfixturevalue(name)
    s = stable_slice_approx(sys, surviving_anchors(sys, 1, rng)[0], n)
    counts = [box_count(s, e) for e in default_ladder(sys, n)]
    assert all(b >= a for a, b in zip(counts, counts[1:]))


@pytest.mark.parametrize("name,n", [("cantor", 8), ("example2", 12), ("example1", 5)])
def test_composed_image_diameters(request, rng, name, n):
    sys = request.getfixturevalue(name)
    imgs = backward_images(sys, surviving_anchors(sys, 1, rng)[0], n)
    lo, hi = imgs.boxes(sys.fiber_box)
    diam = np.max(hi - lo, axis=1)
    assert np.all(diam <= sys.sup_contraction ** n * sys.fiber_diameter * (1 + 1e-12))


def test_merged_pieces_are_disjoint(example2, rng):
    s = stable_slice_approx(example2, surviving_anchors(example2, 1, rng)[0], 12)
    gaps = s.lo[1:, 0] - s.hi[:-1, 0]
    assert np.all(gaps > MERGE_TOL)
    assert s.measure <= example2.fiber_diameter


def test_coupling_rule_and_ladder_checks(cantor, rng):
    s = stable_slice_approx(cantor, surviving_anchors(cantor, 1, rng)[0], 4)
    with pytest.raises(ValidationError, match="resolution"):
        box_dimension(s, [3.0 ** -k for k in range(2, 9)])
    with pytest.raises(ValidationError):
        box_dimension(s, [0.5, 0.25, 0.125])
    with pytest.raises(ValidationError):
        box_dimension(s, [0.5, 0.25, 0.3, 0.1])


def test_escaping_anchor_reports_time(example2):
    with pytest.raises(EscapeError) as info:
        stable_slice_approx(example2, 0.3, 3)
    assert info.value.escape_time == 0
    with pytest.raises(EscapeError) as info:
        stable_slice_approx(example2, 0.50002, 4)
    assert info.value.escape_time == 1


@pytest.mark.parametrize("lam,m", [(1 / 3, 2), (1 / 4, 3), (1 / 5, 2)])
def test_disjoint_ifs_slope_matches_similarity_dimension(rng, lam, m):
    offsets = [k * (1 - lam) / (m - 1) for k in range(m)]
    sys = build_ifs([lam] * m, offsets)
    n = 10 if m == 2 else 7
    s = stable_slice_approx(sys, surviving_anchors(sys, 1, rng)[0], n)
    base = 1 / lam
    ladder = [base ** -k for k in range(2, n - 1)]
    assert abs(box_dimension(s, ladder).slope - similarity_dimension([lam] * m)) <= 0.03
