import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cliffordflow import algebra as ga
from cliffordflow.algebra import Multivector

import oracles

coeffs = arrays(np.float64, 16, elements=st.floats(-1.0, 1.0, allow_nan=False))
int_coeffs = arrays(np.float64, 16, elements=st.integers(-8, 8).map(float))


def e(name, value=1.0):
    return ga.basis(name) * value


def test_basis_order():
    assert list(ga.BLADE_NAMES) == oracles.NAMES


def test_cayley_table_matches_inversion_oracle():
    sign, target = oracles.cayley_oracle()
    assert np.array_equal(ga.GP_SIGN.astype(int), sign)
    nz = sign != 0
    assert np.array_equal(ga.GP_TARGET[nz], target[nz])


def test_cayley_dict_dump_is_consistent():
    table = ga.cayley_table()
    assert table["basis"] == oracles.NAMES
    assert table["entries"][ga.IDX["e1"]][ga.IDX["e2"]] == {"target": "e12", "sign": 1}
    assert table["entries"][ga.IDX["e0"]][ga.IDX["e0"]]["sign"] == 0


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ("e1", "e1", ("1", 1.0)),
        ("e0", "e0", ("1", 0.0)),
        ("e1", "e2", ("e12", 1.0)),
        ("e2", "e1", ("e12", -1.0)),
        ("e0123", "e0123", ("1", 0.0)),
        ("e123", "e123", ("1", -1.0)),
    ],
)
def test_basis_products(a, b, expected):
    name, value = expected
    assert np.array_equal(ga.geometric_product(e(a), e(b)), e(name, value))


def test_diagonal_metric_entries():
    for i, name in enumerate(["e0", "e1", "e2", "e3"]):
        k = ga.IDX[name]
        assert ga.GP_SIGN[k, k] == (0 if i == 0 else 1)


def test_dense_product_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.standard_normal((2, 16))
        assert np.allclose(ga.geometric_product(a, b), oracles.dense_product(a, b), atol=1e-13)


@settings(max_examples=200, deadline=None)
@given(coeffs, coeffs, coeffs)
def test_associativity(a, b, c):
    lhs = ga.geometric_product(ga.geometric_product(a, b), c)
    rhs = ga.geometric_product(a, ga.geometric_product(b, c))
    assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(1.0, np.abs(lhs)))


@settings(max_examples=100, deadline=None)
@given(int_coeffs, int_coeffs, int_coeffs)
def test_distributivity_exact(a, b, c):
    assert np.array_equal(ga.geometric_product(a, b + c), ga.geometric_product(a, b) + ga.geometric_product(a, c))
    assert np.array_equal(ga.outer_product(a + b, c), ga.outer_product(a, c) + ga.outer_product(b, c))
    assert np.array_equal(ga.join(a, b + c), ga.join(a, b) + ga.join(a, c))


@settings(max_examples=100, deadline=None)
@given(coeffs)
def test_vector_square_is_euclidean_scalar(x):
    v = ga.grade_project(x, 1)
    sq = ga.geometric_product(v, v)
    assert np.allclose(sq[1:], 0.0, atol=1e-15)
    assert sq[0] == pytest.approx(float(np.sum(v[2:5] ** 2)), abs=1e-14)


def test_outer_product_examples():
    assert np.array_equal(ga.outer_product(e("e1"), e("e1")), np.zeros(16))
    assert np.array_equal(ga.outer_product(e("e1"), e("e2")), e("e12"))


@settings(max_examples=100, deadline=None)
@given(coeffs, coeffs)
def test_vector_wedge_is_antisymmetric_part(x, y):
    a, b = ga.grade_project(x, 1), ga.grade_project(y, 1)
    anti = 0.5 * (ga.geometric_product(a, b) - ga.geometric_product(b, a))
    assert np.allclose(ga.outer_product(a, b), anti, atol=1e-15)
    assert np.allclose(ga.outer_product(a, a), 0.0, atol=1e-15)
    assert np.allclose(ga.grade_project(ga.geometric_product(a, b), 2), ga.outer_product(a, b), atol=1e-15)


def test_plane_meet_is_intersection_line():
    p1 = ga.embed_plane([1.0, 0.0, 0.0], 0.0)  # x = 0
    p2 = ga.embed_plane([0.0, 1.0, 0.0], -2.0)  # y = 2
    line = ga.outer_product(p1, p2)
    # points (0, 2, z) lie on both planes, hence on the line: P v L vanishes
    for zc in (-1.0, 0.0, 3.5):
        assert np.allclose(ga.join(ga.embed_point(0.0, 2.0, zc), line), 0.0, atol=1e-14)
    assert ga.norm(ga.join(ga.embed_point(1.0, 2.0, 0.0), line)) > 0.5


def test_inner_product_vectors():
    assert ga.inner_product_vectors(e("e1"), e("e1")) == 1.0
    assert ga.inner_product_vectors(e("e1"), e("e2")) == 0.0
    a = 2 * e("e1") + 3 * e("e2") + e("e0")
    assert ga.inner_product_vectors(a, e("e1")) == 2.0
    with pytest.raises(ValueError):
        ga.inner_product_vectors(e("e12"), e("e1"))


@settings(max_examples=100, deadline=None)
@given(coeffs, coeffs)
def test_inner_product_polarization(x, y):
    a, b = ga.grade_project(x, 1), ga.grade_project(y, 1)
    sq = lambda v: ga.geometric_product(v, v)[0]
    assert ga.inner_product_vectors(a, b) == pytest.approx(0.5 * (sq(a + b) - sq(a) - sq(b)), abs=1e-14)


def test_reverse_examples():
    assert np.array_equal(ga.reverse(e("e12")), -e("e12"))
    assert np.array_equal(ga.reverse(e("e1")), e("e1"))
    assert np.array_equal(ga.reverse(e("e0123")), e("e0123"))


@settings(max_examples=100, deadline=None)
@given(coeffs, coeffs)
def test_reverse_properties(a, b):
    assert np.array_equal(ga.reverse(ga.reverse(a)), a)
    lhs = ga.reverse(ga.geometric_product(a, b))
    rhs = ga.geometric_product(ga.reverse(b), ga.reverse(a))
    assert np.allclose(lhs, rhs, atol=1e-14)


def test_reverse_signs_from_blade_sorting():
    # reversing a word of k distinct generators, then sorting it back, takes k(k-1)/2 swaps
    for i, name in enumerate(oracles.NAMES):
        gens = oracles._gens(name)
        swaps = sum(1 for p in range(len(gens)) for q in range(p + 1, len(gens)) if gens[::-1][p] > gens[::-1][q])
        assert ga.REVERSE_SIGNS[i] == (-1) ** swaps


def test_grade_involution():
    assert np.array_equal(ga.grade_involution(e("e1")), -e("e1"))
    assert np.array_equal(ga.grade_involution(e("e12")), e("e12"))
    x = ga.scalar(1.0) + e("e1") + e("e12") + e("e123")
    assert np.array_equal(ga.grade_involution(x), ga.scalar(1.0) - e("e1") + e("e12") - e("e123"))


@settings(max_examples=100, deadline=None)
@given(coeffs)
def test_grade_projection(x):
    parts = [ga.grade_project(x, k) for k in range(5)]
    assert np.array_equal(sum(parts), x)
    for k, p in enumerate(parts):
        assert np.array_equal(ga.grade_project(p, k), p)
        assert ga.grades_of(p) <= {k}


def test_grade_projection_example_and_errors():
    x = ga.scalar(1.0) + e("e1") + e("e12")
    assert np.array_equal(ga.grade_project(x, 1), e("e1"))
    for bad in (-1, 5):
        with pytest.raises(ValueError):
            ga.grade_project(x, bad)


def test_norm_examples():
    assert ga.norm(3 * e("e1") + 4 * e("e2")) == 5.0
    assert ga.norm(e("e0")) == 0.0
    assert ga.norm(e("e123")) == 1.0


@settings(max_examples=100, deadline=None)
@given(coeffs)
def test_norm_matches_reverse_product(x):
    # <~x x>_0: every Euclidean blade reverses to its own inverse, e0 blades square to zero
    sq = ga.geometric_product(ga.reverse(x), x)[0]
    assert ga.norm(x) >= 0.0
    assert ga.norm(x) ** 2 == pytest.approx(sq, abs=1e-13)


def test_norm_zero_iff_only_e0_blades():
    x = np.zeros(16)
    x[ga.E0_MASK] = np.arange(1, 9)
    assert ga.norm(x) == 0.0
    x[ga.IDX["e23"]] = 1e-3
    assert ga.norm(x) > 0.0


def test_hodge_dual_of_e03():
    assert np.array_equal(ga.hodge_dual(e("e03")), e("e12"))


def test_hodge_dual_defining_identity():
    pseudo = e("e0123")
    for name in oracles.NAMES:
        x = e(name)
        euclid = oracles._gens(name)
        euclid_name = "e" + "".join(str(g) for g in euclid if g != 0) if any(g != 0 for g in euclid) else "1"
        xe = e(euclid_name)
        rhs = ga.geometric_product(ga.geometric_product(xe, ga.reverse(xe)), pseudo)
        assert np.array_equal(ga.geometric_product(x, ga.hodge_dual(x)), rhs), name


def test_hodge_round_trip_all_blades():
    for name in oracles.NAMES:
        assert np.array_equal(ga.inverse_hodge_dual(ga.hodge_dual(e(name))), e(name))
        assert np.array_equal(ga.hodge_dual(ga.inverse_hodge_dual(e(name))), e(name))


def test_infinity_norm_examples():
    assert ga.infinity_norm(e("e0")) == 1.0
    assert ga.infinity_norm(e("e1")) == 0.0
    assert ga.infinity_norm(np.zeros(16)) == 0.0


@settings(max_examples=50, deadline=None)
@given(coeffs, coeffs)
def test_join_definition_and_bilinearity(a, b):
    expected = ga.inverse_hodge_dual(ga.outer_product(ga.hodge_dual(b), ga.hodge_dual(a)))
    assert np.array_equal(ga.join(a, b), expected)
    assert np.allclose(ga.join(2.0 * a, b), 2.0 * ga.join(a, b), atol=1e-14)


def test_join_examples():
    P = ga.embed_point(1.0, -2.0, 0.5)
    assert np.array_equal(ga.join(P, P), np.zeros(16))
    origin, x1 = ga.embed_point(0.0, 0.0, 0.0), ga.embed_point(1.0, 0.0, 0.0)
    line = ga.join(origin, x1)
    # the x-axis is the meet of the planes z = 0 and y = 0
    axis = ga.outer_product(e("e3"), e("e2"))
    assert ga.grades_of(line) == {2}
    assert np.allclose(line, axis, atol=0.0)
    for xc in (-3.0, 0.25, 7.0):
        assert np.allclose(ga.join(ga.embed_point(xc, 0.0, 0.0), line), 0.0)


def test_sandwich_identity_and_reflections():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(16)
    assert np.allclose(ga.sandwich(ga.scalar(1.0), x), x)
    assert np.array_equal(ga.sandwich(e("e1"), e("e1"), odd=True), -e("e1"))
    reflected = ga.sandwich(e("e1"), ga.embed_point(1.0, 0.0, 0.0), odd=True)
    assert np.allclose(ga.extract_point(reflected), [-1.0, 0.0, 0.0])


def test_sandwich_reflection_matches_cartesian_mirror():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        d = rng.uniform(-3, 3)
        x = rng.uniform(-5, 5, 3)
        got = ga.extract_point(ga.sandwich(ga.embed_plane(n, d), ga.embed_point(x), odd=True))
        assert np.allclose(got, oracles.reflect_point(x, n, d), atol=1e-12)


def test_two_reflections_make_one_motor():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p1 = ga.normalize(ga.embed_plane(rng.standard_normal(3), rng.uniform(-2, 2)))
        p2 = ga.normalize(ga.embed_plane(rng.standard_normal(3), rng.uniform(-2, 2)))
        x = rng.standard_normal(16)
        twice = ga.sandwich(p2, ga.sandwich(p1, x, odd=True), odd=True)
        once = ga.sandwich(ga.geometric_product(p2, p1), x)
        assert np.allclose(twice, once, atol=1e-12)


def test_sandwich_preserves_grades_and_outermorphism():
    rng = np.random.default_rng(4)
    p = ga.normalize(ga.embed_plane(rng.standard_normal(3), 0.7))
    a = ga.grade_project(rng.standard_normal(16), 1)
    b = ga.grade_project(rng.standard_normal(16), 1)
    for k in range(5):
        blade = ga.grade_project(rng.standard_normal(16), k)
        assert ga.grades_of(ga.sandwich(p, blade, odd=True), atol=1e-13) <= {k}
    lhs = ga.sandwich(p, ga.outer_product(a, b), odd=True)
    rhs = ga.outer_product(ga.sandwich(p, a, odd=True), ga.sandwich(p, b, odd=True))
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_sandwich_rejects_non_unit_versor():
    with pytest.raises(ValueError):
        ga.sandwich(2.0 * e("e1"), e("e2"), odd=True)
    with pytest.raises(ValueError):
        ga.sandwich(ga.scalar(1.0 + 1e-8), e("e2"))


def test_point_embedding():
    assert np.array_equal(ga.embed_point(0.0, 0.0, 0.0), e("e123"))
    p = (1.5, -2.0, 3.25)
    assert tuple(ga.extract_point(ga.embed_point(*p))) == p
    with pytest.raises(ValueError):
        ga.extract_point(e("e023"))


def test_point_is_meet_of_coordinate_planes():
    x, y, z = 0.3, -1.2, 2.0
    planes = [ga.embed_plane(n, -c) for n, c in (([1, 0, 0], x), ([0, 1, 0], y), ([0, 0, 1], z))]
    meet = ga.outer_product(ga.outer_product(planes[0], planes[1]), planes[2])
    assert np.allclose(meet, ga.embed_point(x, y, z))


def test_point_plane_incidence():
    rng = np.random.default_rng(5)
    n = rng.standard_normal(3)
    n /= np.linalg.norm(n)
    x = rng.standard_normal(3)
    d = -float(n @ x)  # plane through x
    wedge = ga.outer_product(ga.embed_point(x), ga.embed_plane(n, d))
    assert abs(wedge[ga.IDX["e0123"]]) < 1e-14
    assert ga.infinity_norm(wedge) < 1e-14


def test_metric_relation_examples():
    P = lambda *c: ga.embed_point(*c)
    assert ga.dist_point_point(P(0, 0, 0), P(3, 4, 0)) == pytest.approx(5.0, abs=1e-15)
    assert ga.dist_point_plane(P(0, 0, 0), e("e1")) == 0.0
    assert ga.angle_plane_plane(e("e1"), e("e2")) == pytest.approx(math.pi / 2, abs=1e-15)


def _unit(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def test_metric_relations_against_cartesian():
    rng = np.random.default_rng(6)
    n = 1000
    x, u, v = rng.uniform(-10, 10, (3, n, 3))
    normals, normals2 = _unit(rng, n), _unit(rng, n)
    d = rng.uniform(-5, 5, n)
    Px = ga.embed_point(x)
    L = ga.normalize(ga.join(ga.embed_point(u), ga.embed_point(v)))
    planes, planes2 = ga.embed_plane(normals, d), ga.embed_plane(normals2, -d)

    got = ga.dist_point_point(Px, ga.embed_point(u))
    assert np.allclose(got, np.linalg.norm(x - u, axis=-1), atol=1e-10, rtol=0)

    got = ga.dist_point_line(Px, L)
    exp = [oracles.point_line_distance(x[i], u[i], v[i]) for i in range(n)]
    assert np.allclose(got, exp, atol=1e-10, rtol=0)

    got = ga.dist_point_plane(Px, planes)
    assert np.allclose(got, np.abs(np.einsum("ni,ni->n", normals, x) + d), atol=1e-10, rtol=0)

    got = ga.angle_plane_plane(planes, planes2)
    exp = [oracles.plane_plane_angle(normals[i], normals2[i]) for i in range(n)]
    assert np.allclose(got, exp, atol=1e-10, rtol=0)

    got = ga.angle_plane_line(planes, L)
    exp = [oracles.plane_line_angle(normals[i], v[i] - u[i]) for i in range(n)]
    assert np.allclose(got, exp, atol=1e-10, rtol=0)


def test_metric_relations_reject_unnormalized():
    with pytest.raises(ValueError):
        ga.dist_point_point(2.0 * ga.embed_point(0, 0, 0), ga.embed_point(1, 0, 0))
    with pytest.raises(ValueError):
        ga.angle_plane_plane(2.0 * e("e1"), e("e2"))


def test_multivector_wrapper():
    a, b = Multivector.blade("e1"), Multivector.blade("e2")
    assert (a * b).allclose(Multivector.blade("e12"))
    assert (a ^ a).allclose(0.0)
    assert (~(a * b)).allclose(Multivector.blade("e12", -1.0))
    assert (a + 1).grade(0).allclose(1.0)
    p, q = Multivector.point(0, 0, 0), Multivector.point(3, 4, 0)
    assert (p & q).norm() == pytest.approx(5.0)
    assert Multivector.blade("e0").inf_norm() == 1.0
    assert Multivector.blade("e03").dual().allclose(Multivector.blade("e12"))
    with pytest.raises(ValueError):
        Multivector(np.zeros(3))
