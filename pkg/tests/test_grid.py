"""Grid, stencil, and Hoelder-norm tests (with independent in-test oracles)."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isoperturb.grid import (
    ScalarField,
    VecField,
    check_inequalities,
    derivative,
    holder_norm,
    laplacian,
    leibniz_defect,
    make_grid,
    monitor_recurrence,
)


def brute_c0alpha(coords, vals, alpha):
    """Independent all-pairs oracle for the C^{0,alpha} node norm."""
    n = len(vals)
    sup = float(np.max(np.abs(vals)))
    quot = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.linalg.norm(coords[i] - coords[j]))
            quot = max(quot, abs(vals[i] - vals[j]) / d**alpha)
    return sup + quot


# ---------------------------------------------------------------------------
# construction


def test_make_grid_1d_basic():
    g = make_grid(1, 101, (0.5, 0.75))
    assert g.num_nodes == 101
    assert abs(g.spacing - 0.02) < 1e-15
    assert g.coords[0, 0] == -1.0 and g.coords[-1, 0] == 1.0
    assert g.interior_mask.sum() == 99
    assert list(g.boundary_idx) == [0, 100]


def test_make_grid_2d_node_count_matches_brute_force_scan():
    for N in (33, 65):
        g = make_grid(2, N, (0.5, 0.75))
        h = 2.0 / (N - 1)
        count = 0
        for i in range(N):
            for j in range(N):
                x, y = -1.0 + i * h, -1.0 + j * h
                if x * x + y * y <= 1.0 + 1e-12:
                    count += 1
        assert g.num_nodes == count
        assert np.all(np.sqrt((g.coords**2).sum(axis=1)) <= 1.0 + 1e-12)


def test_make_grid_2d_boundary_points_lie_on_circle():
    g = make_grid(2, 33, (0.5, 0.75))
    r = np.sqrt((g.boundary_points**2).sum(axis=1))
    assert np.max(np.abs(r - 1.0)) < 1e-12
    assert len(g.boundary_points) > 0


def test_make_grid_validation_errors_name_the_field():
    with pytest.raises(ValueError, match="dim"):
        make_grid(3, 33)
    with pytest.raises(ValueError, match="resolution"):
        make_grid(1, 10)
    with pytest.raises(ValueError, match="support_radii"):
        make_grid(1, 33, (0.8, 0.5))
    with pytest.raises(ValueError, match="support_radii"):
        make_grid(1, 33, (0.5, 1.0))


def test_2d_segments_are_contiguous_and_consistent():
    g = make_grid(2, 33, (0.5, 0.75))
    total = 0
    for seg in g.row_segments:
        assert np.all(np.diff(seg) == 1)  # row nodes are contiguous ids
        total += len(seg)
    assert total == g.num_nodes
    assert sum(len(s) for s in g.col_segments) == g.num_nodes


def test_to_lattice_roundtrip():
    g = make_grid(2, 33, (0.5, 0.75))
    vals = np.arange(g.num_nodes, dtype=float)
    lat = g.to_lattice(vals, fill=-1.0)
    assert np.all(lat[g.lattice_index[:, 0], g.lattice_index[:, 1]] == vals)


# ---------------------------------------------------------------------------
# derivatives


def test_d1_exact_on_quadratic_everywhere():
    g = make_grid(1, 101, (0.5, 0.75))
    x = g.coords[:, 0]
    f = ScalarField(g, x * x)
    df = derivative(f, (1,))
    assert np.max(np.abs(df.values - 2.0 * x)) < 1e-10


def test_d2_exact_on_cubic_everywhere():
    g = make_grid(1, 101, (0.5, 0.75))
    x = g.coords[:, 0]
    f = ScalarField(g, x**3)
    d2 = derivative(f, (2,))
    assert np.max(np.abs(d2.values - 6.0 * x)) < 1e-9


def test_second_derivative_error_quarters_under_refinement():
    errs = []
    for N in (101, 201, 401):
        g = make_grid(1, N, (0.5, 0.75))
        x = g.coords[:, 0]
        f = ScalarField(g, np.sin(np.pi * x))
        d2 = derivative(f, (2,))
        errs.append(np.max(np.abs(d2.values + np.pi**2 * np.sin(np.pi * x))))
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert 3.5 < errs[1] / errs[2] < 4.5


def test_mixed_derivative_exact_on_xy():
    g = make_grid(2, 33, (0.5, 0.75))
    x, y = g.coords[:, 0], g.coords[:, 1]
    f = ScalarField(g, x * y)
    dxy = derivative(f, (1, 1))
    # composed stencils degrade where a neighbour sits on a very short
    # row/column segment; restrict the exactness claim to the inner disk
    ok = np.sqrt((g.coords**2).sum(axis=1)) <= 0.75
    assert np.max(np.abs(dxy.values[ok] - 1.0)) < 1e-10
    assert np.all(np.isfinite(dxy.values))


def test_high_order_composed_stencils():
    g = make_grid(1, 201, (0.5, 0.75))
    x = g.coords[:, 0]
    inner = slice(4, -4)
    d3 = derivative(ScalarField(g, x**3), (3,))
    assert np.max(np.abs(d3.values[inner] - 6.0)) < 1e-8
    d4 = derivative(ScalarField(g, x**4), (4,))
    # double 1/h^2 application amplifies roundoff to ~1e-7 here
    assert np.max(np.abs(d4.values[inner] - 24.0)) < 1e-6


def test_derivative_order_cap():
    g = make_grid(1, 33, (0.5, 0.75))
    f = ScalarField(g, g.coords[:, 0])
    with pytest.raises(ValueError, match="unsupported"):
        derivative(f, (5,))
    with pytest.raises(ValueError, match="unsupported"):
        derivative(make_grid(2, 33).scalar(np.zeros(make_grid(2, 33).num_nodes)), (3, 2))


def test_laplacian_matches_sum_of_second_derivatives():
    g = make_grid(2, 33, (0.5, 0.75))
    x, y = g.coords[:, 0], g.coords[:, 1]
    f = ScalarField(g, np.sin(x) * np.cos(y))
    lap = laplacian(f)
    ref = derivative(f, (2, 0)).values + derivative(f, (0, 2)).values
    assert np.max(np.abs(lap.values - ref)) == 0.0


# ---------------------------------------------------------------------------
# Hoelder norms


def test_holder_norm_of_coordinate_is_one_plus_sqrt2():
    # sup |x| = 1; seminorm max |x-y|^{1/2} = sqrt(2) at the endpoint pair
    for N in (41, 101, 401):
        g = make_grid(1, N, (0.5, 0.75))
        f = ScalarField(g, g.coords[:, 0])
        hn = holder_norm(f, 0, 0.5)
        assert abs(hn.value - (1.0 + math.sqrt(2.0))) < 1e-12
        assert hn.seminorm_pairs_used == N * (N - 1) // 2


def test_holder_norm_matches_brute_force_oracle():
    g = make_grid(1, 41, (0.5, 0.75))
    x = g.coords[:, 0]
    vals = np.sin(2.0 * x) + 0.3 * x * x
    f = ScalarField(g, vals)
    hn = holder_norm(f, 0, 0.5)
    assert abs(hn.value - brute_c0alpha(g.coords, vals, 0.5)) < 1e-12


def test_holder_norm_2d_matches_brute_force_oracle():
    g = make_grid(2, 17, (0.5, 0.75))
    x, y = g.coords[:, 0], g.coords[:, 1]
    vals = np.cos(x + 2.0 * y)
    hn = holder_norm(ScalarField(g, vals), 0, 0.5)
    assert abs(hn.value - brute_c0alpha(g.coords, vals, 0.5)) < 1e-12


def test_holder_norm_vector_is_component_sum():
    g = make_grid(1, 41, (0.5, 0.75))
    x = g.coords[:, 0]
    u = VecField(g, np.column_stack([x, x * x]))
    total = holder_norm(u, 1, 0.5).value
    parts = sum(holder_norm(ScalarField(g, c), 1, 0.5).value for c in (x, x * x))
    assert abs(total - parts) < 1e-12


def test_holder_norm_m_adds_mth_derivative_part():
    g = make_grid(1, 101, (0.5, 0.75))
    x = g.coords[:, 0]
    f = ScalarField(g, np.sin(np.pi * x))
    n0 = holder_norm(f, 0, 0.5).value
    n2 = holder_norm(f, 2, 0.5).value
    d2 = derivative(f, (2,))
    assert abs(n2 - (n0 + holder_norm(d2, 0, 0.5).value)) < 1e-12


def test_holder_norm_validation():
    g = make_grid(1, 33, (0.5, 0.75))
    f = ScalarField(g, g.coords[:, 0])
    with pytest.raises(ValueError, match="alpha"):
        holder_norm(f, 0, 1.2)
    with pytest.raises(ValueError, match="m must"):
        holder_norm(f, 5, 0.5)


def test_subsample_pairs_deterministic():
    g1 = make_grid(1, 801, (0.5, 0.75), pair_seed=7)
    g2 = make_grid(1, 801, (0.5, 0.75), pair_seed=7)
    assert g1.pair_mode == "subsample"
    x = g1.coords[:, 0]
    f1 = ScalarField(g1, np.sin(3 * x))
    f2 = ScalarField(g2, np.sin(3 * x))
    assert holder_norm(f1, 0, 0.5).value == holder_norm(f2, 0, 0.5).value
    assert holder_norm(f1, 0, 0.5).seminorm_pairs_used == 10**6


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(-8.0, 8.0, allow_nan=False))
def test_holder_norm_homogeneity(lam):
    g = make_grid(1, 33, (0.5, 0.75))
    x = g.coords[:, 0]
    f = ScalarField(g, np.sin(2 * x) + x)
    a = holder_norm(ScalarField(g, lam * f.values), 1, 0.5).value
    b = abs(lam) * holder_norm(f, 1, 0.5).value
    assert abs(a - b) <= 1e-12 * max(1.0, b)


@settings(max_examples=20, deadline=None)
@given(c1=st.floats(-3.0, 3.0, allow_nan=False), c2=st.floats(-3.0, 3.0, allow_nan=False))
def test_holder_norm_triangle_inequality(c1, c2):
    g = make_grid(1, 33, (0.5, 0.75))
    x = g.coords[:, 0]
    u = ScalarField(g, c1 * np.sin(2 * x) + x * x)
    v = ScalarField(g, c2 * np.cos(x) - x)
    lhs = holder_norm(ScalarField(g, u.values + v.values), 1, 0.5).value
    rhs = holder_norm(u, 1, 0.5).value + holder_norm(v, 1, 0.5).value
    assert lhs <= rhs * (1.0 + 1e-12) + 1e-12


@settings(max_examples=20, deadline=None)
@given(
    a=st.floats(-2.0, 2.0, allow_nan=False),
    b=st.floats(-2.0, 2.0, allow_nan=False),
    c=st.floats(-2.0, 2.0, allow_nan=False),
    d=st.floats(-2.0, 2.0, allow_nan=False),
)
def test_product_inequality_exact_property(a, b, c, d):
    g = make_grid(1, 33, (0.5, 0.75))
    x = g.coords[:, 0]
    u = ScalarField(g, a + b * np.sin(3 * x))
    v = ScalarField(g, c * x + d * np.cos(x))
    lhs = holder_norm(ScalarField(g, u.values * v.values), 0, 0.5).value
    rhs = holder_norm(u, 0, 0.5).value * holder_norm(v, 0, 0.5).value
    assert lhs <= rhs * (1.0 + 1e-12)


@settings(max_examples=20, deadline=None)
@given(
    a0=st.floats(-2.0, 2.0, allow_nan=False),
    a1=st.floats(-2.0, 2.0, allow_nan=False),
    b0=st.floats(-2.0, 2.0, allow_nan=False),
    b1=st.floats(-2.0, 2.0, allow_nan=False),
    beta=st.sampled_from([(1,), (2,)]),
)
def test_leibniz_consistency_property(a0, a1, b0, b1, beta):
    g = make_grid(1, 101, (0.5, 0.75))
    x = g.coords[:, 0]
    u = ScalarField(g, a0 + a1 * x)
    v = ScalarField(g, b0 + b1 * x)
    assert leibniz_defect(g, u, v, beta) <= 1e-10 * max(1.0, abs(a0) + abs(a1)) * max(
        1.0, abs(b0) + abs(b1)
    )


# ---------------------------------------------------------------------------
# inequality suite / recurrence monitor


def test_check_inequalities_1d():
    g = make_grid(1, 61, (0.5, 0.75))
    rep = check_inequalities(g, samples=25, alpha=0.5, seed=1)
    assert rep["product_violations"] == 0
    assert rep["product_max_ratio"] <= 1.0 + 1e-12
    assert rep["leibniz_max_err"] <= 1e-10
    for key, val in rep.items():
        if key.endswith(tuple("0123456789")) or key.endswith("witness"):
            assert np.isfinite(val)


def test_check_inequalities_2d():
    g = make_grid(2, 33, (0.5, 0.75))
    rep = check_inequalities(g, samples=5, alpha=0.5, seed=2)
    assert rep["product_violations"] == 0
    assert rep["leibniz_max_err"] <= 1e-10


def test_monitor_recurrence_frozen_cases():
    # bound is a0 + 2C (+1e-12 slack)
    assert monitor_recurrence(1.0, 0.25, [1.0, 0.75, 0.625, 1.5]) is True
    assert monitor_recurrence(1.0, 0.25, [1.0, 1.5 + 1e-13]) is True
    assert monitor_recurrence(1.0, 0.25, [1.0, 1.5 + 1e-6]) is False
    assert monitor_recurrence(0.0, 0.0, [0.0, 0.0]) is True


@settings(max_examples=30, deadline=None)
@given(
    a0=st.floats(0.0, 5.0, allow_nan=False),
    C=st.floats(0.0, 5.0, allow_nan=False),
    seq=st.lists(st.floats(0.0, 30.0, allow_nan=False), min_size=1, max_size=8),
)
def test_monitor_recurrence_property(a0, C, seq):
    expected = all(s <= a0 + 2 * C + 1e-12 for s in seq)
    assert monitor_recurrence(a0, C, seq) == expected
