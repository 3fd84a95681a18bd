import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracmlmc.errors import DomainError, GridMismatchError
from fracmlmc.mesh import Grid1D, MeshHierarchy, SolutionField, field_to_csv, prolong, restrict, transfer


def test_grid_geometry():
    g = Grid1D(5.0, 41)
    assert g.P == 20
    assert g.dx == pytest.approx(10 / 41, rel=1e-15)
    assert g.centers[20] == 0.0
    assert g.edges[0] == -5.0 and g.edges[-1] == 5.0
    assert np.allclose(np.diff(g.edges), g.dx, rtol=1e-12)
    assert np.allclose(g.centers, 0.5 * (g.edges[1:] + g.edges[:-1]), atol=1e-14)


@pytest.mark.parametrize("n", [0, -3, 40, 2])
def test_even_or_nonpositive_counts_rejected(n):
    with pytest.raises(DomainError):
        Grid1D(5.0, n)


def test_bad_half_width():
    with pytest.raises(DomainError):
        Grid1D(0.0, 41)


def test_hierarchy_counts():
    h = MeshHierarchy(Grid1D(5.0, 41), 4)
    assert [g.n_cells for g in h] == [41, 123, 369, 1107, 3321]
    assert h.dx(4) == pytest.approx(10 / 41 / 81)
    assert h.finest.is_refinement_of(h[3])


def test_refined_grid_keeps_centre_cell():
    g = Grid1D(5.0, 41).refine()
    assert g.centers[g.P] == 0.0
    # the coarse centre cell splits into fine cells -1, 0, 1
    coarse_edges = Grid1D(5.0, 41).edges
    assert np.allclose(g.edges[::3], coarse_edges, atol=1e-13)


def test_restrict_of_prolong_is_identity(rng):
    coarse = Grid1D(5.0, 41)
    f = SolutionField(coarse, rng.random(41))
    back = restrict(prolong(f, coarse.refine()), coarse)
    assert np.array_equal(back.values, f.values)


def test_restrict_preserves_mass(rng):
    fine = Grid1D(5.0, 123)
    f = SolutionField(fine, rng.random(123))
    assert restrict(f, Grid1D(5.0, 41)).mass() == pytest.approx(f.mass(), rel=1e-13)


def test_transfer_mismatch():
    f = SolutionField(Grid1D(5.0, 41), np.zeros(41))
    with pytest.raises(GridMismatchError):
        restrict(f, Grid1D(5.0, 41))
    with pytest.raises(GridMismatchError):
        transfer(f, Grid1D(5.0, 205))
    with pytest.raises(GridMismatchError):
        prolong(f, Grid1D(5.0, 369))


def test_transfer_multi_level(rng):
    g0 = Grid1D(5.0, 41)
    f = SolutionField(g0, rng.random(41))
    up = transfer(f, g0.refine(2))
    assert up.grid.n_cells == 369
    assert np.array_equal(transfer(up, g0).values, f.values)


def test_field_is_frozen_copy():
    g = Grid1D(1.0, 3)
    src = np.array([1.0, 2.0, 3.0])
    f = SolutionField(g, src)
    src[0] = 99.0
    assert f.values[0] == 1.0
    with pytest.raises(ValueError):
        f.values[0] = 5.0


def test_field_rejects_bad_values():
    g = Grid1D(1.0, 3)
    with pytest.raises(GridMismatchError):
        SolutionField(g, [1.0, 2.0])
    with pytest.raises(DomainError):
        SolutionField(g, [1.0, np.nan, 2.0])


def test_csv_round_trip(rng):
    g = Grid1D(5.0, 41)
    f = SolutionField(g, rng.random(41))
    text = field_to_csv(f, "# test")
    rows = text.splitlines()[2:]
    vals = np.array([float(r.split(",")[1]) for r in rows])
    assert np.array_equal(vals, f.values)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 30), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_prolong_restrict_property(p, vals):
    g = Grid1D(2.0, 2 * p + 1)
    v = np.resize(np.array(vals), g.n_cells)
    f = SolutionField(g, v)
    assert np.array_equal(restrict(prolong(f, g.refine()), g).values, v)
