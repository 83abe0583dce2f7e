import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parabolab.grid import (
    CellSet,
    GridFunction,
    GridSpec,
    build_ball_grid,
    fd_derivatives,
    lp_norm,
    read_gf01,
    sample_function,
    write_gf01,
)


def test_spacing_and_counts(grid65):
    assert grid65.h == 1 / 32
    assert grid65.shape == (65, 65)
    # node counts of the 65^2 ball and its one-node ring
    assert grid65.mask.sum() == 3209
    assert grid65.interior.sum() == 2957
    assert grid65.boundary_ring.sum() == 252
    assert not np.any(grid65.interior & grid65.boundary_ring)


def test_resolutions_used_by_the_suite():
    assert build_ball_grid(2, 129).h == 1 / 64
    assert build_ball_grid(2, 257).h == 1 / 128


@pytest.mark.parametrize("m", [2, 4, 64])
def test_bad_resolution(m):
    with pytest.raises(ValueError):
        build_ball_grid(2, m)


def test_bad_dimension():
    with pytest.raises(ValueError):
        GridSpec(4, 9)


def test_outside_ball_is_nan(grid65):
    u = sample_function(lambda x: x[:, 0], grid65)
    assert np.all(np.isnan(u.values[~grid65.mask]))
    assert np.all(np.isfinite(u.values[grid65.mask]))


def test_ball_measure_converges():
    for m, tol in [(65, 0.02), (129, 0.01)]:
        spec = build_ball_grid(2, m)
        assert abs(spec.mask.sum() * spec.cell_volume - np.pi) < tol


def test_fd_hessian_exact_on_quadratics(grid65):
    A = np.array([[2.0, 0.5], [0.5, -1.0]])
    u = sample_function(lambda x: 0.5 * np.einsum("ni,ij,nj->n", x, A, x), grid65)
    grad, hess, valid = fd_derivatives(u)
    assert valid.sum() > 0
    np.testing.assert_allclose(hess[valid], np.broadcast_to(A, hess[valid].shape), atol=1e-9)


def test_lp_norm_of_constant(grid65):
    one = sample_function(lambda x: np.ones(len(x)), grid65)
    vol = grid65.mask.sum() * grid65.cell_volume
    assert lp_norm(one, 2.0) == pytest.approx(vol**0.5)
    assert lp_norm(one, 0.3) == pytest.approx(vol ** (1 / 0.3))


def test_cellset_algebra(grid65):
    a = CellSet(grid65, grid65.radius <= 0.5)
    b = CellSet(grid65, grid65.radius <= 0.25)
    assert b.issubset(a)
    assert (a & b).count == b.count
    assert (a | b).count == a.count
    assert a.complement().count + a.count == grid65.mask.sum()


def test_gf01_roundtrip(tmp_path, grid65):
    u = sample_function(lambda x: np.sin(3 * x[:, 0]) * x[:, 1], grid65)
    write_gf01(tmp_path / "u.gf", u)
    v = read_gf01(tmp_path / "u.gf")
    assert v.spec == grid65
    assert np.array_equal(np.isnan(u.values), np.isnan(v.values))
    assert np.array_equal(u.values[grid65.mask], v.values[grid65.mask])
    raw = (tmp_path / "u.gf").read_bytes()
    assert raw[:4] == b"GF01"
    assert len(raw) == 4 + 4 + 4 + 8 + 8 * 65 * 65


def test_gf01_rejects_garbage(tmp_path):
    (tmp_path / "bad.gf").write_bytes(b"XXXX" + bytes(30))
    with pytest.raises(ValueError):
        read_gf01(tmp_path / "bad.gf")


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([5, 9, 17, 33]), st.integers(1, 3))
def test_masks_are_symmetric(m, ndim):
    spec = build_ball_grid(ndim, m)
    mask = spec.mask
    for ax in range(ndim):
        assert np.array_equal(mask, np.flip(mask, axis=ax))
    assert mask[spec.center_index]


def test_scaled_and_sup(grid65):
    u = sample_function(lambda x: x[:, 0] - 0.5 * x[:, 1], grid65)
    assert u.scaled(2.0).sup_norm() == pytest.approx(2 * u.sup_norm())
    assert isinstance(u.scaled(2.0), GridFunction)


def test_fd_hessian_second_order():
    spec = build_ball_grid(2, 129)
    u = sample_function(lambda x: np.sin(x[:, 0]), spec)
    _, hess, valid = fd_derivatives(u)
    exact = -np.sin(spec.coords[..., 0])
    assert np.max(np.abs(hess[..., 0, 0][valid] - exact[valid])) <= spec.h**2
