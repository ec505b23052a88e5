"""Torus Fourier analysis: Dirichlet form, principal eigenvalue, Parseval."""

import numpy as np
import pytest
from scipy import integrate

import fpam.spectral as sp
from fpam.errors import ConfigInvalid
from fpam.spectral import TorusField, TorusGrid


def random_field(grid, rng, scale=1.0):
    return TorusField.from_values(grid, scale * rng.standard_normal((grid.N,) * grid.d))


def test_dirichlet_constant_is_zero():
    grid = TorusGrid(M=1.0, N=64, d=1)
    f = TorusField.from_values(grid, np.full(64, 3.3))
    assert sp.dirichlet_form_torus(f, 1.5) == 0.0


def test_dirichlet_single_cosine_hand_value():
    alpha, M = 1.2, 2.0
    grid = TorusGrid(M=M, N=256, d=1)
    x = grid.axis_points()
    f = TorusField.from_values(grid, np.cos(2 * np.pi * x / M))
    # one frequency pair at k = +-1 with fhat = M/2
    assert sp.dirichlet_form_torus(f, alpha, c_conv=1.0) \
        == pytest.approx(M ** (1 - alpha) / 2, rel=1e-12)
    assert sp.dirichlet_form_torus(f, alpha) \
        == pytest.approx((2 * np.pi) ** alpha * M ** (1 - alpha) / 2, rel=1e-12)


def test_dirichlet_translation_invariance():
    grid = TorusGrid(M=1.0, N=64, d=1)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(64)
    a = sp.dirichlet_form_torus(TorusField.from_values(grid, vals), 1.4)
    b = sp.dirichlet_form_torus(TorusField.from_values(grid, np.roll(vals, 17)), 1.4)
    assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.filterwarnings("ignore::UserWarning", "ignore:.*roundoff.*")
@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_dirichlet_matches_real_space_double_integral():
    # bare-lattice convention against the singular real-space quadratic form
    alpha, M = 1.3, 2.0
    grid = TorusGrid(M=M, N=512, d=1)
    x = grid.axis_points()
    vals = np.cos(2 * np.pi * x / M) + 0.5 * np.sin(4 * np.pi * x / M)
    field = TorusField.from_values(grid, vals)
    lattice_form = sp.dirichlet_form_torus(field, alpha, c_conv=1.0)

    # normalizer: |xi|^alpha = C int (1 - cos(2 pi xi y)) / |y|^(1+alpha) dy
    c_int, _ = integrate.quad(lambda y: (1 - np.cos(y)) / y ** (1 + alpha),
                              0, np.inf, limit=400)
    C_ad = 1.0 / (2 * c_int * (2 * np.pi) ** alpha)

    h = lambda z: np.cos(2 * np.pi * z / M) + 0.5 * np.sin(4 * np.pi * z / M)

    def outer(xv):
        inner, _ = integrate.quad(
            lambda y: (h(xv + y) - h(xv)) ** 2 / abs(y) ** (1 + alpha),
            1e-8, 60.0, limit=400)
        return 2 * inner  # symmetric in y

    xs = np.linspace(0, M, 33)[:-1]
    vals_out = np.array([outer(xv) for xv in xs])
    real_form = C_ad / 2 * np.mean(vals_out) * M
    assert real_form == pytest.approx(lattice_form, rel=2e-3)


def test_lambda_constant_potential_exact():
    grid = TorusGrid(M=1.0, N=64, d=1)
    f = TorusField.from_values(grid, np.full(64, 0.7))
    assert sp.lambda_M(f, 1.5, 16) == pytest.approx(0.7, abs=1e-10)


def test_lambda_shift_identity():
    grid = TorusGrid(M=1.0, N=128, d=1)
    rng = np.random.default_rng(3)
    vals = 0.3 * rng.standard_normal(128)
    l0 = sp.lambda_M(TorusField.from_values(grid, vals), 1.5, 20)
    l1 = sp.lambda_M(TorusField.from_values(grid, vals + 0.9), 1.5, 20)
    assert l1 - l0 == pytest.approx(0.9, abs=1e-9)


def test_lambda_floor_and_monotonicity():
    grid = TorusGrid(M=1.0, N=128, d=1)
    rng = np.random.default_rng(4)
    vals = 0.5 * rng.standard_normal(128)
    f = TorusField.from_values(grid, vals)
    assert sp.lambda_M(f, 1.2, 16) >= vals.mean() - 1e-12
    g = TorusField.from_values(grid, vals + np.abs(rng.standard_normal(128)))
    assert sp.lambda_M(g, 1.2, 16) >= sp.lambda_M(f, 1.2, 16) - 1e-12


def test_lambda_K_trunc_monotone():
    grid = TorusGrid(M=1.0, N=128, d=1)
    rng = np.random.default_rng(5)
    f = TorusField.from_values(grid, 0.4 * rng.standard_normal(128))
    ls = [sp.lambda_M(f, 1.5, K) for K in (2, 4, 8, 16, 32)]
    assert np.all(np.diff(ls) >= -1e-12)
    # geometric shrink of the increments for a smooth field
    smooth = TorusField.from_values(
        grid, 0.6 * np.exp(np.cos(2 * np.pi * grid.axis_points()) - 1))
    inc = np.diff([sp.lambda_M(smooth, 1.5, K) for K in (2, 4, 8, 16)])
    assert inc[1] < inc[0] and inc[2] < inc[1]


def test_lambda_second_order_perturbation():
    grid = TorusGrid(M=1.0, N=128, d=1)
    eps = 1e-3
    f = TorusField.from_values(grid, eps * np.cos(2 * np.pi * grid.axis_points()))
    pred = eps ** 2 * 2 * 0.25 / (2 * np.pi) ** 1.5
    assert sp.lambda_M(f, 1.5, 16) == pytest.approx(pred, rel=1e-4)


def test_lambda_lanczos_agrees_with_dense(monkeypatch):
    grid = TorusGrid(M=1.0, N=128, d=1)
    x = grid.axis_points()
    f = TorusField.from_values(grid, 0.5 * np.cos(2 * np.pi * x)
                               + 0.2 * np.sin(4 * np.pi * x))
    dense = sp.lambda_M(f, 1.0, 30)
    monkeypatch.setattr(sp, "DENSE_LATTICE_LIMIT", 10)
    lanczos = sp.lambda_M(f, 1.0, 30, tol=1e-12)
    assert lanczos == pytest.approx(dense, abs=1e-9)


def test_parseval_zero_shift():
    grid = TorusGrid(M=1.0, N=64, d=1)
    f = random_field(grid, np.random.default_rng(6))
    assert sp.parseval_check(f, [0.0]) == (0.0, 0.0)


@pytest.mark.parametrize("d,N,M", [(1, 128, 1.0), (2, 32, 3.0)])
def test_parseval_grid_shifts(d, N, M):
    rng = np.random.default_rng(7)
    grid = TorusGrid(M=M, N=N, d=d)
    for _ in range(5):
        f = random_field(grid, rng)
        cells = rng.integers(1, N, size=d)
        left, right = sp.parseval_check(f, cells / N)
        assert left == pytest.approx(right, rel=1e-12)


def test_parseval_half_shift_cosine_hand_value():
    M, N = 2.0, 64
    grid = TorusGrid(M=M, N=N, d=1)
    f = TorusField.from_values(grid, np.cos(2 * np.pi * grid.axis_points() / M))
    left, right = sp.parseval_check(f, [0.5])
    # modes k = +-1, |fhat| = M/2, 1 - cos(pi) = 2: left = (2/M) * 2 * (M/2)^2 * 2
    assert left == pytest.approx(4.0 * M / 2, rel=1e-12)
    assert right == pytest.approx(left, rel=1e-12)


def test_parseval_requires_grid_alignment():
    grid = TorusGrid(M=1.0, N=64, d=1)
    f = random_field(grid, np.random.default_rng(8))
    with pytest.raises(ConfigInvalid):
        sp.parseval_check(f, [0.013])


def test_lambda_time_integral_values():
    grid = TorusGrid(M=1.0, N=64, d=1)
    const = [TorusField.from_values(grid, np.full(64, 0.3)) for _ in range(3)]
    assert sp.lambda_time_integral(const, 1.5, 8) == pytest.approx(0.3, abs=1e-10)
    ramp = [TorusField.from_values(grid, np.full(64, c))
            for c in np.linspace(0, 1, 9)]
    assert sp.lambda_time_integral(ramp, 1.5, 8) == pytest.approx(0.5, abs=1e-10)


def test_lambda_time_integral_richardson():
    # halving the slice count changes a smooth family at second order
    grid = TorusGrid(M=1.0, N=64, d=1)
    x = grid.axis_points()

    def family(n):
        return [TorusField.from_values(
            grid, (0.4 + 0.3 * np.sin(np.pi * s)) * np.cos(2 * np.pi * x))
            for s in np.linspace(0, 1, n)]

    fine = sp.lambda_time_integral(family(33), 1.5, 12)
    e17 = abs(sp.lambda_time_integral(family(17), 1.5, 12) - fine)
    e9 = abs(sp.lambda_time_integral(family(9), 1.5, 12) - fine)
    e5 = abs(sp.lambda_time_integral(family(5), 1.5, 12) - fine)
    assert e9 < e5 and e17 < e9
    assert e5 / max(e9, 1e-300) > 2.5  # second-order shrink
