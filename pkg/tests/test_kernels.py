"""Kernel evaluation, decomposition constants and spectral masses."""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma as gamma_fn

from fpam import kernels
from fpam.errors import ConfigInvalid, NotNormalized
from fpam.kernels import NoiseSpec


def riesz_spec(alpha=1.5, beta0=0.2, d=1, beta=0.4):
    return NoiseSpec(alpha=alpha, beta0=beta0, d=d, kernel="riesz", beta=beta)


def test_gamma_eval_riesz_point():
    spec = NoiseSpec(1.0, 0.0, 2, "riesz", beta=1.0)
    assert kernels.gamma_eval(spec, [3.0, 4.0]) == pytest.approx(0.2)


def test_gamma_eval_product_point():
    spec = NoiseSpec(1.0, 0.0, 2, "product", betas=(0.5, 0.5))
    assert kernels.gamma_eval(spec, [4.0, 9.0]) == pytest.approx(1.0 / 6.0)


def test_gamma_singularity_is_inf_not_error():
    spec = riesz_spec()
    assert kernels.gamma_eval(spec, [0.0]) == math.inf
    prod = NoiseSpec(1.0, 0.0, 2, "product", betas=(0.5, 0.3))
    assert kernels.gamma_eval(prod, [0.0, 1.0]) == math.inf


def test_gamma_scaling_property():
    rng = np.random.default_rng(0)
    for spec in (riesz_spec(d=2, beta=0.7),
                 NoiseSpec(1.0, 0.0, 2, "product", betas=(0.4, 0.3))):
        for _ in range(5):
            x = rng.uniform(0.2, 2.0, spec.d)
            c = rng.uniform(0.1, 5.0)
            lhs = kernels.gamma_eval(spec, c * x) * c ** spec.beta_total
            assert lhs == pytest.approx(kernels.gamma_eval(spec, x), rel=1e-12)


def test_temporal_eval_values():
    spec = riesz_spec(beta0=0.5)
    assert kernels.temporal_eval(spec, 4.0) == pytest.approx(0.5)
    assert kernels.temporal_eval(spec, 0.0) == math.inf
    flat = riesz_spec(beta0=0.0)
    assert kernels.temporal_eval(flat, 0.0) == 1.0
    s3 = riesz_spec(beta0=0.3)
    assert kernels.temporal_eval(s3, -8.0) == pytest.approx(8.0 ** -0.3)


def test_K_eval_values():
    assert kernels.K_eval(riesz_spec(beta=0.5), 2.0) == pytest.approx(2.0 ** -0.75)
    prod = NoiseSpec(1.0, 0.0, 1, "product", betas=(0.5,))
    assert kernels.K_eval(prod, [4.0]) == pytest.approx(4.0 ** -0.75)


def test_dalang_check_examples():
    assert kernels.dalang_check(NoiseSpec(1.0, 0.3, 1, "riesz", beta=0.5)) \
        == kernels.REGIME_FULL
    assert kernels.dalang_check(NoiseSpec(1.0, 0.6, 1, "riesz", beta=0.5)) \
        == kernels.REGIME_SKOROHOD
    assert kernels.dalang_check(NoiseSpec(1.0, 0.0, 2, "riesz", beta=1.2)) \
        == kernels.REGIME_NONE


def test_dalang_check_monotone():
    # strengthening the singularity can only weaken the regime
    order = {kernels.REGIME_FULL: 2, kernels.REGIME_SKOROHOD: 1, kernels.REGIME_NONE: 0}
    rng = np.random.default_rng(1)
    for _ in range(50):
        alpha = rng.uniform(0.3, 2.0)
        b0 = rng.uniform(0.0, 0.99)
        beta = rng.uniform(0.0, 0.99)
        base = order[kernels.dalang_check(NoiseSpec(alpha, b0, 1, "riesz", beta=beta))]
        up_b = order[kernels.dalang_check(
            NoiseSpec(alpha, b0, 1, "riesz", beta=min(beta + 0.2, 0.995)))]
        up_b0 = order[kernels.dalang_check(
            NoiseSpec(alpha, min(b0 + 0.2, 0.995), 1, "riesz", beta=beta))]
        assert up_b <= base and up_b0 <= base


def _riesz_comp(a, d):
    return math.pi ** (d / 2) * 2.0 ** a * gamma_fn(a / 2) / gamma_fn((d - a) / 2)


@pytest.mark.parametrize("beta0", [0.2, 0.5, 0.8])
def test_temporal_constant_against_beta_oracle(beta0):
    # independent oracle: the defining integral in Beta-function form
    a = (1.0 - beta0) / 2.0
    from scipy.special import beta as beta_fn
    oracle = 1.0 / (beta_fn(a, a) + 2.0 * beta_fn(a, 1.0 - 2.0 * a))
    assert kernels.temporal_c0(beta0) == pytest.approx(oracle, rel=1e-8)


@pytest.mark.parametrize("d,beta", [(1, 0.3), (1, 0.7), (2, 0.5), (2, 1.3), (3, 1.0)])
def test_spatial_constant_against_composition_oracle(d, beta):
    a = (d - beta) / 2.0
    oracle = _riesz_comp(a, d) ** 2 / _riesz_comp(2 * a, d)
    val = kernels.half_kernel_self_convolution(d, beta, 1e-9)
    assert val == pytest.approx(oracle, rel=1e-7)


def test_compute_constants_flags_and_product():
    consts = kernels.compute_constants(riesz_spec(beta0=0.0, beta=0.0), 1e-8)
    assert consts.flat_time and consts.flat_space
    assert consts.C0 is None and consts.C_gamma is None

    prod = NoiseSpec(1.0, 0.5, 2, "product", betas=(0.3, 0.4))
    cp = kernels.compute_constants(prod, 1e-8)
    c3 = 1.0 / kernels.half_kernel_self_convolution(1, 0.3, 1e-9)
    c4 = 1.0 / kernels.half_kernel_self_convolution(1, 0.4, 1e-9)
    assert cp.C_gamma == pytest.approx(c3 * c4, rel=1e-7)
    assert len(cp.mu_density_const) == 2


def test_decomposition_residuals_at_probes():
    for spec in (riesz_spec(beta0=0.5, d=1, beta=0.5),
                 riesz_spec(beta0=0.2, d=2, beta=0.8)):
        consts = kernels.compute_constants(spec, 1e-8)
        for s, r in ((1.0, 0.0), (2.5, 1.2), (-0.3, 0.4)):
            assert kernels.time_decomposition_residual(spec, consts.C0, s, r) < 1e-7
        rng = np.random.default_rng(2)
        for _ in range(3):
            x = rng.uniform(0.5, 2.0, spec.d)
            assert kernels.space_decomposition_residual(spec, consts.C_gamma, x) < 1e-7


def test_mu_density_const_against_mollified_ft():
    # numerically transform a damped |x|^(-a) and compare to the cached constant
    for a in (0.3, 0.5, 0.7):
        const = kernels.power_law_ft_const(a, 1)
        for xi in (0.5, 2.0):
            f = lambda x: x ** (-a) * np.exp(-1e-8 * x * x)
            v1, _ = integrate.quad(lambda x: f(x) * np.cos(2 * np.pi * xi * x),
                                   0, 1, points=[0], limit=400)
            v2, _ = integrate.quad(f, 1, np.inf, weight="cos",
                                   wvar=2 * np.pi * xi, limit=400)
            assert 2 * (v1 + v2) == pytest.approx(const * xi ** (a - 1), rel=1e-5)


def test_bump_shape():
    assert kernels.bump(0.3) == 1.0
    assert kernels.bump(1.0) == 1.0
    assert kernels.bump(2.0) == 0.0
    assert kernels.bump(2.5) == 0.0
    mid = kernels.bump(np.linspace(1.01, 1.99, 50))
    assert np.all(np.diff(mid) < 0) and np.all((mid > 0) & (mid < 1))


def test_truncated_time_kernel_supports():
    spec = riesz_spec(beta0=0.5)
    A, a = 4.0, 0.1
    assert kernels.truncated_time_kernel(spec, A, a, 9.0) == 0.0
    assert kernels.truncated_time_kernel(spec, A, a, 0.05) == 0.0
    # both cutoffs idle on [2a, A]
    for u in (0.25, 1.0, 3.9):
        assert kernels.truncated_time_kernel(spec, A, a, u) \
            == pytest.approx(abs(u) ** (-0.75))


def test_truncated_space_kernel_bounds():
    spec = riesz_spec(d=2, beta=0.6)
    B, b = 3.0, 0.05
    rng = np.random.default_rng(3)
    pts = rng.uniform(-8, 8, (200, 2))
    kv = kernels.truncated_space_kernel(spec, B, b, pts)
    full = kernels.K_eval(spec, pts)
    assert np.all(kv >= 0.0)
    assert np.all(kv <= full + 1e-15)
    r = np.linalg.norm(pts, axis=1)
    assert np.all(kv[r >= 2 * B] == 0.0)
    mid = (r >= 2 * b) & (r <= B)
    assert np.allclose(kv[mid], full[mid])


def test_truncation_bound_envelope():
    # |u|^(-(1+b0)/2) - k_{A,a}(u) <= A-term + a-term for bracketing exponents
    spec = riesz_spec(beta0=0.5)
    b0p, b0t = 0.3, 0.7
    A, a = 5.0, 0.02
    u = np.concatenate([np.linspace(0.005, 0.2, 40), np.linspace(0.2, 20, 80)])
    tail = np.abs(u) ** (-0.75) - kernels.truncated_time_kernel(spec, A, a, u)
    bound = A ** (-(0.5 - b0p) / 2) * np.abs(u) ** (-(b0p + 1) / 2) \
        + (2 * a) ** ((b0t - 0.5) / 2) * np.abs(u) ** (-(b0t + 1) / 2)
    assert np.all(tail <= bound + 1e-12)


def test_mu0_cell_masses_partition_the_density():
    spec = riesz_spec(beta0=0.4)
    h = 0.3
    total = sum(kernels.mu0_cell_mass(spec, k, h) for k in range(-10, 11))
    ref, _ = integrate.quad(lambda t: 2 * kernels.power_law_ft_const(0.4, 1)
                            * t ** (0.4 - 1.0), 0, 10.5 * h, points=[0])
    assert total == pytest.approx(ref, rel=1e-10)


def test_mu_cell_mass_product_factorizes():
    spec = NoiseSpec(1.0, 0.0, 2, "product", betas=(0.3, 0.5))
    m = kernels.mu_cell_mass(spec, [2, 0], 0.25)
    s1 = NoiseSpec(1.0, 0.0, 1, "riesz", beta=0.3)
    s2 = NoiseSpec(1.0, 0.0, 1, "riesz", beta=0.5)
    ref = kernels.mu_cell_mass(s1, [2], 0.25) * kernels.mu_cell_mass(s2, [0], 0.25)
    assert m == pytest.approx(ref, rel=1e-12)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_riesz_zero_cell_mass_d2():
    spec = NoiseSpec(1.5, 0.0, 2, "riesz", beta=0.8)
    h = 0.5
    got = kernels.mu_cell_mass(spec, [0, 0], h)
    dens = lambda y, x: kernels.mu_density(spec, [x, y]) if x * x + y * y > 0 else 0.0
    ref, _ = integrate.dblquad(dens, -h / 2, h / 2,
                               lambda x: -h / 2, lambda x: h / 2)
    assert got == pytest.approx(ref, rel=1e-6)


def test_noise_spec_json_round_trip():
    spec = NoiseSpec(1.5, 0.2, 2, "product", betas=(0.3, 0.4))
    assert NoiseSpec.from_json(spec.to_json()) == spec
    r = riesz_spec()
    doc = r.to_json_dict()
    assert doc["kernel"] == {"type": "riesz", "beta": 0.4}
    assert NoiseSpec.from_json_dict(doc) == r


def test_noise_spec_validation():
    with pytest.raises(ConfigInvalid):
        NoiseSpec(2.5, 0.0, 1, "riesz", beta=0.2)
    with pytest.raises(ConfigInvalid):
        NoiseSpec(1.0, 1.0, 1, "riesz", beta=0.2)
    with pytest.raises(ConfigInvalid):
        NoiseSpec(1.0, 0.0, 1, "riesz", beta=1.0)
    with pytest.raises(ConfigInvalid):
        NoiseSpec(1.0, 0.0, 2, "product", betas=(0.5,))
    with pytest.raises(ConfigInvalid):
        NoiseSpec(1.0, 0.0, 1, "product", betas=(1.0,))
