import numpy as np
import pytest

from rshe.errors import InvalidParameterError
from rshe.grid import GridSpec, symmetry_defect
from rshe.noise import (
    MetastableSpectrum,
    PowerLawSpectrum,
    c_lambda,
    eigenvalues,
    replica_rng,
    sample_increment,
)


def test_power_law_eigenvalues_direct_formula():
    spec = PowerLawSpectrum(lambda_exponent=0.75, prefactor=1.0, cutoff_rank=1)
    lam = eigenvalues(spec, 4)
    expected = [1.0, 1.0, 2.0**-0.75, 3.0**-0.75, 4.0**-0.75]
    assert np.allclose(lam, expected, rtol=0, atol=0)


def test_power_law_respects_cutoff_and_cap():
    spec = PowerLawSpectrum(lambda_exponent=0.6, prefactor=0.5, cutoff_rank=3)
    lam = eigenvalues(spec, 6)
    assert np.all(lam[:3] == 0.5)
    assert lam[4] == 0.5 * 4.0**-0.6
    assert np.all(lam <= 1.0)
    assert np.all(lam > 0.0)


def test_metastable_eigenvalues_piecewise_thresholds():
    # eps = 0.5, beta = 2 puts the band edges at ranks 4 and 8
    spec = MetastableSpectrum(
        theta1=1.0, theta2=0.25, psi=2.0, beta=2.0, epsilon=0.5, tail_exponent=0.75
    )
    lam = eigenvalues(spec, 12)
    assert np.all(lam[:5] == 1.0)
    assert np.all(lam[5:9] == 0.5)
    assert np.allclose(lam[9:], np.arange(9, 13) ** -0.75, rtol=0, atol=0)
    assert spec.band1_rank == 4
    assert spec.band2_rank == 8


def test_parameter_rejections():
    with pytest.raises(InvalidParameterError):
        PowerLawSpectrum(lambda_exponent=0.5)
    with pytest.raises(InvalidParameterError):
        PowerLawSpectrum(lambda_exponent=1.0)
    with pytest.raises(InvalidParameterError):
        PowerLawSpectrum(lambda_exponent=0.75, prefactor=1.5)
    with pytest.raises(InvalidParameterError):
        MetastableSpectrum(theta1=1.0, theta2=0.25, psi=0.5, beta=2.0, epsilon=0.5)
    with pytest.raises(InvalidParameterError):
        MetastableSpectrum(theta1=-1.0, theta2=0.25, psi=2.0, beta=2.0, epsilon=0.5)
    with pytest.raises(InvalidParameterError):
        MetastableSpectrum(
            theta1=1.0, theta2=0.25, psi=2.0, beta=2.0, epsilon=0.5, tail_exponent=0.4
        )


def test_c_lambda_single_mode():
    spec = PowerLawSpectrum(lambda_exponent=0.75)
    assert c_lambda(spec, 0) == 1.0


def test_c_lambda_summation_oracle():
    spec = PowerLawSpectrum(lambda_exponent=0.75, prefactor=1.0, cutoff_rank=1)
    m = np.arange(1, 129, dtype=float)
    oracle = 1.0 + float(np.sum(m**-1.5))
    assert c_lambda(spec, 128) == pytest.approx(oracle, rel=1e-14)


def test_c_lambda_monotone_and_tail_bound():
    spec = PowerLawSpectrum(lambda_exponent=0.75)
    values = [c_lambda(spec, m) for m in (8, 16, 64, 256)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    # integral comparison: sum_{m > M} m^(-2 lam) <= int_M^inf x^(-2 lam) dx
    for big_m in (64, 128):
        tail = c_lambda(spec, 10**6) - c_lambda(spec, big_m)
        bound = big_m ** (1.0 - 1.5) / (1.5 - 1.0)
        assert tail <= bound


def test_increment_variance_matches_c_lambda():
    spec = PowerLawSpectrum(lambda_exponent=0.75)
    g = GridSpec(64)
    dt = 1e-3
    rng = replica_rng(123, 0)
    n = 10**5
    norms = np.empty(n)
    for i in range(n):
        inc = sample_increment(spec, g, dt, rng)
        norms[i] = np.mean(inc.field.values**2)
    target = dt * c_lambda(spec, g.n_modes - 1)
    se = norms.std(ddof=1) / np.sqrt(n)
    assert abs(norms.mean() - target) < 3.0 * se


def test_increment_dt_scaling():
    spec = PowerLawSpectrum(lambda_exponent=0.75)
    g = GridSpec(64)
    n = 10**5

    def mean_sq(dt, stream):
        rng = replica_rng(7, stream)
        return np.array(
            [np.mean(sample_increment(spec, g, dt, rng).field.values ** 2) for _ in range(n)]
        )

    a = mean_sq(1e-3, 0)
    b = mean_sq(2e-3, 1)
    se = np.sqrt(4 * a.var(ddof=1) / n + b.var(ddof=1) / n)
    assert abs(2 * a.mean() - b.mean()) < 3.0 * se


def test_increment_symmetric_and_deterministic():
    spec = PowerLawSpectrum(lambda_exponent=0.6)
    g = GridSpec(32)
    one = sample_increment(spec, g, 0.1, replica_rng(9, 4)).field
    two = sample_increment(spec, g, 0.1, replica_rng(9, 4)).field
    assert np.array_equal(one.values, two.values)
    assert symmetry_defect(one) < 1e-12
    with pytest.raises(InvalidParameterError):
        sample_increment(spec, g, 0.0, replica_rng(9, 4))


def test_mode_independence_cross_covariance():
    # mode coefficients recovered by quadrature against the basis
    from rshe.spectral import modes_from_values

    spec = PowerLawSpectrum(lambda_exponent=0.75)
    g = GridSpec(16)
    dt = 1.0
    rng = replica_rng(21, 0)
    n = 10**5
    coeffs = np.empty((n, g.n_modes))
    for i in range(n):
        inc = sample_increment(spec, g, dt, rng)
        coeffs[i] = modes_from_values(inc.field.values)
    lam = eigenvalues(spec, g.n_modes - 1)
    # variances match lambda_m^2 dt
    var = coeffs.var(axis=0, ddof=1)
    assert np.allclose(var, lam**2 * dt, rtol=0.05)
    # distinct modes uncorrelated within 4 standard errors
    c = np.corrcoef(coeffs.T)
    off = c[~np.eye(g.n_modes, dtype=bool)]
    assert np.max(np.abs(off)) < 4.0 / np.sqrt(n)


def test_replica_streams_independent_of_each_other():
    a = replica_rng(5, 0).standard_normal(8)
    b = replica_rng(5, 1).standard_normal(8)
    assert not np.allclose(a, b)
