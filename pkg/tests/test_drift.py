import numpy as np
import pytest

from rshe.drift import (
    AssumptionReport,
    DoubleWellDrift,
    InteractionDrift,
    InteractionKernel,
    LinearDrift,
    WassersteinQuadraticDrift,
    ZeroDrift,
    check_assumptions,
    eval_drift,
    eval_potential,
    lipschitz_bound,
    load_kernel_csv,
)
from rshe.errors import (
    InvalidParameterError,
    KernelRangeError,
    UnsupportedVariantError,
)
from rshe.grid import GridField, GridSpec, constant_field, inner, norm_l2_sq
from rshe.measures import normal_quantile_field
from rshe.noise import replica_rng
from rshe.rearrange import random_admissible
from rshe.spectral import random_symmetric


GRID = GridSpec(64)


def quadratic_kernel(r_max=12.0, step=1e-2) -> InteractionKernel:
    r = np.arange(0.0, r_max + step, step)
    return InteractionKernel(r, r)  # grad w(r) = r, odd-extended


def line_integral_oracle(spec, u, v, nodes=64):
    # Gauss-Legendre quadrature of int_0^1 <DV(u + t(v-u)), v-u> dt with
    # DV = -eval_drift; independent of eval_potential
    x, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (x + 1.0)
    w = 0.5 * w
    total = 0.0
    direction = GridField(u.grid, v.values - u.values)
    for ti, wi in zip(t, w):
        mid = GridField(u.grid, u.values + ti * direction.values)
        dv = GridField(u.grid, -eval_drift(spec, mid).values)
        total += wi * inner(dv, direction)
    return total


def test_zero_drift():
    rng = replica_rng(0, 0)
    u = random_admissible(GRID, rng)
    assert np.all(eval_drift(ZeroDrift(), u).values == 0.0)


def test_linear_drift_exact():
    rng = replica_rng(0, 1)
    u = random_admissible(GRID, rng)
    out = eval_drift(LinearDrift(2.5), u)
    assert np.array_equal(out.values, -2.5 * u.values)


def test_wasserstein_quadratic_fixed_point():
    center = normal_quantile_field(GRID, 0.1, 0.8)
    spec = WassersteinQuadraticDrift(center=center, weight=1.5)
    assert np.all(eval_drift(spec, center).values == 0.0)
    assert eval_potential(spec, center) == 0.0


def test_wasserstein_center_must_be_admissible():
    v = np.zeros(GRID.n_points)
    v[5] = 1.0
    with pytest.raises(InvalidParameterError):
        WassersteinQuadraticDrift(center=GridField(GRID, v))


def test_interaction_quadratic_kernel_closed_form():
    # grad w(r) = r makes the pair term collapse to -2 (u - mean u)
    spec = InteractionDrift(kernel=quadratic_kernel(), penalty=0.0)
    rng = replica_rng(0, 2)
    u = random_admissible(GRID, rng)
    out = eval_drift(spec, u)
    expected = -2.0 * (u.values - np.mean(u.values))
    assert np.max(np.abs(out.values - expected)) < 1e-10


def test_interaction_mean_confinement():
    # translation-invariant kernel plus penalty: mean(F(u)) ubar <= -c ubar^2
    spec = InteractionDrift(kernel=quadratic_kernel(), penalty=0.4)
    rng = replica_rng(0, 3)
    for _ in range(50):
        u = random_admissible(GRID, rng, radius=2.0)
        shifted = GridField(GRID, u.values + float(rng.uniform(-3, 3)))
        ubar = float(np.mean(shifted.values))
        fbar = float(np.mean(eval_drift(spec, shifted).values))
        assert fbar * ubar <= -0.4 * ubar**2 + 1e-10


def test_interaction_strict_range_error():
    kernel = InteractionKernel(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    spec = InteractionDrift(kernel=kernel, penalty=0.0, strict_range=True)
    u = constant_field(GRID, 0.0)
    wide = GridField(GRID, u.values + 5.0 * random_admissible(GRID, replica_rng(0, 4)).values)
    with pytest.raises(KernelRangeError):
        eval_drift(spec, wide)
    # non-strict clamps with a warning instead
    lax = InteractionDrift(kernel=kernel, penalty=0.0, strict_range=False)
    eval_drift(lax, wide)


def test_kernel_csv_round_trip(tmp_path):
    r = np.linspace(0.0, 3.0, 31)
    table = np.column_stack([r, np.sin(r)])
    path = tmp_path / "kernel.csv"
    np.savetxt(path, table, delimiter=",")
    kernel = load_kernel_csv(path)
    probe = np.array([-2.0, -0.5, 0.5, 2.0])
    assert np.allclose(kernel.dw_at(probe), np.sin(probe), atol=2e-3)


def test_double_well_potential_shape():
    a = normal_quantile_field(GRID, -1.0, 0.5)
    b = normal_quantile_field(GRID, 1.0, 0.5)
    spec = DoubleWellDrift(a=a, b=b, scale=0.7)
    assert eval_potential(spec, a) == 0.0
    assert eval_potential(spec, b) == 0.0
    mid = GridField(GRID, 0.5 * (a.values + b.values))
    assert eval_potential(spec, mid) > 0.0
    assert np.all(eval_drift(spec, a).values == 0.0)


def test_potential_unsupported_for_zero():
    with pytest.raises(UnsupportedVariantError):
        eval_potential(ZeroDrift(), constant_field(GRID, 1.0))


@pytest.mark.parametrize(
    "make_spec",
    [
        lambda: LinearDrift(1.3),
        lambda: WassersteinQuadraticDrift(center=normal_quantile_field(GRID, 0.0, 0.6), weight=0.8),
        lambda: DoubleWellDrift(
            a=normal_quantile_field(GRID, -0.7, 0.4),
            b=normal_quantile_field(GRID, 0.7, 0.4),
            scale=0.5,
        ),
        lambda: InteractionDrift(kernel=quadratic_kernel(), penalty=0.3),
    ],
)
def test_line_integral_identity(make_spec):
    # V(v) - V(u) = int_0^1 <DV(u + t(v-u)), v-u> dt on random pairs
    spec = make_spec()
    rng = replica_rng(1, 0)
    for _ in range(25):
        u = random_admissible(GRID, rng, radius=1.5)
        v = random_admissible(GRID, rng, radius=1.5)
        lhs = eval_potential(spec, v) - eval_potential(spec, u)
        rhs = line_integral_oracle(spec, u, v)
        scale = max(abs(lhs), abs(rhs), 1e-6)
        assert abs(lhs - rhs) / scale < 1e-4


def central_difference_errors(spec, u, directions, h):
    errs = []
    for delta in directions:
        vp = GridField(u.grid, u.values + h * delta)
        vm = GridField(u.grid, u.values - h * delta)
        fd = (eval_potential(spec, vp) - eval_potential(spec, vm)) / (2.0 * h)
        exact = inner(
            GridField(u.grid, -eval_drift(spec, u).values), GridField(u.grid, delta)
        )
        errs.append(fd - exact)
    return np.asarray(errs)


def test_derivative_consistency_quadratic_potentials_exact():
    # quadratic potentials have no cubic term: the central difference is
    # exact to round-off for every h
    rng = replica_rng(2, 0)
    u = random_admissible(GRID, rng)
    dirs = [random_symmetric(GRID, rng).values for _ in range(20)]
    for spec in (
        LinearDrift(1.1),
        WassersteinQuadraticDrift(center=normal_quantile_field(GRID, 0.0, 0.5)),
    ):
        for h in (1e-3, 1e-4):
            errs = central_difference_errors(spec, u, dirs, h)
            assert np.max(np.abs(errs)) < 1e-9


def test_derivative_consistency_richardson_ratio():
    # quartic potential: error is C h^2, so halving h divides it by ~4
    rng = replica_rng(2, 1)
    a = normal_quantile_field(GRID, -0.8, 0.5)
    b = normal_quantile_field(GRID, 0.8, 0.5)
    spec = DoubleWellDrift(a=a, b=b, scale=0.9)
    u = random_admissible(GRID, rng, radius=1.2)
    dirs = [random_symmetric(GRID, rng).values for _ in range(100)]
    for h in (1e-3, 1e-4):
        e_h = central_difference_errors(spec, u, dirs, h)
        e_half = central_difference_errors(spec, u, dirs, 0.5 * h)
        ratio = np.sqrt(np.sum(e_h**2) / np.sum(e_half**2))
        assert 3.5 <= ratio <= 4.5


def test_check_assumptions_linear():
    report = check_assumptions(LinearDrift(1.5), GRID, 150, 2.0, replica_rng(3, 0))
    assert isinstance(report, AssumptionReport)
    assert report.dissipativity_ok
    assert report.lyapunov_c2 == pytest.approx(1.5, rel=1e-6)
    assert report.lyapunov_c1 == pytest.approx(0.0, abs=1e-8)
    assert report.dissipativity_margin > 0.0
    assert report.growth_cF <= 1.5**2 + 1e-9
    assert np.isfinite(report.gradient_CF)
    assert np.isfinite(report.oscillation_CO)


def test_check_assumptions_flags_zero_drift():
    report = check_assumptions(ZeroDrift(), GRID, 120, 2.0, replica_rng(3, 1))
    assert not report.dissipativity_ok
    assert report.lyapunov_c2 <= 0.0


def test_check_assumptions_wasserstein_growth():
    center = normal_quantile_field(GRID, 0.0, 1.0)
    spec = WassersteinQuadraticDrift(center=center, weight=1.0)
    report = check_assumptions(spec, GRID, 200, 2.0, replica_rng(3, 2))
    assert report.dissipativity_ok
    bound = 8.0 * (1.0 + norm_l2_sq(center))
    assert report.growth_cF <= bound


def test_symmetry_preservation_all_variants():
    # with exactly symmetric anchors every variant maps symmetric fields to
    # symmetric fields exactly
    from rshe.grid import sample_cosine, symmetry_defect

    rng = replica_rng(4, 0)
    e1 = sample_cosine(GRID, 1)
    center = GridField(GRID, 0.6 * e1.values + 0.1)
    low = GridField(GRID, 0.4 * e1.values - 0.5)
    high = GridField(GRID, 0.4 * e1.values + 0.5)
    variants = [
        ZeroDrift(),
        LinearDrift(1.0),
        WassersteinQuadraticDrift(center=center),
        DoubleWellDrift(a=low, b=high, scale=1.0),
        InteractionDrift(kernel=quadratic_kernel(), penalty=0.2),
    ]
    for _ in range(200):
        u = random_symmetric(GRID, rng, mode_decay=1.0)
        for spec in variants:
            out = eval_drift(spec, u)
            assert symmetry_defect(out) < 1e-12


def test_symmetry_defect_bounded_by_anchor_defect():
    # quantile-field anchors carry the one-cell rearrangement asymmetry; the
    # drift inherits it but creates none of its own
    from rshe.grid import symmetry_defect

    rng = replica_rng(4, 1)
    center = normal_quantile_field(GRID, 0.0, 0.5)
    spec = WassersteinQuadraticDrift(center=center, weight=1.3)
    for _ in range(50):
        u = random_symmetric(GRID, rng, mode_decay=1.0)
        out = eval_drift(spec, u)
        assert symmetry_defect(out) <= 2 * 1.3 * symmetry_defect(center) + 1e-12


def test_lipschitz_bounds_positive_and_ordered():
    assert lipschitz_bound(ZeroDrift(), 1.0) == 0.0
    assert lipschitz_bound(LinearDrift(2.0), 5.0) == 2.0
    center = normal_quantile_field(GRID, 0.0, 0.5)
    assert lipschitz_bound(WassersteinQuadraticDrift(center=center, weight=3.0), 1.0) == 6.0
    dw = DoubleWellDrift(a=center, b=constant_field(GRID, 0.0), scale=1.0)
    assert lipschitz_bound(dw, 2.0) > lipschitz_bound(dw, 1.0)
