import numpy as np
import pytest

import nclab
from nclab.errors import OperatorError
from nclab.operators import neumann_laplacian


@pytest.fixture(scope="module")
def grid():
    return nclab.make_grid(0.0, 1.0, 80)


@pytest.fixture(scope="module")
def gauss(grid):
    return nclab.build_kernel_matrix(nclab.KernelSpec.gaussian(0.1), grid)


@pytest.fixture(scope="module")
def op_n(grid, gauss):
    return nclab.assemble_operator("N", 1.3, gauss, grid)


def random_field(grid, seed, lo=-1.0, hi=1.0):
    rng = np.random.default_rng(seed)
    return nclab.ScalarField(grid, rng.uniform(lo, hi, grid.n_nodes))


def test_noflux_annihilates_constants(op_n, grid):
    const = nclab.ScalarField.constant(grid, 3.7)
    image = nclab.apply(op_n, const)
    assert np.max(np.abs(image.values)) < 1e-13


def test_noflux_conserves_mass(op_n, grid):
    for seed in range(10):
        phi = random_field(grid, seed)
        image = nclab.apply(op_n, phi)
        bound = 1e-12 * np.max(np.abs(phi.values)) * op_n.rate
        assert abs(nclab.integrate(image)) <= bound


def test_lethal_boundary_loses_mass(grid, gauss):
    # absorption is 1 but the kernel mass inside the domain is below 1,
    # so constants are pushed down, hardest near the boundary
    op = nclab.assemble_operator("D", 1.0, gauss, grid)
    image = nclab.apply(op, nclab.ScalarField.constant(grid, 1.0))
    assert np.all(image.values <= 1e-14)
    assert image.values[0] < -0.1
    assert abs(image.values[grid.n_nodes // 2]) < 1e-6

    wide = nclab.build_kernel_matrix(nclab.KernelSpec.tophat(2.0), grid)
    op_wide = nclab.assemble_operator("D", 1.0, wide, grid)
    image = nclab.apply(op_wide, nclab.ScalarField.constant(grid, 1.0))
    assert np.all(image.values == pytest.approx(-0.75, abs=1e-12))


def test_mixed_alpha_one_matches_noflux(grid, gauss, op_n):
    mixed = nclab.assemble_operator("mixed", 1.3, gauss, grid, alpha=1.0)
    phi = random_field(grid, 11)
    gap = nclab.apply(mixed, phi).values - nclab.apply(op_n, phi).values
    assert np.max(np.abs(gap)) < 1e-14


def test_mixed_alpha_zero_is_neumann_laplacian(grid, gauss):
    d = 0.8
    mixed = nclab.assemble_operator("mixed", d, gauss, grid, alpha=0.0)
    quad = nclab.ScalarField.from_callable(grid, lambda x: x * x)
    image = nclab.apply(mixed, quad)
    interior = image.values[1:-1]
    assert np.max(np.abs(interior - 2.0 * d)) < 1e-9


def test_laplacian_rows_sum_to_zero(grid):
    T = neumann_laplacian(grid)
    assert np.max(np.abs(T @ np.ones(grid.n_nodes))) < 1e-10


def test_zero_rate_gives_zero_operator(grid, gauss):
    op = nclab.assemble_operator("N", 0.0, gauss, grid)
    phi = random_field(grid, 2)
    assert np.all(nclab.apply(op, phi).values == 0.0)


def test_apply_is_linear(op_n, grid):
    f = random_field(grid, 7)
    g = random_field(grid, 8)
    combo = nclab.ScalarField(grid, 2.0 * f.values - 3.0 * g.values)
    lhs = nclab.apply(op_n, combo).values
    rhs = 2.0 * nclab.apply(op_n, f).values - 3.0 * nclab.apply(op_n, g).values
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_weighted_self_adjointness(op_n, grid):
    w = grid.weights
    for seed in (0, 1, 2):
        u = random_field(grid, seed).values
        v = random_field(grid, seed + 100).values
        left = float(np.dot(w, (op_n.matrix @ u) * v))
        right = float(np.dot(w, u * (op_n.matrix @ v)))
        scale = max(abs(left), abs(right), 1e-30)
        assert abs(left - right) <= 1e-12 * max(1.0, scale)


def test_positivity_off_diagonal(grid, gauss):
    rng = np.random.default_rng(42)
    for kind, alpha in (("N", None), ("D", None), ("mixed", 0.4)):
        op = nclab.assemble_operator(kind, 1.0, gauss, grid, alpha=alpha)
        values = rng.random(grid.n_nodes)
        zeros = rng.choice(grid.n_nodes, size=8, replace=False)
        values[zeros] = 0.0
        image = op.matrix @ values
        assert np.all(image[zeros] >= -1e-14)


def test_quadratic_form_constants_and_sign(op_n, grid):
    const = nclab.ScalarField.constant(grid, 2.0)
    assert abs(nclab.quadratic_form(op_n, const)) < 1e-12
    for seed in range(5):
        phi = random_field(grid, seed)
        assert nclab.quadratic_form(op_n, phi) <= 1e-12


def test_quadratic_form_pairwise_agreement(grid, gauss):
    ops = [nclab.assemble_operator("N", 1.3, gauss, grid),
           nclab.assemble_operator("mixed", 0.9, gauss, grid, alpha=0.6)]
    for op in ops:
        for seed in (3, 4):
            phi = random_field(grid, seed)
            direct = nclab.quadratic_form(op, phi)
            pairwise = nclab.quadratic_form_pairwise(op, phi)
            assert direct == pytest.approx(pairwise, rel=1e-10, abs=1e-12)
            assert pairwise <= 1e-12


def test_quadratic_form_rejections(grid, gauss):
    op_d = nclab.assemble_operator("D", 1.0, gauss, grid)
    phi = random_field(grid, 1)
    with pytest.raises(OperatorError):
        nclab.quadratic_form(op_d, phi)
    rng = np.random.default_rng(9)
    asym = nclab.build_kernel_matrix(
        nclab.KernelSpec.from_table(0.1 + rng.random((grid.n_nodes,) * 2)), grid)
    op_a = nclab.assemble_operator("N", 1.0, asym, grid)
    with pytest.raises(OperatorError):
        nclab.quadratic_form(op_a, phi)


def test_assembly_rejections(grid, gauss):
    with pytest.raises(OperatorError):
        nclab.assemble_operator("mixed", 1.0, gauss, grid, alpha=1.5)
    with pytest.raises(OperatorError):
        nclab.assemble_operator("mixed", 1.0, gauss, grid)
    with pytest.raises(OperatorError):
        nclab.assemble_operator("N", 1.0, gauss, grid, alpha=0.5)
    with pytest.raises(OperatorError):
        nclab.assemble_operator("N", -1.0, gauss, grid)
    other = nclab.make_grid(0.0, 1.0, 16)
    with pytest.raises(OperatorError):
        nclab.assemble_operator("N", 1.0, gauss, other)
    op = nclab.assemble_operator("N", 1.0, gauss, grid)
    with pytest.raises(OperatorError):
        nclab.apply(op, nclab.ScalarField.constant(other, 1.0))
