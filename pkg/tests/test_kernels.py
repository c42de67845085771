import math

import numpy as np
import pytest

import nclab
from nclab.errors import KernelError


def test_tophat_covering_domain_is_constant():
    g = nclab.make_grid(0.0, 1.0, 40)
    K = nclab.build_kernel_matrix(nclab.KernelSpec.tophat(2.0), g)
    assert np.all(K.entries == 0.25)
    assert K.symmetric


def test_gaussian_exact_symmetry():
    g = nclab.make_grid(0.0, 2.0, 75)
    K = nclab.build_kernel_matrix(nclab.KernelSpec.gaussian(0.1), g)
    assert np.array_equal(K.entries, K.entries.T)
    assert K.symmetric
    assert np.all(np.diagonal(K.entries) > 0)


def test_gaussian_whole_line_normalization():
    # sample one kernel row on a domain wide enough to hold the mass
    g = nclab.make_grid(-3.0, 3.0, 1201)
    K = nclab.build_kernel_matrix(nclab.KernelSpec.gaussian(0.15), g)
    center = g.n_nodes // 2
    mass = float(np.dot(K.entries[center], g.weights))
    assert mass == pytest.approx(1.0, abs=1e-12)


def _absorption_error(n, sigma, x_eval):
    """Quadrature error of the column mass against the erf closed form."""
    g = nclab.make_grid(0.0, 1.0, n)
    K = nclab.build_kernel_matrix(nclab.KernelSpec.gaussian(sigma), g)
    a = K.entries.T @ g.weights
    i = int(np.argmin(np.abs(g.nodes - x_eval)))
    x = g.nodes[i]
    exact = 0.5 * (math.erf((1.0 - x) / (math.sqrt(2.0) * sigma))
                   - math.erf((0.0 - x) / (math.sqrt(2.0) * sigma)))
    return abs(float(a[i]) - exact)


def test_absorption_quadrature_second_order():
    # node x=0.36 exists on both grids; halving h quarters the error
    e_coarse = _absorption_error(101, 0.1, 0.36)
    e_fine = _absorption_error(201, 0.1, 0.36)
    assert e_coarse / e_fine == pytest.approx(4.0, rel=0.25)


def test_table_kernel_validation():
    g = nclab.make_grid(0.0, 1.0, 10)
    good = np.full((10, 10), 0.3)
    nclab.build_kernel_matrix(nclab.KernelSpec.from_table(good), g)
    bad_neg = good.copy()
    bad_neg[2, 3] = -0.1
    with pytest.raises(KernelError):
        nclab.build_kernel_matrix(nclab.KernelSpec.from_table(bad_neg), g)
    bad_diag = good.copy()
    bad_diag[4, 4] = 0.0
    with pytest.raises(KernelError):
        nclab.build_kernel_matrix(nclab.KernelSpec.from_table(bad_diag), g)
    with pytest.raises(KernelError):
        nclab.build_kernel_matrix(
            nclab.KernelSpec.from_table(np.full((9, 9), 0.3)), g)


def test_table_kernel_symmetry_flag():
    g = nclab.make_grid(0.0, 1.0, 12)
    rng = np.random.default_rng(0)
    asym = 0.1 + rng.random((12, 12))
    K = nclab.build_kernel_matrix(nclab.KernelSpec.from_table(asym), g)
    assert not K.symmetric
    Ksym = nclab.build_kernel_matrix(
        nclab.KernelSpec.from_table(0.5 * (asym + asym.T)), g)
    assert Ksym.symmetric


def test_spec_validation():
    with pytest.raises(KernelError):
        nclab.KernelSpec("gaussian", -0.1)
    with pytest.raises(KernelError):
        nclab.KernelSpec("lorentz", 1.0)
    with pytest.raises(KernelError):
        nclab.KernelSpec("table")
