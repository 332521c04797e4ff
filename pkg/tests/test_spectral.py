import numpy as np
import pytest

from caxial.averaging import hierarchical_scalar_bijection_matrix
from caxial.lattice import open_cube, unit_torus
from caxial.spectral import (block_curl_ratio, curl_path_kernel,
                             global_coercivity, toron_closure_kernel)


@pytest.mark.parametrize("dim,L", [(2, 3), (2, 5), (3, 3)])
@pytest.mark.parametrize("all_orders", [False, True])
def test_curl_plus_path_average_is_rigid_on_block(dim, L, all_orders):
    out = curl_path_kernel(open_cube(dim, L), all_orders=all_orders)
    assert out["trivial"]


def test_curl_plus_path_average_alone_not_rigid_on_torus():
    # on a torus the constant shifts survive; windings are needed
    out = curl_path_kernel(unit_torus(2, 3, 1))
    assert not out["trivial"]


def test_winding_averages_close_the_kernel():
    out = toron_closure_kernel(unit_torus(2, 3, 1))
    assert out["trivial"]


@pytest.mark.parametrize("dim,L", [(2, 3), (2, 5), (3, 3)])
def test_blockwise_curl_controls_norm(dim, L):
    out = block_curl_ratio(open_cube(dim, L))
    assert 0 < out["ratio"] <= out["bound"]


@pytest.mark.parametrize("dim", [2, 3])
def test_global_coercivity_floor(dim):
    out = global_coercivity(unit_torus(dim, 3, 1))
    assert out["min_eig"] >= out["floor"]


def test_hierarchical_scalar_change_of_variables_invertible():
    fine = unit_torus(2, 3, 2)
    m = hierarchical_scalar_bijection_matrix(fine, 2)
    assert m.shape == (81, 81)
    s = np.linalg.svd(m, compute_uv=False)
    assert s[-1] > 1e-9 * s[0]
    assert np.isfinite(s[0] / s[-1])
