import math

import numpy as np
import pytest

from concavity_lab.discretization import rasterize
from concavity_lab.fractional import fractional_eigen, fractional_matrix
from concavity_lab.geometry import IntervalDomain, preset

# With kernel constant 1, (1 - s)(-Delta)^s -> c_N (-Delta) as s -> 1, where
# c_N = (1/2) * int_{|z|<1} z_1^2 |z|^{-N-2s} dz * (1 - s): c_1 = 1/2, c_2 = pi/4.


def test_matrix_symmetric_positive():
    A = fractional_matrix(rasterize(preset("square"), 1 / 16), 0.7)
    assert np.array_equal(A, A.T)
    assert np.linalg.eigvalsh(A)[0] > 0


def test_interval_limit_eigenvalue():
    e = fractional_eigen(IntervalDomain(0.0, 1.0), 1 / 128, 0.99)
    assert (1 - 0.99) * e.lam == pytest.approx(math.pi ** 2 / 2, rel=2e-3)


def test_square_limit_eigenvalue():
    e = fractional_eigen(preset("square"), 1 / 32, 0.99)
    assert (1 - 0.99) * e.lam == pytest.approx(math.pi / 4 * 2 * math.pi ** 2, rel=1e-2)


def test_eigenfunction_positive_normalized_even():
    e = fractional_eigen(IntervalDomain(-1.0, 1.0), 1 / 64, 0.6)
    u = e.u.values
    inner = e.u.mask.interior
    assert np.all(u[inner] > 0)
    assert np.sum(u[inner] ** 2) * e.u.mask.cell_measure == pytest.approx(1.0)
    assert np.max(np.abs(u - u[::-1])) <= 1e-10
