import math

import numpy as np
import pytest

from cvq.numerics import (
    OptimizerConfig,
    bisect_root,
    gaussian_average,
    golden_min,
    hermitian_sqrt,
    minimize_bounded,
    simpson_integral,
)


class TestMinimizeBounded:
    def test_quadratic(self):
        x, f = minimize_bounded(lambda v: (v[0] - 0.3) ** 2, [(0.0, 1.0)])
        assert abs(x[0] - 0.3) < 1e-6
        assert f < 1e-12

    def test_rosenbrock(self):
        def rosen(v):
            return (1 - v[0]) ** 2 + 100.0 * (v[1] - v[0] ** 2) ** 2

        x, f = minimize_bounded(rosen, [(-2.0, 2.0), (-2.0, 2.0)])
        assert f < 1e-8
        assert np.allclose(x, [1.0, 1.0], atol=1e-3)

    def test_constant_returns_center(self):
        x, _ = minimize_bounded(lambda v: 7.0, [(0.0, 2.0), (-1.0, 3.0)])
        assert np.allclose(x, [1.0, 1.0])

    def test_nan_aborts_with_location(self):
        with pytest.raises(FloatingPointError, match="NaN"):
            minimize_bounded(lambda v: float("nan"), [(0.0, 1.0)])

    def test_deterministic(self):
        def f(v):
            return math.sin(5 * v[0]) + (v[0] - 0.4) ** 2

        a = minimize_bounded(f, [(0.0, 1.0)])
        b = minimize_bounded(f, [(0.0, 1.0)])
        assert a[0].tolist() == b[0].tolist() and a[1] == b[1]


class TestRoots:
    def test_linear(self):
        assert abs(bisect_root(lambda x: x - 0.5, 0.0, 1.0) - 0.5) < 1e-10

    def test_no_bracket(self):
        with pytest.raises(ValueError, match="no sign change"):
            bisect_root(lambda x: x + 2.0, 0.0, 1.0)

    def test_improved_kennedy_vs_fixed_point(self):
        # stationarity (b - a)/(b + a) = exp(-4 a b): fixed-point oracle
        a = 0.35

        def gap(b):
            return (b - a) / (b + a) - math.exp(-4.0 * a * b)

        root = bisect_root(gap, a, a + 5.0, tol=1e-12)
        b = a + 1.0
        for _ in range(400):
            b = a * (1.0 + math.exp(-4.0 * a * b)) / (1.0 - math.exp(-4.0 * a * b))
        assert abs(root - b) < 1e-8


class TestQuadrature:
    def test_normal_density_integrates_to_one(self):
        val, _ = simpson_integral(
            lambda x: np.exp(-(x**2) / 2) / math.sqrt(2 * math.pi), -10, 10
        )
        assert abs(val - 1.0) < 1e-12

    def test_gauss_hermite_cosine_oracle(self):
        # E[cos(phi)] = exp(-sigma^2/2) for phi ~ N(0, sigma^2)
        for sigma in (0.1, 0.4, 1.2):
            val = gaussian_average(np.cos, sigma)
            assert abs(val - math.exp(-(sigma**2) / 2)) < 1e-10

    def test_simpson_refinement_order(self):
        f = lambda x: np.sin(x) ** 2 * np.exp(-x)
        exact = 0.4, None
        coarse, _ = simpson_integral(f, 0.0, 3.0, n_points=21, refine=False)
        fine, _ = simpson_integral(f, 0.0, 3.0, n_points=41, refine=False)
        best, _ = simpson_integral(f, 0.0, 3.0, n_points=2001, refine=True)
        # halving the step shrinks the error by about 2^4
        assert abs(fine - best) < abs(coarse - best) / 12.0


class TestHermitianSqrt:
    def test_square_recovers_input(self):
        rng = np.random.default_rng(11)
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        rho = a @ a.conj().T
        rho /= np.trace(rho).real
        sq, clipped = hermitian_sqrt(rho)
        assert clipped == 0.0
        assert np.linalg.norm(sq @ sq - rho) < 1e-8

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError, match="not PSD"):
            hermitian_sqrt(np.diag([1.0, -0.5]))
