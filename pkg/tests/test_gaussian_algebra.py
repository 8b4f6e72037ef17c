import numpy as np
import pytest
from scipy import integrate

from models.gaussian_algebra import (GaussianBatch, GaussianDomainError, GaussianSum, GaussianTerm, batch_to_parameters,
                                     dual_lift, free_evolve, gaussian_moments, gram, inner, multiply, parameter_count,
                                     parameter_layout, parameter_slices, parameters_to_batch, poly_from_dict,
                                     term_to_parameters)


def quad_inner(u, v, lo=-30.0, hi=30.0):
    def part(fn):
        return integrate.quad(lambda x: fn(np.conj(u.value(np.array([x]))[0]) * v.value(np.array([x]))[0]),
                              lo, hi, limit=400, epsabs=1e-14, epsrel=1e-13)[0]
    return part(np.real) + 1j * part(np.imag)


def test_standard_gaussian_norm():
    u = GaussianTerm(1.0, [0.0], [0.0], [[1.0]], [[0.0]])
    assert inner(u, u) == pytest.approx(np.sqrt(np.pi), rel=1e-14)


def test_value_matches_formula():
    u = GaussianTerm(0.5 - 0.2j, [1.0], [0.7], [[1.3]], [[-0.4]])
    x = np.linspace(-4.0, 5.0, 37)
    expected = (0.5 - 0.2j) * np.exp(-0.5 * (1.3 - 0.4j) * (x - 1.0) ** 2) * np.exp(0.7j * (x - 1.0))
    np.testing.assert_allclose(u.value(x), expected, rtol=1e-13)


def test_inner_matches_quadrature_with_polynomials():
    u = GaussianTerm(1.0 + 0.5j, [0.5], [1.0], [[1.2]], [[0.3]], poly={(0,): 1.0, (2,): 0.5j})
    v = GaussianTerm(-0.3 + 1.0j, [-0.4], [-0.6], [[0.8]], [[-0.5]], poly={(1,): 2.0})
    for a, b in [(u, v), (v, u), (u, u)]:
        exact = inner(a, b)
        assert abs(exact - quad_inner(a, b)) <= 1e-10 * max(1.0, abs(exact))


def test_inner_2d_against_trapezoid():
    u = GaussianTerm(1.0, [0.3, -0.2], [0.5, 0.0], [[1.0, 0.2], [0.2, 1.5]], [[0.1, 0.0], [0.0, -0.3]])
    v = GaussianTerm(0.5j, [-0.1, 0.4], [0.0, -0.5], [[1.2, -0.1], [-0.1, 0.9]], [[0.0, 0.2], [0.2, 0.0]])
    h = 0.03
    axis = np.arange(-10.0, 10.0 + h / 2, h)
    X, Y = np.meshgrid(axis, axis, indexing='ij')
    points = np.column_stack([X.ravel(), Y.ravel()])
    numeric = np.sum(np.conj(u.value(points)) * v.value(points)) * h * h
    assert inner(u, v) == pytest.approx(numeric, rel=1e-10, abs=1e-12)


def test_inner_sesquilinear_and_hermitian():
    u = GaussianTerm(1.0, [0.0], [0.3], [[1.0]], [[0.2]])
    v = GaussianTerm(0.4 - 0.1j, [1.0], [-0.2], [[2.0]], [[0.0]])
    assert inner(u, v) == pytest.approx(np.conj(inner(v, u)), rel=1e-14)
    scaled = GaussianTerm(2j * v.a, v.q, v.p, v.A, v.B)
    assert inner(u, scaled) == pytest.approx(2j * inner(u, v), rel=1e-14)
    both = GaussianSum([u, v])
    assert inner(both, both) == pytest.approx(inner(u, u) + inner(v, v) + 2 * np.real(inner(u, v)), rel=1e-13)
    G = gram(both, both)
    np.testing.assert_allclose(G, G.conj().T, rtol=1e-14)


def test_multiply_is_pointwise():
    u = GaussianTerm(1.0 + 1.0j, [0.5], [1.0], [[1.0]], [[0.5]], poly={(1,): 1.0})
    v = GaussianTerm(0.3, [-1.0], [0.0], [[0.5]], [[-0.1]])
    x = np.linspace(-3.0, 3.0, 25)
    product = multiply(u, v)
    assert isinstance(product, GaussianTerm)
    np.testing.assert_allclose(product.value(x), u.value(x) * v.value(x), rtol=1e-11, atol=1e-14)


def test_degree_cap():
    u = GaussianTerm(1.0, [0.0], [0.0], [[1.0]], [[0.0]], poly={(3,): 1.0})
    with pytest.raises(GaussianDomainError):
        multiply(u, u)


def test_invalid_width():
    with pytest.raises(GaussianDomainError):
        GaussianTerm(1.0, [0.0], [0.0], [[-1.0]], [[0.0]])
    with pytest.raises(GaussianDomainError):
        GaussianTerm(1.0, [0.0, 0.0], [0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]], np.zeros((2, 2)))


@pytest.mark.parametrize('poly', [None, {(0,): 1.0, (1,): 0.5 - 0.5j, (2,): 0.2}])
def test_free_evolution_matches_fourier_multiplier(poly):
    u = GaussianTerm(1.0, [1.0], [0.5], [[1.0]], [[0.2]], poly=poly)
    t = 0.7
    n, half = 4096, 40.0
    x = np.linspace(-half, half, n, endpoint=False)
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=x[1] - x[0])
    expected = np.fft.ifft(np.fft.fft(u.value(x)) * np.exp(-1j * t * k ** 2))
    evolved = free_evolve(u, t)
    np.testing.assert_allclose(evolved.value(x), expected, atol=1e-9)


def test_free_evolution_is_unitary_and_invertible():
    u = GaussianTerm(0.7 + 0.2j, [0.3, -0.5], [1.0, 0.2], [[1.5, 0.3], [0.3, 0.8]], [[0.2, 0.0], [0.0, -0.1]])
    forward = free_evolve(u, 2.5)
    assert inner(forward, forward) == pytest.approx(inner(u, u), rel=1e-12)
    back = free_evolve(forward, 2.5, sign=-1)
    points = np.random.default_rng(1).uniform(-2.0, 2.0, size=(20, 2))
    np.testing.assert_allclose(back.value(points), u.value(points), rtol=1e-10, atol=1e-13)
    with pytest.raises(ValueError):
        free_evolve(u, 1.0, sign=2)


def test_free_evolution_closed_form_centered():
    u = GaussianTerm(1.0, [0.0], [0.0], [[2.0]], [[0.0]])
    t = 0.4
    x = np.linspace(-3.0, 3.0, 13)
    factor = 1.0 + 2j * t * 2.0
    expected = factor ** -0.5 * np.exp(-0.5 * (2.0 / factor) * x ** 2)
    np.testing.assert_allclose(free_evolve(u, t).value(x), expected, rtol=1e-13)


def test_parameter_layout_one_dimension():
    assert parameter_count(1) == 6
    assert parameter_count(3) == 20
    sl = parameter_slices(1)
    assert (sl['A'], sl['B'], sl['q'], sl['p']) == (slice(2, 3), slice(3, 4), slice(4, 5), slice(5, 6))
    assert 'Re a' in parameter_layout(1)


def test_parameters_match_gamma():
    v = np.array([0.8, -0.3, 1.4, 0.6, 0.5, -1.2])
    x = np.linspace(-3.0, 4.0, 29)
    expected = (v[0] + 1j * v[1]) * np.exp(-0.5 * (v[2] + 1j * v[3]) * (x - v[4]) ** 2) * np.exp(1j * v[5] * x)
    batch = parameters_to_batch(v[None], 1)
    np.testing.assert_allclose(batch.evaluate(x)[0], expected, rtol=1e-12)
    np.testing.assert_allclose(batch_to_parameters(batch)[0], v, rtol=1e-12, atol=1e-14)


def test_term_to_parameters_rejects_polynomials():
    term = GaussianTerm(1.0, [0.0], [0.0], [[1.0]], [[0.0]], poly={(1,): 1.0})
    with pytest.raises(GaussianDomainError):
        term_to_parameters(term)


def test_dual_lift_derivative_matches_finite_difference():
    X = np.array([0.9, 0.2, 1.1, -0.3, 0.4, 0.8])
    v = GaussianTerm(0.5, [-0.2], [0.1], [[0.7]], [[0.1]])
    eps = 1e-6
    for j in range(6):
        lifted = inner(v, dual_lift(X, j))
        step = np.zeros(6)
        step[j] = eps
        fd = (inner(v, parameters_to_batch((X + step)[None], 1))
              - inner(v, parameters_to_batch((X - step)[None], 1))) / (2 * eps)
        assert lifted.tan[0] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_gaussian_moments_one_dimension():
    moments = gaussian_moments(np.array([0.5]), np.array([[2.0]]), (5,))
    np.testing.assert_allclose(moments, [1.0, 0.5, 0.25 + 2.0, 0.125 + 3 * 0.5 * 2.0,
                                         0.5 ** 4 + 6 * 0.25 * 2.0 + 3 * 4.0])


def test_batch_concatenate_and_norms():
    u = GaussianTerm(1.0, [0.0], [0.0], [[1.0]], [[0.0]]).to_batch()
    v = GaussianTerm(2.0, [1.0], [0.0], [[1.0]], [[0.0]], poly=poly_from_dict({(1,): 1.0}, 1)).to_batch()
    joined = GaussianBatch.concatenate([u, v])
    assert joined.shape == (2,)
    assert joined.poly.shape == (2, 2)
    assert joined.norms()[0] == pytest.approx(np.pi ** 0.25, rel=1e-13)
    x = np.linspace(-2.0, 2.0, 9)
    np.testing.assert_allclose(joined.evaluate_sum(x), u.evaluate(x)[0] + v.evaluate(x)[0], rtol=1e-13)
