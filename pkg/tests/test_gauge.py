import numpy as np
import pytest

from sandflow.gauge import Gauge, GaugeError, ellipse, euclidean, pnorm


def support_function_bruteforce(g: Gauge, xi, n: int = 1_000_000) -> float:
    """Independent oracle: max of <xi, x> over n sampled boundary points of K."""
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    ring = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    bdry = ring / g.value(ring)[:, None]
    return float((bdry @ np.asarray(xi, dtype=float)).max())


def central_fd_gradient(g: Gauge, xi, step: float = 1e-6) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    ex = np.array([step, 0.0])
    ey = np.array([0.0, step])
    return np.array([
        (g.value(xi + ex) - g.value(xi - ex)) / (2 * step),
        (g.value(xi + ey) - g.value(xi - ey)) / (2 * step),
    ])


def test_value_examples():
    assert euclidean().value([3.0, 4.0]) == pytest.approx(5.0, abs=1e-12)
    e = ellipse(2.0, 1.0)
    assert e.value([2.0, 0.0]) == pytest.approx(1.0, abs=1e-12)
    assert e.value([0.0, 3.0]) == pytest.approx(3.0, abs=1e-12)
    assert e.value([0.0, 0.0]) == 0.0


def test_polar_value_examples():
    assert euclidean().polar_value([3.0, 4.0]) == pytest.approx(5.0, abs=1e-12)
    e = ellipse(2.0, 1.0)
    oracle = support_function_bruteforce(e, [1.0, 0.0])
    assert oracle == pytest.approx(2.0, abs=1e-6)
    assert e.polar_value([1.0, 0.0]) == pytest.approx(oracle, abs=1e-6)
    for g in (euclidean(), e, pnorm(3.0)):
        assert g.polar_value([0.0, 0.0]) == 0.0


def test_gradient_examples():
    assert np.allclose(euclidean().gradient([0.0, 2.0]), [0.0, 1.0])
    e = ellipse(2.0, 1.0)
    fd = central_fd_gradient(e, [2.0, 0.0])
    assert np.allclose(fd, [0.5, 0.0], atol=1e-6)
    grad = e.gradient([2.0, 0.0])
    assert np.allclose(grad, [0.5, 0.0], atol=1e-12)
    assert float(grad @ np.array([2.0, 0.0])) == pytest.approx(
        e.value([2.0, 0.0]), abs=1e-12)
    # 0-homogeneity
    g1 = euclidean().gradient([3.0, 4.0])
    g2 = euclidean().gradient([6.0, 8.0])
    assert np.allclose(g1, g2, atol=1e-14)


def test_gradient_rejects_origin():
    for g in (euclidean(), ellipse(2.0, 1.0), pnorm(3.0)):
        with pytest.raises(GaugeError):
            g.gradient([0.0, 0.0])


def test_invalid_parameters_rejected():
    with pytest.raises(GaugeError):
        ellipse(-1.0, 1.0)
    with pytest.raises(GaugeError):
        ellipse(2.0, 0.0)
    with pytest.raises(GaugeError):
        pnorm(1.0)
    with pytest.raises(GaugeError):
        pnorm(0.5)


@pytest.mark.parametrize("g", [euclidean(), ellipse(2.0, 1.0),
                               ellipse(0.5, 3.0), pnorm(3.0), pnorm(1.5)])
def test_triangle_inequality(g):
    rng = np.random.default_rng(0)
    xi = rng.normal(size=(10_000, 2))
    eta = rng.normal(size=(10_000, 2))
    assert np.all(g.value(xi + eta) <= g.value(xi) + g.value(eta) + 1e-12)
    gp = g.polar()
    assert np.all(gp.value(xi + eta) <= gp.value(xi) + gp.value(eta) + 1e-12)


@pytest.mark.parametrize("g", [euclidean(), ellipse(2.0, 1.0), pnorm(3.0),
                               pnorm(1.5)])
def test_gradient_identities(g):
    rng = np.random.default_rng(1)
    xi = rng.normal(size=(10_000, 2))
    xi = xi[g.value(xi) > 1e-3]
    grad = g.gradient(xi)
    pairing = np.einsum("ij,ij->i", grad, xi)
    assert np.abs(pairing - g.value(xi)).max() <= 1e-9
    assert np.abs(g.polar_value(grad) - 1.0).max() <= 1e-9


def test_bipolar_identity():
    g = ellipse(2.0, 0.7)
    gpp = g.polar().polar()
    rng = np.random.default_rng(2)
    xi = rng.normal(size=(1000, 2))
    assert np.abs(gpp.value(xi) - g.value(xi)).max() <= 1e-9


@pytest.mark.parametrize("g", [ellipse(2.0, 1.0), pnorm(3.0), pnorm(1.5)])
def test_gradient_matches_finite_differences(g):
    rng = np.random.default_rng(3)
    xi = rng.normal(size=(200, 2))
    xi = xi[g.value(xi) > 0.1]
    for v in xi:
        fd = central_fd_gradient(g, v)
        grad = g.gradient(v)
        assert np.linalg.norm(fd - grad) <= 1e-6 * max(1.0, np.linalg.norm(grad))


def test_polar_strict_convexity():
    # Equality in the polar triangle inequality only for parallel,
    # same-orientation pairs.
    g = ellipse(2.0, 1.0).polar()
    rng = np.random.default_rng(4)
    xi = rng.normal(size=(10_000, 2))
    eta = rng.normal(size=(10_000, 2))
    gap = g.value(xi) + g.value(eta) - g.value(xi + eta)
    tied = gap <= 1e-9
    if np.any(tied):
        cross = np.abs(xi[tied, 0] * eta[tied, 1] - xi[tied, 1] * eta[tied, 0])
        dot = np.einsum("ij,ij->i", xi[tied], eta[tied])
        assert np.all((cross <= 1e-6) & (dot >= 0.0))
    # And genuinely parallel pairs do tie.
    v = np.array([1.3, -0.4])
    assert g.value(v) + g.value(2.5 * v) - g.value(3.5 * v) <= 1e-9


def test_config_roundtrip():
    for g in (euclidean(), ellipse(2.0, 1.0), pnorm(3.0)):
        g2 = Gauge.from_config(g.to_config())
        assert g2.kind == g.kind
        xi = np.array([0.3, -1.7])
        assert g2.value(xi) == pytest.approx(float(g.value(xi)), abs=1e-15)
