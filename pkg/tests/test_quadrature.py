import numpy as np
import pytest
from numpy.testing import assert_allclose

from quadrature import apply, gauss_legendre_unit, map_nodes


def test_low_order_rules_match_closed_forms():
    rule = gauss_legendre_unit(1)
    assert_allclose(rule.nodes, [0.5], atol=1e-15)
    assert_allclose(rule.weights, [1.0], atol=1e-15)

    rule = gauss_legendre_unit(2)
    offset = np.sqrt(3.0) / 6.0
    assert_allclose(rule.nodes, [0.5 - offset, 0.5 + offset], atol=1e-15)
    assert_allclose(rule.weights, [0.5, 0.5], atol=1e-15)

    rule = gauss_legendre_unit(3)
    offset = np.sqrt(15.0) / 10.0
    assert_allclose(rule.nodes, [0.5 - offset, 0.5, 0.5 + offset], atol=1e-15)
    assert_allclose(rule.weights, [5 / 18, 8 / 18, 5 / 18], atol=1e-15)


@pytest.mark.parametrize("s", [1, 2, 3, 5, 8, 13, 21, 40, 64])
def test_nodes_and_weights_are_well_formed(s):
    rule = gauss_legendre_unit(s)
    assert rule.nodes.shape == rule.weights.shape == (s,)
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.all((rule.nodes > 0) & (rule.nodes < 1))
    assert np.all(rule.weights > 0)
    assert abs(rule.weights.sum() - 1.0) <= 1e-14
    assert_allclose(rule.nodes + rule.nodes[::-1], 1.0, atol=1e-14)
    assert_allclose(rule.weights, rule.weights[::-1], atol=1e-14)


@pytest.mark.parametrize("s", range(1, 11))
def test_monomials_integrated_exactly_up_to_degree_2s_minus_1(s):
    rule = gauss_legendre_unit(s)
    for degree in range(2 * s):
        value = apply(rule, 0.0, 1.0, rule.nodes ** degree)
        assert abs(value - 1.0 / (degree + 1)) <= 1e-12 / (degree + 1)


def test_quintic_on_three_nodes():
    rule = gauss_legendre_unit(3)
    assert abs(rule.apply(0.0, 1.0, rule.nodes ** 5) - 1.0 / 6.0) <= 1e-14


def test_mapped_rule_on_general_interval():
    rule = gauss_legendre_unit(2)
    t = map_nodes(rule, 1.0, 3.0)
    assert abs(apply(rule, 1.0, 3.0, t ** 2) - 26.0 / 3.0) <= 1e-13


def test_apply_keeps_leading_axes():
    rule = gauss_legendre_unit(4)
    t = rule.map_nodes(0.0, 2.0)
    samples = np.vstack([np.ones_like(t), t, t ** 3])
    assert_allclose(rule.apply(0.0, 2.0, samples), [2.0, 2.0, 4.0], rtol=1e-14)


@pytest.mark.parametrize("s", [0, 65, -3, 2.5, True])
def test_invalid_node_counts_are_rejected(s):
    with pytest.raises(ValueError):
        gauss_legendre_unit(s)


def test_degenerate_interval_is_rejected():
    rule = gauss_legendre_unit(2)
    with pytest.raises(ValueError):
        map_nodes(rule, 1.0, 1.0)
    with pytest.raises(ValueError):
        apply(rule, 2.0, 1.0, np.ones(2))


def test_wrong_sample_count_is_rejected():
    with pytest.raises(ValueError):
        apply(gauss_legendre_unit(3), 0.0, 1.0, np.ones(2))


def test_rules_are_cached_and_read_only():
    rule = gauss_legendre_unit(7)
    assert gauss_legendre_unit(7) is rule
    with pytest.raises(ValueError):
        rule.nodes[0] = 0.0
    with pytest.raises(ValueError):
        rule.weights[0] = 0.0


@pytest.mark.parametrize("s", [1, 3, 6, 12])
@pytest.mark.parametrize("a,b", [(0.0, 1.0), (1.0, 3.0), (-2.5, -0.25), (4.0, 4.001)])
def test_rule_is_affine_covariant(s, a, b):
    rule = gauss_legendre_unit(s)

    def g(t):
        return np.exp(np.sin(3.0 * t)) + t ** 5

    mapped = apply(rule, a, b, g(map_nodes(rule, a, b)))
    pulled_back = (b - a) * apply(rule, 0.0, 1.0, g(a + (b - a) * rule.nodes))
    assert mapped == pytest.approx(pulled_back, rel=1e-14, abs=1e-14)
