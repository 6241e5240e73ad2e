import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoadv import checks, theory


def test_tau_examples():
    assert theory.tau([0.25] * 4) == 0.25
    assert theory.tau([1.0]) == 1.0
    assert theory.tau([0.5, 0.3, 0.2]) == pytest.approx(0.38, abs=1e-15)
    with pytest.raises(ValueError):
        theory.tau([0.5, 0.6])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8).filter(lambda v: sum(v) > 0))
def test_tau_range(weights):
    rho = np.array(weights) / sum(weights)
    t = theory.tau(rho)
    assert 1 / len(rho) - 1e-12 <= t <= 1 + 1e-12


def test_single_class_risk_is_conditional_on_equal():
    spec = theory.LatentClassSpec([1.0], [[0, 1]], [[0.3, 0.7]], np.eye(2))
    l_p, l_neq, l_eq = theory.contrastive_risk(spec)
    assert l_p == l_eq and np.isnan(l_neq)
    assert theory.decomposition_gap(spec) == 0.0


def test_two_class_enumeration_oracle():
    spec = theory.LatentClassSpec([0.5, 0.5], [[0], [1]], [[1.0], [1.0]], np.eye(2))
    # equal classes: margin 0; different classes: margin e_i . (e_i - e_j) = 1
    l_eq, l_neq = np.log(2.0), np.log1p(np.exp(-1.0))
    terms = [0.25 * (l_eq if cp == cn else l_neq) for cp in range(2) for cn in range(2)]
    l_p, got_neq, got_eq = theory.contrastive_risk(spec)
    assert abs(l_p - sum(terms)) < 1e-15
    assert abs(got_neq - l_neq) < 1e-15 and abs(got_eq - l_eq) < 1e-15
    l_p, _, _ = theory.contrastive_risk(spec, "hinge")
    assert abs(l_p - 0.5 * 1.0 - 0.5 * 0.0) < 1e-15


@pytest.mark.parametrize("loss", ["logistic", "hinge"])
def test_decomposition_identity_random(loss):
    rng = np.random.default_rng(11)
    for _ in range(30):
        assert theory.decomposition_gap(theory.random_spec(rng), loss) < 1e-12


def test_spec_validation_and_cap():
    with pytest.raises(ValueError):
        theory.LatentClassSpec([0.5, 0.6], [[0], [1]], [[1.0], [1.0]], np.eye(2))
    with pytest.raises(ValueError):
        theory.LatentClassSpec([1.0], [[0, 1]], [[0.5, 0.6]], np.eye(2))
    big = theory.LatentClassSpec([1.0], [np.arange(60)], [np.full(60, 1 / 60)], np.zeros((60, 2)))
    with pytest.raises(ValueError):
        theory.contrastive_risk(big)


def test_mean_vs_lr_examples():
    # no signal: the mean init is already stationary
    start, final, holds = theory.check_mean_vs_lr(np.zeros((4, 2)), np.array([0, 1, 0, 1]))
    assert start == final == pytest.approx(np.log(2)) and holds
    x, y = checks.blobs(np.random.default_rng(0))
    start, final, holds = theory.check_mean_vs_lr(x, y, steps=0)
    assert start == final and holds
    start, final, holds = theory.check_mean_vs_lr(x, y, steps=50)
    assert final < start and holds
    with pytest.raises(ValueError):
        theory.check_mean_vs_lr(x, np.where(y == 1, 2, y))


def test_dpi_identity_and_independent_channels():
    rng = np.random.default_rng(0)
    p_x = rng.dirichlet(np.ones(4))
    p_yx = rng.dirichlet(np.ones(4), size=4)
    i_xy, i_yz, i_xz, holds = theory.check_dpi(theory.DiscreteChannelChain(p_x, p_yx, np.eye(4)))
    assert abs(i_xz - i_xy) < 1e-15 and holds
    flat = np.tile(rng.dirichlet(np.ones(3)), (4, 1))
    _, i_yz, i_xz, holds = theory.check_dpi(theory.DiscreteChannelChain(p_x, p_yx, flat))
    assert abs(i_xz) < 1e-15 and abs(i_yz) < 1e-15 and holds


def test_mutual_information_properties():
    rng = np.random.default_rng(1)
    joint = rng.dirichlet(np.ones(12)).reshape(3, 4)
    mi = theory.mutual_information(joint)
    assert mi >= 0
    assert abs(theory.mutual_information(joint.T) - mi) < 1e-15
    assert abs(theory.mutual_information(joint[::-1, ::-1]) - mi) < 1e-15


def test_chain_validation():
    with pytest.raises(ValueError):
        theory.DiscreteChannelChain([1.0], [[0.5, 0.6]], [[1.0], [1.0]])
    with pytest.raises(ValueError):
        theory.DiscreteChannelChain(np.full(17, 1 / 17), np.eye(17), np.eye(17))


def test_checks_runner():
    out = checks.run("tau")
    assert out[0]["passed"]
    out = checks.run("dpi", trials=20, seed=3)
    assert out[0]["trials"] == 20 and out[0]["passed"]
    with pytest.raises(KeyError):
        checks.run("nonsense")
