import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoadv import autodiff as ad
from infoadv import losses
from infoadv.config import default_config
from infoadv.encoder import ProjectionHead


def _unit(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _l1_oracle(i, U, Um, Vm, tau):
    """Brute-force per-node InfoNCE loss with cosine similarity."""
    cos = lambda a, b: float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    pos = np.exp(cos(Um[i], Vm[i]) / tau)
    den = pos
    for k in range(len(U)):
        if k != i:
            den += np.exp(cos(U[i], Vm[k]) / tau) + np.exp(cos(Um[i], Um[k]) / tau)
    return -np.log(pos / den)


def _rand(seed, n=3, d=4):
    rng = np.random.default_rng(seed)
    return [rng.standard_normal((n, d)) for _ in range(4)]


def test_similarity_identical_and_orthogonal():
    assert losses.similarity([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0, abs=1e-15)
    assert losses.similarity([1.0, 0.0], [0.0, 5.0]) == 0.0


def test_similarity_matches_naive_with_head():
    rng = np.random.default_rng(0)
    head = ProjectionHead(4, seed=0)
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    with ad.no_record():
        px = head(ad.Tensor(x[None])).value[0]
        py = head(ad.Tensor(y[None])).value[0]
    want = px @ py / (np.linalg.norm(px) * np.linalg.norm(py))
    assert abs(losses.similarity(x, y, head) - want) < 1e-12


def test_two_nodes_equal_similarities_give_log3():
    same = np.ones((2, 3))
    for i in range(2):
        assert losses.l1(i, same, same, same, 0.5) == pytest.approx(np.log(3), abs=1e-12)


def test_saturated_positive_goes_to_zero():
    # positive similarity 1, every negative -1: loss = log(1 + 2 exp(-2 / tau))
    um = np.array([[1.0], [-1.0]])
    vals = [losses.l1(0, um, um, um, t) for t in (1.0, 0.1, 0.01)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[1] == pytest.approx(np.log1p(2 * np.exp(-20.0)), rel=1e-9)
    assert vals[2] < 1e-80


@pytest.mark.parametrize("seed", range(5))
def test_l1_three_node_oracle(seed):
    U, Um, _, Vm = _rand(seed)
    for i in range(3):
        assert abs(losses.l1(i, U, Um, Vm, 0.5) - _l1_oracle(i, U, Um, Vm, 0.5)) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_J1_four_node_oracle(seed):
    U, Um, V, Vm = _rand(seed, n=4)
    want = sum(_l1_oracle(i, U, Um, Vm, 0.5) + _l1_oracle(i, V, Vm, Um, 0.5) for i in range(4)) / 8
    with ad.no_record():
        got = losses.J1(U, Um, V, Vm, 0.5).item()
    assert abs(got - want) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_J1_symmetric_nonnegative_permutation_invariant(seed, n):
    U, Um, V, Vm = _rand(seed, n=n)
    perm = np.random.default_rng(seed).permutation(n)
    with ad.no_record():
        a = losses.J1(U, Um, V, Vm, 0.5).item()
        b = losses.J1(V, Vm, U, Um, 0.5).item()
        c = losses.J1(U[perm], Um[perm], V[perm], Vm[perm], 0.5).item()
    assert a >= 0
    assert abs(a - b) < 1e-12
    assert abs(a - c) < 1e-12


def test_finite_at_smallest_temperature():
    U, Um, V, Vm = _rand(0, n=5)
    with ad.no_record():
        assert np.isfinite(losses.J1(U, Um, U, Um, 0.1).item())


def test_single_node_rejected():
    x = np.ones((1, 3))
    with pytest.raises(ValueError):
        losses.l1(0, x, x, x, 0.5)


def test_kl_examples():
    assert losses.l2(np.zeros(4), np.ones(4)) == 0.0
    assert losses.l2([1.0], [1.0]) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        losses.l2([0.0], [0.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_kl_closed_form_and_nonnegative(seed):
    rng = np.random.default_rng(seed)
    mu = rng.standard_normal(5) * 2
    sigma = np.exp(rng.uniform(-3, 2, 5))
    # KL(N(m, s^2) || N(0, 1)) = log(1/s) + (s^2 + m^2)/2 - 1/2
    want = float(np.sum(np.log(1 / sigma) + (sigma**2 + mu**2) / 2 - 0.5))
    got = losses.l2(mu, sigma)
    assert abs(got - want) <= 1e-12 * max(1.0, abs(want))
    assert got >= 0


def test_J2_relations():
    rng = np.random.default_rng(1)
    um, vm = rng.standard_normal((6, 3)), rng.standard_normal((6, 3))
    us, vs = np.exp(rng.standard_normal((6, 3))), np.exp(rng.standard_normal((6, 3)))
    T = ad.Tensor
    with ad.no_record():
        j2 = losses.J2(T(um), T(us), T(vm), T(vs)).item()
        ju = losses.J2_prime(T(um), T(us)).item()
        jv = losses.J2_prime(T(vm), T(vs)).item()
        same = losses.J2(T(um), T(us), T(um), T(us)).item()
        zero = losses.J2(T(np.zeros((6, 3))), T(np.ones((6, 3))), T(np.zeros((6, 3))), T(np.ones((6, 3)))).item()
    assert abs(j2 - 0.5 * (ju + jv)) < 1e-12
    assert abs(same - ju) < 1e-12
    assert zero == 0.0


def _bundle(lam, record=True):
    rng = np.random.default_rng(2)
    ps = ad.ParamStore()
    names = ["U", "Um", "V", "Vm"]
    ts = [ps.add(n, rng.standard_normal((4, 3))) for n in names]
    us = ps.add("Us", np.exp(rng.standard_normal((4, 3))))
    vs = ps.add("Vs", np.exp(rng.standard_normal((4, 3))))
    b = losses.LossBundle(J1=losses.J1(*ts, 0.5), J2=losses.J2(ts[1], us, ts[3], vs),
                          J2_prime=losses.J2_prime(ts[1], us), lam=lam, tau_nce=0.5)
    return ps, b


def test_encoder_loss_without_regularizer_is_J1():
    with ad.no_record():
        _, b = _bundle(0.0)
        assert losses.encoder_loss(b).item() == b.J1.item()
        _, b = _bundle(10.0)
        assert losses.encoder_loss(b).item() == pytest.approx(b.J1.item() + 10 * b.J2.item(), abs=1e-12)


def test_pubmed_regularizer_weight():
    assert default_config("pubmed").lam == 10.0


def test_generator_loss_ignores_second_view():
    with ad.record():
        ps, b = _bundle(1.0)
        loss = losses.generator_loss(b)
    ad.backward(loss)
    for name in ("V", "Vm", "Vs", "U"):
        assert ps[name].grad is None or not np.any(ps[name].grad), name
    assert np.any(ps["Um"].grad) and np.any(ps["Us"].grad)


def test_generator_infonce_objective_negates_J1():
    with ad.no_record():
        _, b = _bundle(1.0)
        assert losses.generator_loss(b, "infonce").item() == -b.J1.item()
    with pytest.raises(ValueError):
        losses.generator_loss(b, "other")


def test_loss_gradients():
    rng = np.random.default_rng(3)
    ps = ad.ParamStore()
    ts = [ps.add(n, rng.standard_normal((4, 3))) for n in ("U", "Um", "V", "Vm")]
    us = ps.add("Us", np.exp(rng.standard_normal((4, 3))) + 0.1)
    head = ProjectionHead(3, seed=0)
    store = ps.merged(head.params)

    def build():
        return ad.add(losses.J1(*ts, 0.5, head), ad.scale(losses.J2(ts[1], us, ts[3], us), 0.3))

    assert ad.grad_check(build, store) < 1e-4
