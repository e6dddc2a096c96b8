import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odstain.errors import DegenerateClass, InvalidParameter, ShapeMismatch
from odstain.pcls import (
    class_softmax,
    compute_prototypes,
    cross_similarity,
    ctpc_from_prototypes,
    ctpc_loss,
)

# --- naive reference, plain Python loops --------------------------------------


def ref_prototypes(f, p):
    h, w, d = f.shape
    c_n = p.shape[2]
    out = []
    for c in range(c_n):
        num = [0.0] * d
        den = 0.0
        for i in range(h):
            for j in range(w):
                den += p[i, j, c]
                for k in range(d):
                    num[k] += p[i, j, c] * f[i, j, k]
        out.append([x / den for x in num])
    return np.array(out)


def ref_similarity(f, q):
    h, w, d = f.shape
    out = np.zeros((h, w, len(q)))
    for i in range(h):
        for j in range(w):
            fn = math.sqrt(sum(f[i, j, k] ** 2 for k in range(d)))
            for c, qc in enumerate(q):
                qn = math.sqrt(sum(x * x for x in qc))
                if fn < 1e-12 or qn < 1e-12:
                    continue
                out[i, j, c] = sum(f[i, j, k] * qc[k] for k in range(d)) / (fn * qn)
    return out


def ref_softmax(s):
    out = np.zeros_like(s)
    h, w, c_n = s.shape
    for i in range(h):
        for j in range(w):
            z = sum(math.exp(s[i, j, c]) for c in range(c_n))
            for c in range(c_n):
                out[i, j, c] = math.exp(s[i, j, c]) / z
    return out


def ref_ctpc(f_f, p_f, f_r, p_r, m_f, m_r):
    q_f = ref_prototypes(f_f, p_f)
    q_r = ref_prototypes(f_r, p_r)
    p_fr = ref_softmax(ref_similarity(f_f, q_r))
    p_rf = ref_softmax(ref_similarity(f_r, q_f))
    h, w, c_n = p_fr.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            for c in range(c_n):
                total += abs(p_fr[i, j, c] - m_f[i, j, c]) + abs(p_rf[i, j, c] - m_r[i, j, c])
    return total / (c_n * h * w)


# --- random instances ---------------------------------------------------------


def random_instance(rng, h=None, w=None, d=None, c=2):
    h = h or int(rng.integers(1, 5))
    w = w or int(rng.integers(1, 5))
    d = d or int(rng.integers(1, 4))

    def probs():
        return rng.dirichlet(np.ones(c), size=(h, w))

    def mask():
        return np.eye(c)[rng.integers(0, c, size=(h, w))]

    f_f = rng.normal(size=(h, w, d))
    f_r = rng.normal(size=(h, w, d))
    return f_f, probs(), f_r, probs(), mask(), mask()


def test_oracle_equivalence(rng):
    for _ in range(200):
        f_f, p_f, f_r, p_r, m_f, m_r = random_instance(rng)
        q = compute_prototypes(f_f, p_f)
        np.testing.assert_allclose(q, ref_prototypes(f_f, p_f), atol=1e-9)
        s = cross_similarity(f_r, q)
        np.testing.assert_allclose(s, ref_similarity(f_r, q), atol=1e-9)
        np.testing.assert_allclose(class_softmax(s), ref_softmax(s), atol=1e-12)
        assert ctpc_loss(f_f, p_f, f_r, p_r, m_f, m_r) == pytest.approx(
            ref_ctpc(f_f, p_f, f_r, p_r, m_f, m_r), abs=1e-9
        )


# --- prototypes ---------------------------------------------------------------


def test_uniform_weights_give_mean(rng):
    f = rng.normal(size=(3, 4, 5))
    p = np.full((3, 4, 2), 0.5)
    q = compute_prototypes(f, p)
    np.testing.assert_allclose(q[0], f.reshape(-1, 5).mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(q[1], q[0], atol=1e-12)


def test_one_hot_weights_pick_pixel(rng):
    f = rng.normal(size=(2, 3, 4))
    p = np.zeros((2, 3, 2))
    p[..., 1] = 1.0
    p[1, 2] = (1.0, 0.0)
    np.testing.assert_allclose(compute_prototypes(f, p)[0], f[1, 2], atol=1e-12)


def test_weighted_average_by_hand():
    f = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    p = np.array([[[0.75, 0.25], [0.25, 0.75]]])
    np.testing.assert_allclose(compute_prototypes(f, p)[0], [0.75, 0.25], atol=1e-12)


def test_degenerate_class():
    f = np.ones((2, 2, 3))
    p = np.zeros((2, 2, 2))
    p[..., 0] = 1.0
    with pytest.raises(DegenerateClass) as info:
        compute_prototypes(f, p)
    assert info.value.class_index == 1


def test_prototype_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        compute_prototypes(np.ones((2, 2, 3)), np.full((2, 3, 2), 0.5))


@pytest.mark.parametrize(
    "p",
    [np.full((1, 1, 2), 0.6), np.array([[[1.2, -0.2]]]), np.array([[[np.nan, 1.0]]])],
)
def test_invalid_probability_map(p):
    with pytest.raises(InvalidParameter):
        compute_prototypes(np.ones((1, 1, 2)), p)


def test_single_class_rejected():
    with pytest.raises(ShapeMismatch):
        compute_prototypes(np.ones((1, 1, 2)), np.ones((1, 1, 1)))


@settings(max_examples=50, deadline=None)
@given(st.floats(-100, 100).filter(lambda k: abs(k) > 1e-3), st.integers(0, 10_000))
def test_prototype_scale_equivariance(k, seed):
    rng = np.random.default_rng(seed)
    f, p, *_ = random_instance(rng)
    np.testing.assert_allclose(
        compute_prototypes(k * f, p), k * compute_prototypes(f, p), rtol=1e-9, atol=1e-9
    )


# --- similarity and softmax ---------------------------------------------------


@pytest.mark.parametrize(
    "fv,qv,expected",
    [((1, 0), (1, 0), 1.0), ((1, 0), (0, 1), 0.0), ((3, 4), (4, 3), 0.96), ((0, 0), (1, 1), 0.0)],
)
def test_cosine_examples(fv, qv, expected):
    s = cross_similarity(np.array([[fv]], dtype=float), np.array([qv], dtype=float))
    assert s[0, 0, 0] == pytest.approx(expected, abs=1e-15)


def test_similarity_depth_mismatch():
    with pytest.raises(ShapeMismatch):
        cross_similarity(np.ones((1, 1, 3)), np.ones((2, 2)))


def test_similarity_range(rng):
    s = cross_similarity(rng.normal(size=(5, 5, 4)), rng.normal(size=(3, 4)))
    assert (np.abs(s) <= 1.0).all()


def test_softmax_examples():
    np.testing.assert_allclose(class_softmax(np.zeros((1, 1, 3))), 1 / 3)
    # logistic(1) = 0.7310585786300049
    np.testing.assert_allclose(
        class_softmax(np.array([[[1.0, 0.0]]]))[0, 0], [0.7310585786300049, 0.2689414213699951],
        atol=1e-15,
    )


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=4), st.floats(-50, 50))
def test_softmax_shift_invariant_and_simplex(s, shift):
    s = np.array([[s]])
    p = class_softmax(s)
    np.testing.assert_allclose(class_softmax(s + shift), p, atol=1e-12)
    assert (p > 0).all()
    assert abs(p.sum() - 1.0) <= 1e-6


# --- CTPC ---------------------------------------------------------------------


def test_single_pixel_fixture():
    # similarities (1, 0) in both directions -> softmax (0.73106, 0.26894), masks (1, 0)
    f = np.array([[[1.0, 0.0]]])
    q = np.array([[1.0, 0.0], [0.0, 1.0]])
    m = np.array([[[1.0, 0.0]]])
    loss = ctpc_from_prototypes(f, q, f, q, m, m)
    assert loss == pytest.approx(0.53788, abs=1e-5)
    assert loss == pytest.approx(2 * 0.2689414213699951, abs=1e-15)


def test_two_pixel_fixture_through_prototypes():
    # one-hot probabilities make the prototypes the two pixel features
    f = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    p = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    assert ctpc_loss(f, p, f, p, p, p) == pytest.approx(2 * 0.2689414213699951, abs=1e-15)


def test_swap_symmetry(rng):
    for _ in range(50):
        f_f, p_f, f_r, p_r, m_f, m_r = random_instance(rng)
        assert ctpc_loss(f_f, p_f, f_r, p_r, m_f, m_r) == ctpc_loss(f_r, p_r, f_f, p_f, m_r, m_f)


def test_scale_invariance(rng):
    f_f, p_f, f_r, p_r, m_f, m_r = random_instance(rng, 3, 3, 3)
    base = ctpc_loss(f_f, p_f, f_r, p_r, m_f, m_r)
    assert ctpc_loss(7.5 * f_f, p_f, f_r, p_r, m_f, m_r) == pytest.approx(base, abs=1e-12)
    assert ctpc_loss(f_f, p_f, 0.01 * f_r, p_r, m_f, m_r) == pytest.approx(base, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_loss_bounds(seed, c):
    rng = np.random.default_rng(seed)
    loss = ctpc_loss(*random_instance(rng, c=c))
    assert 0.0 <= loss <= 2.0


def test_mask_validation(rng):
    f_f, p_f, f_r, p_r, m_f, m_r = random_instance(rng, 2, 2, 2)
    with pytest.raises(InvalidParameter):
        ctpc_loss(f_f, p_f, f_r, p_r, np.full_like(m_f, 0.5), m_r)
    with pytest.raises(ShapeMismatch):
        ctpc_loss(f_f, p_f, f_r, p_r, m_f[:1], m_r)


def test_grid_mismatch(rng):
    a = random_instance(rng, 2, 2, 2)
    b = random_instance(rng, 3, 2, 2)
    with pytest.raises(ShapeMismatch):
        ctpc_loss(a[0], a[1], b[2], b[3], a[4], b[5])
