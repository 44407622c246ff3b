import numpy as np
import pytest

from litrain.encoder import (
    EncoderTape,
    ToyEncoderParams,
    encode_with_cache,
    init_params,
    sgd_update,
    toy_encode,
)
from litrain.errors import UsageError
from litrain.scoring import maxsim, maxsim_backward


def test_init_params_shape_and_determinism():
    p1 = init_params(d_in=6, d_out=4, seed=9)
    p2 = init_params(d_in=6, d_out=4, seed=9)
    p3 = init_params(d_in=6, d_out=4, seed=10)
    assert p1.projection.shape == (6, 4)
    np.testing.assert_array_equal(p1.projection, p2.projection)
    assert not np.array_equal(p1.projection, p3.projection)


def test_params_reject_nonfinite():
    with pytest.raises(UsageError):
        ToyEncoderParams(projection=np.array([[np.nan, 0.0]]))


def test_encode_rows_are_unit_norm(rng):
    params = init_params(d_in=5, d_out=3, seed=0)
    x = rng.standard_normal((7, 5))
    e = toy_encode(params, x)
    assert e.shape == (7, 3)
    np.testing.assert_allclose(np.linalg.norm(e, axis=1), np.ones(7), atol=1e-12)


def test_encode_zero_row_survives(rng):
    params = init_params(d_in=4, d_out=3, seed=0)
    x = np.zeros((2, 4))
    x[1] = rng.standard_normal(4)
    e = toy_encode(params, x)
    np.testing.assert_array_equal(e[0], np.zeros(3))


def test_tape_gradient_matches_fd_through_maxsim(rng):
    """Analytic projection gradient of maxsim(enc(q), enc(d)) vs central FD."""
    params = init_params(d_in=4, d_out=3, seed=2)
    xq = rng.standard_normal((2, 4))
    xd = rng.standard_normal((3, 4))

    def loss_for(p: ToyEncoderParams) -> float:
        return maxsim(toy_encode(p, xq), toy_encode(p, xd))

    tape = EncoderTape(params)
    eq, cache_q = tape.encode(xq)
    ed, cache_d = tape.encode(xd)
    base_winners = np.argmax(eq @ ed.T, axis=1)
    g_q, g_d = maxsim_backward(eq, ed)
    cache_q.add_grad(g_q)
    cache_d.add_grad(g_d)
    analytic = tape.projection_grad()

    eps = 1e-6
    checked = 0
    for i in range(4):
        for j in range(3):
            bump = np.zeros((4, 3))
            bump[i, j] = eps
            lo_p = ToyEncoderParams(projection=params.projection - bump)
            hi_p = ToyEncoderParams(projection=params.projection + bump)
            w_lo = np.argmax(toy_encode(lo_p, xq) @ toy_encode(lo_p, xd).T, axis=1)
            w_hi = np.argmax(toy_encode(hi_p, xq) @ toy_encode(hi_p, xd).T, axis=1)
            if not (np.array_equal(w_lo, base_winners) and np.array_equal(w_hi, base_winners)):
                continue
            fd = (loss_for(hi_p) - loss_for(lo_p)) / (2 * eps)
            assert analytic[i, j] == pytest.approx(fd, rel=1e-5, abs=1e-7)
            checked += 1
    assert checked >= 6


def test_encode_with_cache_matches_plain_encode(rng):
    params = init_params(d_in=4, d_out=3, seed=1)
    x = rng.standard_normal((3, 4))
    e_plain = toy_encode(params, x)
    e_cached, cache = encode_with_cache(params, x)
    np.testing.assert_array_equal(e_plain, e_cached)
    np.testing.assert_array_equal(cache.x, x)


def test_zero_row_contributes_zero_gradient(rng):
    params = init_params(d_in=4, d_out=3, seed=1)
    x = np.zeros((2, 4))
    x[1] = rng.standard_normal(4)
    _, cache = encode_with_cache(params, x)
    cache.add_grad(np.ones((2, 3)))
    g = cache.projection_grad()
    # only row 1 carries signal; a pure-zero input must yield exactly zero grad
    x_zero = np.zeros((1, 4))
    _, cache_zero = encode_with_cache(params, x_zero)
    cache_zero.add_grad(np.ones((1, 3)))
    np.testing.assert_array_equal(cache_zero.projection_grad(), np.zeros((4, 3)))
    assert np.any(g != 0)


def test_sgd_update_moves_against_gradient():
    params = ToyEncoderParams(projection=np.ones((2, 2)))
    grad = np.array([[1.0, 0.0], [0.0, -2.0]])
    out = sgd_update(params, grad, lr=0.5)
    np.testing.assert_allclose(out.projection, [[0.5, 1.0], [1.0, 2.0]])
