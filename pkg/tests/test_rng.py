import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltsmlmc import rng
from ltsmlmc.rng import (
    KL_BOUND,
    KL_TERMS,
    DomainError,
    FieldKind,
    FieldSample,
    derive_stream,
    eval_speed_squared,
    kl_sample,
    sample_jump,
    sample_kl,
    sample_width,
    speed_squared_bound,
)

seeds = st.integers(0, 2**64 - 1)
small = st.integers(0, 10_000)


@given(seeds, small, small)
def test_stream_replays_identically(seed, level, index):
    a = derive_stream(seed, level, index).uniform(size=5)
    b = derive_stream(seed, level, index).uniform(size=5)
    assert np.array_equal(a, b)


def test_streams_do_not_depend_on_creation_order():
    keys = [(3, 0, i) for i in range(6)] + [(3, 1, i) for i in range(6)]
    forward = {k: derive_stream(*k).uniform() for k in keys}
    backward = {k: derive_stream(*k).uniform() for k in reversed(keys)}
    assert forward == backward


def test_distinct_keys_give_distinct_streams():
    draws = {derive_stream(0, ell, i).uniform() for ell in range(4) for i in range(50)}
    draws |= {derive_stream(1, 0, i).uniform() for i in range(50)}
    assert len(draws) == 250


def test_negative_key_rejected():
    with pytest.raises(ValueError):
        derive_stream(0, -1, 0)
    with pytest.raises(ValueError):
        derive_stream(-5, 0, 0)


@given(
    st.lists(st.floats(-1, 1), min_size=KL_TERMS, max_size=KL_TERMS),
    st.lists(st.floats(-1, 1), min_size=KL_TERMS, max_size=KL_TERMS),
    st.floats(0, 6),
)
def test_kl_speed_stays_within_bound(xi1, xi2, x):
    c2 = eval_speed_squared(kl_sample(xi1, xi2), x)
    assert abs(c2 - 1.0) <= KL_BOUND + 1e-15
    assert c2 <= speed_squared_bound(FieldKind.KL)


def test_kl_zero_coefficients_give_unit_speed():
    s = kl_sample(np.zeros(KL_TERMS), np.zeros(KL_TERMS))
    assert np.array_equal(eval_speed_squared(s, np.linspace(0, 6, 11)), np.ones(11))


def test_kl_single_mode_matches_closed_form():
    xi1 = np.zeros(KL_TERMS)
    xi1[2] = 1.0
    x = np.linspace(0, 6, 7)
    expected = 1 + np.cos(3 * np.pi * x / 6) / (4 * np.pi**2 * 9)
    assert np.allclose(eval_speed_squared(kl_sample(xi1, np.zeros(KL_TERMS)), x), expected, rtol=0, atol=1e-15)


def test_sample_kl_draws_uniform_coefficients():
    s = sample_kl(derive_stream(7, 0, 0))
    assert s.kl_xi1.shape == (KL_TERMS,)
    assert np.all(np.abs(np.concatenate([s.kl_xi1, s.kl_xi2])) <= 1)


def test_scalar_in_scalar_out():
    s = sample_kl(derive_stream(0, 0, 0))
    assert isinstance(eval_speed_squared(s, 1.5), float)


def test_outside_domain_raises():
    s = sample_kl(derive_stream(0, 0, 0))
    with pytest.raises(DomainError):
        eval_speed_squared(s, 6.5)
    with pytest.raises(DomainError):
        eval_speed_squared(sample_jump(derive_stream(0, 0, 0), 0.1), -0.1)


@given(st.floats(1e-3, 1.0), small)
def test_jump_position_and_values(H0, index):
    s = sample_jump(derive_stream(1, 0, index), H0)
    assert rng.JUMP_RIGHT_END - H0 <= s.jump_xi <= rng.JUMP_RIGHT_END
    assert eval_speed_squared(s, s.jump_xi - 1e-9) == 1.0
    assert eval_speed_squared(s, s.jump_xi + 1e-9) == 4.0
    assert eval_speed_squared(s, 0.0) == 1.0


def test_jump_with_zero_window_is_fixed():
    assert sample_jump(derive_stream(0, 0, 0), 0.0).jump_xi == rng.JUMP_RIGHT_END
    with pytest.raises(ValueError):
        sample_jump(derive_stream(0, 0, 0), -1.0)


@given(small)
def test_width_in_range(index):
    b = sample_width(derive_stream(2, 1, index)).width_b
    assert rng.WIDTH_RANGE[0] <= b <= rng.WIDTH_RANGE[1]


def test_channel_speed_is_one_anywhere():
    s = sample_width(derive_stream(0, 0, 0))
    assert np.array_equal(eval_speed_squared(s, np.array([-1.0, 0.0, 7.0])), np.ones(3))


def test_field_sample_validation():
    with pytest.raises(ValueError):
        FieldSample(FieldKind.KL, kl_xi1=np.zeros(3), kl_xi2=np.zeros(3))
    with pytest.raises(ValueError):
        FieldSample(FieldKind.JUMP)
    with pytest.raises(ValueError):
        FieldSample(FieldKind.CHANNEL_WIDTH)


def test_bounds_per_kind():
    assert speed_squared_bound(FieldKind.JUMP) == 4.0
    assert speed_squared_bound(FieldKind.CHANNEL_WIDTH) == 1.0
    assert KL_BOUND == pytest.approx(np.sum(1 / np.arange(1, 101) ** 2) / (2 * np.pi**2))
