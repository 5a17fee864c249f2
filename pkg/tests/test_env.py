from __future__ import annotations

import math
import struct

import numpy as np
import pytest

from lgpolymer.env import (
    CapacityError,
    EnvFileError,
    EnvVersionError,
    Environment,
    Window,
    fingerprint,
    load_environment,
    reverse_environment,
    sample_environment,
    save_environment,
    stream,
)
from lgpolymer.scaling import digamma, trigamma


def test_window_membership_and_cell_count():
    w = Window(2, 5, 1, 3)
    assert w.n_cols == 4 and w.n_rows == 3
    assert w.n_cells == 12
    assert w.contains(2, 1) and w.contains(5, 3)
    assert not w.contains(1, 1) and not w.contains(5, 4)
    assert w.contains_box(3, 5, 1, 2)
    assert not w.contains_box(3, 6, 1, 2)


def test_window_rejects_empty_ranges():
    with pytest.raises(ValueError):
        Window(3, 2, 1, 1)
    with pytest.raises(ValueError):
        Window(1, 2, 4, 3)


def test_sampling_is_deterministic_per_seed():
    w = Window(1, 8, 1, 5)
    a = sample_environment(1.0, w, 42)
    b = sample_environment(1.0, w, 42)
    c = sample_environment(1.0, w, 43)
    assert np.array_equal(a.log_weights, b.log_weights)
    assert not np.array_equal(a.log_weights, c.log_weights)


def test_stream_substreams_are_independent_of_draw_order():
    # Drawing stream 3 before stream 1 must not change either stream's values.
    w = Window(1, 6, 1, 4)
    first = sample_environment(1.0, w, stream(7, 3)).log_weights.copy()
    _ = sample_environment(1.0, w, stream(7, 1))
    again = sample_environment(1.0, w, stream(7, 3)).log_weights
    assert np.array_equal(first, again)
    # Distinct substreams of one seed differ.
    other = sample_environment(1.0, w, stream(7, 4)).log_weights
    assert not np.array_equal(first, other)


def test_weight_lookup_matches_array_layout():
    env = sample_environment(2.0, Window(2, 6, 3, 7), 5)
    assert env.log_weight(2, 3) == env.log_weights[0, 0]
    assert env.log_weight(6, 7) == env.log_weights[-1, -1]
    assert env.log_weight(4, 5) == env.log_weights[2, 2]
    with pytest.raises(ValueError):
        env.log_weight(1, 3)


def test_theta_must_be_positive_and_finite():
    w = Window(1, 2, 1, 2)
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            sample_environment(bad, w, 1)


def test_capacity_guard_refuses_oversized_grids():
    with pytest.raises(CapacityError):
        sample_environment(1.0, Window(1, 1 << 15, 1, 1 << 14), 0)


def test_inverse_weight_mean_matches_shape_parameter():
    # d = 1/G with G ~ Gamma(theta, 1), so E[1/d] = E[G] = theta.
    theta = 2.0
    m = 1_000_000
    env = sample_environment(theta, Window(1, 1000, 1, 1000), 424242)
    inv = np.exp(-env.log_weights.ravel())
    se = inv.std(ddof=1) / math.sqrt(m)
    assert abs(inv.mean() - theta) < 4.0 * se


def test_log_weight_mean_matches_digamma():
    # E[log d] = -E[log G] = -digamma(theta).
    theta = 1.5
    env = sample_environment(theta, Window(1, 500, 1, 500), 90210)
    vals = env.log_weights.ravel()
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() + digamma(theta)) < 4.0 * se


def test_log_weight_variance_matches_trigamma():
    # Var[log d] = trigamma(theta); agreement within 10% at 1e5 draws.
    theta = 1.5
    env = sample_environment(theta, Window(1, 500, 1, 200), 777)
    v = env.log_weights.ravel().var(ddof=1)
    assert abs(v - trigamma(theta)) < 0.10 * trigamma(theta)


def _tiny_env() -> Environment:
    return sample_environment(1.25, Window(1, 4, 1, 3), 99)


def test_reverse_environment_single_cell_is_fixed_point():
    env = sample_environment(1.0, Window(1, 1, 1, 1), 3)
    rev = reverse_environment(env, 1, 1)
    assert rev.log_weights[0, 0] == env.log_weights[0, 0]


def test_reverse_environment_is_an_involution():
    env = _tiny_env()
    back = reverse_environment(reverse_environment(env, 4, 3), 4, 3)
    assert np.array_equal(back.log_weights, env.log_weights)


def test_reverse_environment_maps_corners():
    env = _tiny_env()
    rev = reverse_environment(env, 4, 3)
    # Cell (1, 1) of the reversed grid reads cell (4, 3) of the original.
    assert rev.log_weight(1, 1) == env.log_weight(4, 3)
    assert rev.log_weight(4, 3) == env.log_weight(1, 1)
    assert rev.log_weight(2, 1) == env.log_weight(3, 3)


def test_reverse_environment_requires_covering_window():
    env = _tiny_env()
    with pytest.raises(ValueError):
        reverse_environment(env, 5, 3)


def test_save_load_round_trip_is_bit_exact(tmp_path):
    env = sample_environment(0.8, Window(2, 9, 1, 6), 1234)
    path = tmp_path / "grid.lgenv"
    save_environment(env, path)
    loaded = load_environment(path)
    assert loaded.theta == env.theta
    assert loaded.window == env.window
    assert loaded.seed == env.seed
    assert np.array_equal(loaded.log_weights, env.log_weights)
    assert fingerprint(loaded) == fingerprint(env)


def test_load_rejects_truncated_file(tmp_path):
    env = sample_environment(1.0, Window(1, 5, 1, 4), 8)
    path = tmp_path / "grid.lgenv"
    save_environment(env, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-9])
    with pytest.raises(EnvFileError):
        load_environment(path)


def test_load_rejects_trailing_garbage(tmp_path):
    env = sample_environment(1.0, Window(1, 5, 1, 4), 8)
    path = tmp_path / "grid.lgenv"
    save_environment(env, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(EnvFileError):
        load_environment(path)


def test_load_rejects_unknown_version(tmp_path):
    env = sample_environment(1.0, Window(1, 3, 1, 2), 8)
    path = tmp_path / "grid.lgenv"
    save_environment(env, path)
    raw = bytearray(path.read_bytes())
    # Bump the little-endian u16 version field just after the 8-byte magic.
    (version,) = struct.unpack_from("<H", raw, 8)
    struct.pack_into("<H", raw, 8, version + 1)
    path.write_bytes(bytes(raw))
    with pytest.raises(EnvVersionError):
        load_environment(path)


def test_load_rejects_bad_magic(tmp_path):
    env = sample_environment(1.0, Window(1, 3, 1, 2), 8)
    path = tmp_path / "grid.lgenv"
    save_environment(env, path)
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(EnvFileError):
        load_environment(path)


def test_version_error_is_a_file_error():
    assert issubclass(EnvVersionError, EnvFileError)
    assert issubclass(EnvFileError, ValueError)
    assert issubclass(CapacityError, RuntimeError)


def test_fingerprint_depends_on_contents():
    a = sample_environment(1.0, Window(1, 4, 1, 4), 1)
    b = sample_environment(1.0, Window(1, 4, 1, 4), 2)
    c = sample_environment(1.1, Window(1, 4, 1, 4), 1)
    assert fingerprint(a) != fingerprint(b)
    assert fingerprint(a) != fingerprint(c)
    assert fingerprint(a) == fingerprint(a)
