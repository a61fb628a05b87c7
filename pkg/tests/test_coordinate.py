"""Tests for the coordinate-filter loop and the end-to-end link."""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from coordinate import (coordinate, coordination_step, draw_user_channels, end_to_end_transmit,
                        equivalent_channel, initial_receive_filters, multiuser_interference,
                        run_coordination, run_coordination_zf, update_receive_filters,
                        zf_precoder)
from models import Algorithm, ConfigError, CoordinateConfig, parse_scenario
from numerics import RankDeficient, off_diagonal_frobenius
from sigproc import NoiseModel, RngStream, StreamPurpose, map_bits, random_bits
from thp import ThpVariant

ALGORITHMS = list(Algorithm)


def channels(sc, seed=0):
    return draw_user_channels(sc, RngStream(seed, StreamPurpose.CHANNEL))


def random_frames(sc, n_frames, seed=0):
    c = sc.constellation
    bits = random_bits(n_frames * sc.r * c.bits_per_symbol, RngStream(seed, StreamPurpose.BITS))
    return bits, map_bits(bits, c)


class TestReceiveFilters:
    def test_identity_init(self, overloaded):
        W = initial_receive_filters(overloaded, "identity")
        assert all(np.array_equal(W_k, np.eye(2, 3)) for W_k in W)

    def test_gaussian_init_orthonormal_rows(self, overloaded):
        W = initial_receive_filters(overloaded, "gaussian-orthonormalized", RngStream(1))
        for W_k in W:
            assert W_k.shape == (2, 3)
            assert_allclose(W_k @ W_k.conj().T, np.eye(2), atol=1e-12)

    def test_gaussian_init_needs_rng(self, overloaded):
        with pytest.raises(ValueError):
            initial_receive_filters(overloaded, "gaussian-orthonormalized")

    def test_update_normalizes_rows(self, overloaded):
        H = channels(overloaded)
        W = initial_receive_filters(overloaded, "identity")
        P = zf_precoder(equivalent_channel(W, H), overloaded.xi)
        for W_k in update_receive_filters(H, P, overloaded):
            assert_allclose(np.linalg.norm(W_k, axis=1), 1.0)

    def test_zf_precoder_power(self, cgauss):
        P = zf_precoder(cgauss(4, 8), xi=4.0)
        assert_allclose(np.linalg.norm(P, axis=0), 1.0)
        assert np.sum(np.abs(P) ** 2) == pytest.approx(4.0)


class TestRunCoordination:
    @pytest.mark.parametrize("algorithm", ALGORITHMS)
    def test_square_case_converges_immediately(self, square, identity_cfg, algorithm):
        state = coordinate(channels(square, 3), identity_cfg, algorithm, square)
        assert state.iterations_used == 1
        assert state.converged
        assert state.residual_mui < 1e-10

    @pytest.mark.parametrize("algorithm", ALGORITHMS)
    def test_square_case_is_fixed_point(self, square, identity_cfg, algorithm):
        H = channels(square, 4)
        state = coordinate(H, identity_cfg, algorithm, square)
        *_, mui = coordination_step(H, state.W, algorithm, square)
        assert abs(mui - state.residual_mui) < 10 * identity_cfg.epsilon

    def test_state_shapes(self, overloaded):
        state = run_coordination(channels(overloaded), CoordinateConfig(), ThpVariant.DTHP,
                                 overloaded, RngStream(2))
        assert state.H_e.shape == (8, 8)
        assert state.P_e.shape == (8, 8)
        assert len(state.W) == 4 and all(W_k.shape == (2, 3) for W_k in state.W)
        assert 1 <= state.iterations_used <= 50
        assert len(state.history) == state.iterations_used
        assert state.residual_mui == state.history[-1]
        assert state.converged == (state.residual_mui < 1e-5)
        assert state.residual_mui == pytest.approx(
            multiuser_interference(state.H_e @ state.P_e, overloaded), rel=1e-9, abs=1e-14)
        assert state.tx_precoder.shape == (8, 8)
        for W_k in state.W:
            assert_allclose(np.linalg.norm(W_k, axis=1), 1.0)

    def test_iteration_cap_flags_unconverged(self, overloaded):
        cfg = CoordinateConfig(epsilon=1e-300, max_iters=3)
        state = run_coordination_zf(channels(overloaded), cfg, overloaded, RngStream(2))
        assert state.iterations_used == 3
        assert not state.converged

    @pytest.mark.parametrize("algorithm", ALGORITHMS)
    def test_overloaded_draws_converge(self, overloaded, algorithm):
        cfg = CoordinateConfig()
        states = [coordinate(channels(overloaded, seed), cfg, algorithm, overloaded, RngStream(seed))
                  for seed in range(10)]
        converged = [s for s in states if s.converged]
        assert len(converged) >= 8
        for s in converged:
            assert s.iterations_used <= 50
            assert s.residual_mui < 1e-5

    def test_converged_overloaded_draws_are_stable(self, overloaded):
        cfg = CoordinateConfig()
        checked = 0
        for seed in range(5):
            H = channels(overloaded, seed)
            state = run_coordination(H, cfg, ThpVariant.DTHP, overloaded, RngStream(seed))
            if not state.converged:
                continue
            *_, mui = coordination_step(H, state.W, Algorithm.DTHP, overloaded)
            assert abs(mui - state.residual_mui) < 10 * cfg.epsilon
            checked += 1
        assert checked >= 3

    def test_transmit_precoder_diagonalizes(self, overloaded):
        state = coordinate(channels(overloaded, 3), CoordinateConfig(), Algorithm.ZF, overloaded,
                           RngStream(3))
        assert off_diagonal_frobenius(state.effective_channel) < 1e-9

    def test_same_seed_same_state(self, overloaded):
        H = channels(overloaded)
        a = run_coordination(H, CoordinateConfig(), ThpVariant.CTHP, overloaded, RngStream(8))
        b = run_coordination(H, CoordinateConfig(), ThpVariant.CTHP, overloaded, RngStream(8))
        assert a.history == b.history
        assert_array_equal(a.P_e, b.P_e)

    def test_thp_variants_share_receive_filters(self, overloaded):
        # positive column scaling of P_e disappears in the row normalization of W
        cfg = CoordinateConfig(init_mode="identity", max_iters=3)
        H = channels(overloaded, 6)
        states = [coordinate(H, cfg, a, overloaded) for a in ALGORITHMS]
        for other in states[1:]:
            for W_a, W_b in zip(states[0].W, other.W):
                assert_allclose(W_a, W_b, atol=1e-8)

    def test_zero_channel_is_rank_deficient(self, overloaded):
        H = [np.zeros((3, 8)) for _ in range(4)]
        with pytest.raises(RankDeficient):
            run_coordination(H, CoordinateConfig(), ThpVariant.DTHP, overloaded, RngStream(0))

    def test_channel_shape_checked(self, overloaded):
        with pytest.raises(ConfigError):
            run_coordination_zf([np.ones((3, 8))] * 3, CoordinateConfig(), overloaded, RngStream(0))

    def test_stacked_channel_accepted(self, overloaded, identity_cfg):
        H = channels(overloaded)
        a = coordinate(np.vstack(H), identity_cfg, Algorithm.DTHP, overloaded)
        b = coordinate(H, identity_cfg, Algorithm.DTHP, overloaded)
        assert_array_equal(a.H_e, b.H_e)


class TestEndToEnd:
    @pytest.mark.parametrize("algorithm", ALGORITHMS)
    def test_noiseless_loopback(self, overloaded, algorithm):
        state = coordinate(channels(overloaded, 1), CoordinateConfig(), algorithm, overloaded,
                           RngStream(1))
        bits, frame = random_frames(overloaded, 1000)
        assert_array_equal(end_to_end_transmit(state, frame), bits)

    def test_noiseless_loopback_16qam(self, identity_cfg):
        sc = parse_scenario("3,3,3,3x8", streams="2,2,2,2", modulation="16qam")
        state = coordinate(channels(sc, 2), identity_cfg, Algorithm.CTHP, sc)
        bits, frame = random_frames(sc, 200)
        assert_array_equal(end_to_end_transmit(state, frame), bits)

    @pytest.mark.parametrize("algorithm", ALGORITHMS)
    def test_huge_noise_is_a_coin_flip(self, overloaded, identity_cfg, algorithm):
        state = coordinate(channels(overloaded, 5), identity_cfg, algorithm, overloaded)
        bits, frame = random_frames(overloaded, 1000)
        detected = end_to_end_transmit(state, frame, NoiseModel(1e4), RngStream(5, StreamPurpose.NOISE))
        assert np.mean(detected != bits) == pytest.approx(0.5, abs=0.02)

    def test_same_noise_stream_same_bits(self, overloaded, identity_cfg):
        state = coordinate(channels(overloaded), identity_cfg, Algorithm.DTHP, overloaded)
        _, frame = random_frames(overloaded, 50)
        noise = NoiseModel(0.5)
        a = end_to_end_transmit(state, frame, noise, RngStream(4, StreamPurpose.NOISE))
        b = end_to_end_transmit(state, frame, noise, RngStream(4, StreamPurpose.NOISE))
        assert_array_equal(a, b)

    def test_partial_frame_rejected(self, overloaded, identity_cfg):
        state = coordinate(channels(overloaded), identity_cfg, Algorithm.ZF, overloaded)
        _, frame = random_frames(overloaded, 1)
        with pytest.raises(ValueError):
            end_to_end_transmit(state, map_bits(frame.bit_payload[:-2], overloaded.constellation))

    def test_noise_needs_rng(self, overloaded, identity_cfg):
        state = coordinate(channels(overloaded), identity_cfg, Algorithm.ZF, overloaded)
        _, frame = random_frames(overloaded, 1)
        with pytest.raises(ValueError):
            end_to_end_transmit(state, frame, NoiseModel(1.0))
