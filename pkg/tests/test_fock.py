import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln

from bitbell import fock
from bitbell.errors import CutoffExceeded
from bitbell.fock import FockCutoff, JointDistribution

DATA = Path(__file__).parent / "data"


def tmsv_amp(r, n):
    return math.tanh(r) ** n / math.cosh(r)


def displacement_reference(alpha, dim):
    """<m|D(alpha)|n> from the associated Laguerre closed form."""
    out = np.zeros((dim, dim), dtype=complex)
    x = abs(alpha) ** 2
    for m in range(dim):
        for n in range(dim):
            lo, hi = min(m, n), max(m, n)
            mag = np.exp(0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) - x / 2)
            lag = eval_genlaguerre(lo, hi - lo, x)
            if m >= n:
                out[m, n] = mag * alpha ** (m - n) * lag
            else:
                out[m, n] = mag * (-np.conj(alpha)) ** (n - m) * lag
    return out


class TestVacuum:
    @pytest.mark.parametrize("n_max", [1, 4, 32])
    def test_single_unit_entry(self, n_max):
        state = fock.vacuum(FockCutoff(n_max))
        assert state.amps.shape == (n_max + 1, n_max + 1)
        assert state.amps[0, 0] == 1
        assert np.count_nonzero(state.amps) == 1
        assert state.norm == pytest.approx(1.0)

    def test_distribution(self):
        dist = fock.joint_distribution(fock.vacuum(FockCutoff(4)))
        assert dist.probs[0, 0] == 1.0
        assert dist.tail_mass == 0.0

    def test_amplitudes_are_read_only(self):
        state = fock.vacuum(FockCutoff(4))
        with pytest.raises(ValueError):
            state.amps[0, 0] = 0.5


class TestCutoff:
    def test_invalid_n_max(self):
        with pytest.raises(ValueError):
            FockCutoff(0)

    def test_dim_includes_guard(self):
        assert FockCutoff(32, 16).dim == 49

    def test_distribution_rejects_negative(self):
        probs = np.zeros((2, 2))
        probs[0, 0], probs[1, 1] = 1.5, -0.5
        with pytest.raises(ValueError):
            JointDistribution(probs, 0.0)

    def test_distribution_rejects_lost_mass(self):
        probs = np.zeros((2, 2))
        probs[0, 0] = 0.5
        with pytest.raises(ValueError):
            JointDistribution(probs, 0.0)

    def test_cap_raises(self):
        # tanh(2)**(2n) stays above 1e-30 well past the cap
        with pytest.raises(CutoffExceeded):
            fock.tmsv(2.0, eps_tail=1e-30)


class TestTwoModeSqueeze:
    @pytest.mark.parametrize("r", [0.3, 0.5, 1.0, 1.5])
    def test_tmsv_amplitudes(self, r):
        state = fock.tmsv(r)
        n = np.arange(state.n_max + 1)
        expected = np.diag([tmsv_amp(r, k) for k in n])
        assert np.max(np.abs(state.amps - expected)) < 1e-10

    @pytest.mark.parametrize("r", [0.5, 1.5])
    def test_diagonal(self, r):
        amps = np.abs(fock.tmsv(r).amps)
        np.fill_diagonal(amps, 0.0)
        assert amps.max() < 1e-12

    def test_zero_is_identity(self):
        state = fock.vacuum()
        assert fock.apply_two_mode_squeeze(state, 0.0) is state

    def test_inverse(self):
        state = fock.tmsv(0.5, FockCutoff(64), eps_tail=None)
        back = fock.apply_two_mode_squeeze(state, -0.5, eps_tail=None)
        expected = np.zeros_like(back.amps)
        expected[0, 0] = 1
        assert np.max(np.abs(back.amps - expected)) < 1e-10

    def test_distribution_tmsv_r1(self):
        dist = fock.joint_distribution(fock.tmsv(1.0))
        n = np.arange(dist.n_max + 1)
        assert np.allclose(np.diag(dist.probs), np.tanh(1.0) ** (2 * n) / np.cosh(1.0) ** 2, atol=1e-12)
        off = dist.probs - np.diag(np.diag(dist.probs))
        assert off.max() == 0.0


class TestDisplacement:
    @pytest.mark.parametrize("alpha", [0.3, -1.2, 0.5 + 0.7j, 2.0])
    @pytest.mark.parametrize("mode", [1, 2])
    def test_vacuum_overlap(self, alpha, mode):
        state = fock.apply_displacement(fock.vacuum(), mode, alpha)
        assert abs(state.amps[0, 0]) ** 2 == pytest.approx(math.exp(-abs(alpha) ** 2), abs=1e-12)

    def test_zero_is_identity(self):
        state = fock.tmsv(0.5)
        assert fock.apply_displacement(state, 1, 0) is state

    @pytest.mark.parametrize("alpha", [0.3, 1.0 - 0.5j, 2.5, 4.0])
    def test_matches_laguerre_closed_form(self, alpha):
        dim = 49
        ref = displacement_reference(alpha, dim)
        got = fock._displacement_matrix(complex(alpha), dim)
        assert np.max(np.abs(got - ref)) < 1e-8

    def test_golden_grid(self):
        golden = np.load(DATA / "displaced_r0.5_a0.3.npz")
        state = fock.apply_displacement(fock.tmsv(0.5, FockCutoff(32)), 1, 0.3)
        assert state.amps.shape == golden["amps"].shape
        assert np.max(np.abs(state.amps - golden["amps"])) < 1e-13

    def test_locals_commute(self):
        base = fock.tmsv(0.7)
        one = fock.apply_displacement(fock.apply_displacement(base, 1, 0.4), 2, -0.6j)
        two = fock.apply_displacement(fock.apply_displacement(base, 2, -0.6j), 1, 0.4)
        side = min(one.n_max, two.n_max) + 1
        assert np.max(np.abs(one.amps[:side, :side] - two.amps[:side, :side])) < 1e-12

    def test_inverse(self):
        state = fock.tmsv(0.5, FockCutoff(64), eps_tail=None)
        there = fock.apply_displacement(state, 2, 0.8 - 0.3j, eps_tail=None)
        back = fock.apply_displacement(there, 2, -(0.8 - 0.3j), eps_tail=None)
        side = state.n_max + 1
        assert np.max(np.abs(back.amps[:side, :side] - state.amps)) < 1e-10

    @pytest.mark.parametrize("bad", [5.0, float("nan")])
    def test_rejects_out_of_range(self, bad):
        with pytest.raises(ValueError):
            fock.apply_displacement(fock.vacuum(), 1, bad)

    def test_rejects_bad_mode(self):
        with pytest.raises(ValueError):
            fock.apply_displacement(fock.vacuum(), 3, 0.1)


class TestSingleModeSqueeze:
    def test_zero_is_identity(self):
        state = fock.tmsv(0.5)
        assert fock.apply_single_mode_squeeze(state, 2, 0.0) is state

    @pytest.mark.parametrize("mode", [1, 2])
    def test_odd_levels_vanish(self, mode):
        amps = fock.apply_single_mode_squeeze(fock.vacuum(), mode, 0.4).amps
        column = amps[:, 0] if mode == 1 else amps[0, :]
        assert np.max(np.abs(column[1::2])) < 1e-15
        assert abs(column[0]) == pytest.approx(1 / math.sqrt(math.cosh(0.4)), abs=1e-12)

    def test_inverse(self):
        # the squeezed intermediate still carries ~5e-10 amplitude at level 64
        state = fock.tmsv(0.5, FockCutoff(128), eps_tail=None)
        there = fock.apply_single_mode_squeeze(state, 1, 0.4, eps_tail=None)
        back = fock.apply_single_mode_squeeze(there, 1, -0.4, eps_tail=None)
        side = state.n_max + 1
        assert np.max(np.abs(back.amps[:side, :side] - state.amps)) < 1e-10

    @pytest.mark.parametrize("r, rp, rm", [(0.5, 0.3, -0.3), (1.0, 0.5, 0.2), (1.25, -0.4, 0.4)])
    def test_parity_selection(self, r, rp, rm):
        state = fock.apply_single_mode_squeeze(
            fock.apply_single_mode_squeeze(fock.tmsv(r), 1, rp), 2, rm
        )
        n = np.arange(state.n_max + 1)
        odd = (n[:, None] + n[None, :]) % 2 == 1
        assert np.max(np.abs(state.amps[odd])) < 1e-12

    @pytest.mark.parametrize("r", [0.4, 1.0, -1.5])
    def test_padding_matches_larger_space(self, r):
        dim = 49
        a = fock.lowering(1200)
        a2 = a @ a
        ref = expm(0.5 * r * (a2 - a2.T))[:dim, :dim]
        assert np.max(np.abs(fock._squeeze_matrix(r, dim) - ref)) < 1e-12

    def test_golden_grid(self):
        golden = np.load(DATA / "squeezed_r0.5_p0.3_m-0.3.npz")
        state = fock.apply_single_mode_squeeze(fock.tmsv(0.5, FockCutoff(32)), 1, 0.3)
        state = fock.apply_single_mode_squeeze(state, 2, -0.3)
        assert np.max(np.abs(state.amps - golden["amps"])) < 1e-13


class TestTail:
    def test_vacuum(self):
        assert fock.tail_bound(fock.vacuum(FockCutoff(8)), 4) == 0.0

    @pytest.mark.parametrize("r, k", [(0.5, 4), (1.0, 8), (1.5, 4)])
    def test_tmsv_geometric(self, r, k):
        state = fock.tmsv(r, FockCutoff(64), eps_tail=None)
        n = np.arange(64 - k + 1, 65)
        expected = np.sum(np.tanh(r) ** (2 * n) / np.cosh(r) ** 2)
        assert fock.tail_bound(state, k) == pytest.approx(expected, rel=1e-6, abs=1e-16)

    def test_fixed_64_is_not_enough_for_r15_alpha1(self):
        # edge mass at n_max = 64, also obtained from the closed-form grid
        from bitbell import analytic

        state = fock.apply_displacement(fock.tmsv(1.5, FockCutoff(64), eps_tail=None), 1, 1.0, eps_tail=None)
        dist = analytic.displaced_distribution(1.5, 1.0, 0.0, 64, eps_tail=None)
        assert fock.tail_bound(state, 4) == pytest.approx(fock.tail_bound(dist, 4), rel=1e-3)
        assert fock.tail_bound(state, 4) == pytest.approx(1.4226e-5, rel=1e-3)

    def test_adaptive_rule_meets_budget(self):
        state = fock.apply_displacement(fock.tmsv(1.5), 1, 1.0)
        assert fock.budget(state) <= fock.EPS_TAIL
        assert state.n_max in (128, 256)

    def test_growth_replays_history(self):
        # growing mid-sequence must not lose what an earlier step pushed past the edge
        grown = fock.apply_displacement(fock.tmsv(1.0), 1, 1.5)
        direct = fock.apply_displacement(
            fock.tmsv(1.0, FockCutoff(grown.n_max), eps_tail=None), 1, 1.5, eps_tail=None
        )
        assert np.max(np.abs(grown.amps - direct.amps)) < 1e-14

    def test_band_bounds(self):
        state = fock.vacuum(FockCutoff(8))
        with pytest.raises(ValueError):
            fock.tail_bound(state, 9)


@settings(max_examples=25, deadline=None)
@given(
    r=st.floats(0.0, 1.0),
    alpha=st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False),
    mode=st.sampled_from([1, 2]),
)
def test_norm_accounting(r, alpha, mode):
    before = fock.tmsv(r)
    after = fock.apply_displacement(before, mode, alpha)
    assert abs(after.norm + after.tail_mass - 1.0) < 1e-9
    assert fock.budget(after) <= fock.EPS_TAIL
    assert after.n_max >= before.n_max


@settings(max_examples=25, deadline=None)
@given(
    r=st.floats(0.0, 1.5),
    alpha=st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False),
    squeeze=st.floats(-1.0, 1.0),
    mode=st.sampled_from([1, 2]),
)
def test_unitarity_at_fixed_cutoff(r, alpha, squeeze, mode):
    # without growth the tail can only rise, and it must absorb every norm change
    before = fock.tmsv(r, FockCutoff(48), eps_tail=None)
    for op in (
        lambda s: fock.apply_displacement(s, mode, alpha, eps_tail=None),
        lambda s: fock.apply_single_mode_squeeze(s, mode, squeeze, eps_tail=None),
    ):
        after = op(before)
        assert abs(after.norm - before.norm) <= (after.tail_mass - before.tail_mass) + 1e-12
        before = after
