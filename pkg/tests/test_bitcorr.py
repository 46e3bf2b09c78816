import numpy as np
import pytest

from bitbell import bitcorr, fock
from bitbell.fock import FockCutoff, JointDistribution


def random_distribution(rng, size=12, tail=0.0):
    probs = rng.random((size, size))
    probs *= (1.0 - tail) / probs.sum()
    return JointDistribution(probs, tail)


def loop_correlator(probs, y):
    """Plain double loop, reading bits from the binary string."""
    total = 0.0
    for n1 in range(probs.shape[0]):
        for n2 in range(probs.shape[1]):
            b1 = int(bin(n1)[2:].zfill(8)[-y])
            b2 = int(bin(n2)[2:].zfill(8)[-y])
            total += probs[n1, n2] * (-1) ** (b1 + b2)
    return total


class TestBit:
    @pytest.mark.parametrize(
        "n, y, expected",
        [(0, 1, 0), (1, 1, 1), (2, 1, 0), (2, 2, 1), (5, 2, 0), (6, 2, 1), (4, 3, 1), (11, 3, 0), (8, 4, 1)],
    )
    def test_values(self, n, y, expected):
        assert bitcorr.bit(n, y) == expected

    def test_vectorised(self):
        n = np.arange(8)
        assert list(bitcorr.bit(n, 2)) == [0, 0, 1, 1, 0, 0, 1, 1]
        assert list(bitcorr.bit_sign(n, 1)) == [1, -1] * 4

    @pytest.mark.parametrize("y", [0, -1, 1.5])
    def test_rejects_bad_index(self, y):
        with pytest.raises(ValueError):
            bitcorr.bit(3, y)

    def test_rejects_negative_occupation(self):
        with pytest.raises(ValueError):
            bitcorr.bit(np.array([1, -2]), 1)


class TestCorrelator:
    def test_vacuum_is_one(self):
        dist = fock.joint_distribution(fock.vacuum(FockCutoff(8)))
        for y in (1, 2, 3):
            assert bitcorr.correlator(dist, y) == (1.0, 0.0)

    def test_tmsv_is_perfectly_correlated(self):
        dist = fock.joint_distribution(fock.tmsv(1.0))
        for y in (1, 2, 3):
            value, err = bitcorr.correlator(dist, y)
            assert value == pytest.approx(1.0 - dist.tail_mass, abs=1e-15)
            assert err == 2 * dist.tail_mass

    def test_anticorrelated_point_mass(self):
        probs = np.zeros((4, 4))
        probs[1, 2] = 1.0
        dist = JointDistribution(probs, 0.0)
        assert bitcorr.correlator(dist, 1)[0] == -1.0
        assert bitcorr.correlator(dist, 2)[0] == -1.0

    def test_error_is_twice_tail(self):
        dist = random_distribution(np.random.default_rng(3), tail=1e-6)
        assert bitcorr.correlator(dist, 2)[1] == pytest.approx(2e-6)

    def test_max_bit(self):
        dist = fock.joint_distribution(fock.vacuum(FockCutoff(8)))
        with pytest.raises(ValueError):
            bitcorr.correlator(dist, 4, max_bit=3)

    @pytest.mark.parametrize("y", [1, 2, 3])
    def test_matches_loop(self, y):
        dist = random_distribution(np.random.default_rng(11), size=16)
        assert bitcorr.correlator(dist, y)[0] == pytest.approx(loop_correlator(dist.probs, y), abs=1e-14)

    def test_flipping_the_encoding_leaves_e_unchanged(self):
        # (-1)**(b1 + b2) is invariant under b -> 1 - b on both sides
        dist = random_distribution(np.random.default_rng(5), size=16)
        n = np.arange(16)
        flipped = 1 - 2 * (1 - bitcorr.bit(n, 2))
        assert flipped @ dist.probs @ flipped == pytest.approx(bitcorr.correlator(dist, 2)[0], abs=1e-15)

    @pytest.mark.parametrize("y", [1, 2, 3])
    def test_displaced_example_against_brute_force(self, y):
        state = fock.apply_displacement(fock.tmsv(0.5), 2, 0.5)
        dist = fock.joint_distribution(state)
        assert bitcorr.correlator(dist, y)[0] == pytest.approx(loop_correlator(dist.probs, y), abs=1e-13)


class TestPartitionForms:
    @pytest.mark.parametrize("seed", range(100))
    def test_equivalence(self, seed):
        dist = random_distribution(np.random.default_rng(seed))
        assert abs(bitcorr.correlator_partition_y2(dist) - bitcorr.correlator(dist, 2)[0]) <= 1e-12
        assert abs(bitcorr.correlator_partition_y3(dist) - bitcorr.correlator(dist, 3)[0]) <= 1e-12

    @pytest.mark.parametrize("size", [5, 13])
    def test_ragged_block_edges(self, size):
        dist = random_distribution(np.random.default_rng(size), size=size)
        assert bitcorr.correlator_partition_y3(dist) == pytest.approx(bitcorr.correlator(dist, 3)[0], abs=1e-12)
