import numpy as np
import pytest

from predfix.errors import EmptyDataset, MaximaExceeded
from predfix.features import build_triplets, dataset_maxima
from predfix.seriesio import InstanceSeries

from .test_milp import make_instance


def wrap(*instances):
    return [InstanceSeries(series_id="s", instances=list(instances))]


class TestDatasetMaxima:
    def test_identity_matrix(self):
        inst = make_instance([1, 1, 1], np.eye(3), [1, 1, 1])
        assert dataset_maxima(wrap(inst)) == (1, 1)

    def test_dense_matrix(self):
        inst = make_instance([1, 1], np.ones((3, 2)), [1, 1, 1])
        assert dataset_maxima(wrap(inst)) == (3, 2)

    def test_mixed_sparsity_counted_by_hand(self):
        a = np.array([[1.0, 0.0, 2.0], [0.0, 3.0, 4.0], [0.0, 0.0, 5.0]])
        # column nonzeros: 1, 1, 3 -> m_c = 3; row nonzeros: 2, 2, 1 -> m_v = 2
        inst = make_instance([1, 1, 1], a, [1, 1, 1])
        assert dataset_maxima(wrap(inst)) == (3, 2)

    def test_empty_collection(self):
        with pytest.raises(EmptyDataset):
            dataset_maxima([])


class TestBuildTriplets:
    def test_padding_rule(self):
        # variable 0 appears in rows 1 and 3 of 5; with m_c = 3 the block is
        # [(a1, b1, c0), (a3, b3, c0), (0, 0, 0)]
        a = np.zeros((5, 2))
        a[1, 0] = 2.0
        a[3, 0] = -1.0
        a[0, 1] = 1.0
        inst = make_instance([5.0, 6.0], a, [1, 2, 3, 4, 5])
        trip = build_triplets(inst, m_c=3, m_v=2)
        np.testing.assert_allclose(
            trip.variable_triplets[0],
            [[2.0, 2.0, 5.0], [-1.0, 4.0, 5.0], [0.0, 0.0, 0.0]],
        )
        np.testing.assert_array_equal(trip.variable_mask[0], [1, 1, 0])

    def test_isolated_variable_fully_masked(self):
        a = np.zeros((2, 2))
        a[0, 0] = 1.0
        a[1, 0] = 1.0
        inst = make_instance([1.0, 1.0], a, [1, 1])
        trip = build_triplets(inst, m_c=2, m_v=1)
        np.testing.assert_array_equal(trip.variable_triplets[1], np.zeros((2, 3)))
        np.testing.assert_array_equal(trip.variable_mask[1], [0, 0])

    def test_dense_two_by_two_no_padding(self):
        inst = make_instance([1.0, 2.0], [[1, 2], [3, 4]], [5, 6])
        trip = build_triplets(inst, m_c=2, m_v=2)
        assert trip.variable_mask.all()
        assert trip.constraint_mask.all()
        np.testing.assert_allclose(
            trip.constraint_triplets[1], [[3.0, 6.0, 1.0], [4.0, 6.0, 2.0]]
        )

    def test_mask_sum_equals_nonzero_count(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(6, 5)) * (rng.random((6, 5)) < 0.5)
        inst = make_instance(rng.normal(size=5), a, rng.normal(size=6))
        m_c, m_v = dataset_maxima(wrap(inst))
        trip = build_triplets(inst, m_c, m_v)
        np.testing.assert_array_equal(
            trip.variable_mask.sum(axis=1), np.diff(inst.a.tocsc().indptr)
        )
        np.testing.assert_array_equal(
            trip.constraint_mask.sum(axis=1), np.diff(inst.a.tocsr().indptr)
        )

    def test_maxima_exceeded(self):
        inst = make_instance([1.0, 1.0], np.ones((3, 2)), [1, 1, 1])
        with pytest.raises(MaximaExceeded):
            build_triplets(inst, m_c=2, m_v=2)
        with pytest.raises(MaximaExceeded):
            build_triplets(inst, m_c=3, m_v=1)

    def test_constraint_permutation_permutes_triplet_multisets(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(4, 3)) * (rng.random((4, 3)) < 0.7)
        b = rng.normal(size=4)
        c = rng.normal(size=3)
        inst = make_instance(c, a, b)
        perm = rng.permutation(4)
        permuted = make_instance(c, a[perm], b[perm])
        m_c, m_v = dataset_maxima(wrap(inst))
        t1 = build_triplets(inst, m_c, m_v)
        t2 = build_triplets(permuted, m_c, m_v)
        for j in range(3):
            rows1 = {tuple(r) for r in t1.variable_triplets[j][t1.variable_mask[j] > 0]}
            rows2 = {tuple(r) for r in t2.variable_triplets[j][t2.variable_mask[j] > 0]}
            assert rows1 == rows2
        # symmetric aggregate (mean over unmasked rows) is unchanged
        agg1 = (t1.variable_triplets * t1.variable_mask[:, :, None]).sum(axis=1)
        agg2 = (t2.variable_triplets * t2.variable_mask[:, :, None]).sum(axis=1)
        np.testing.assert_allclose(agg1, agg2, atol=1e-12)
