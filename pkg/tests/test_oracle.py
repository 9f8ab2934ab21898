"""Oracle accounting and the label/same-cluster emulations."""

import numpy as np
import pytest

from marginrec.oracle import (
    Clustering,
    LabelOracle,
    label_via_scq,
    recover_via_scq,
    scq_via_labels,
)


def _toy_oracle():
    labels = np.array([1, 1, 2, 3, 2, 1])
    return LabelOracle(Clustering(labels=labels, k=3))


class TestClustering:
    def test_validation(self):
        with pytest.raises(ValueError):
            Clustering(labels=np.array([0, 1]), k=2)
        with pytest.raises(ValueError):
            Clustering(labels=np.array([1, 4]), k=3)
        with pytest.raises(ValueError):
            Clustering(labels=np.array([1, 1]), k=0)

    def test_empty_clusters_allowed(self):
        c = Clustering(labels=np.array([1, 1, 3]), k=3)
        assert c.sizes().tolist() == [2, 0, 1]

    def test_permutation_equivalence(self):
        a = Clustering(labels=np.array([1, 1, 2, 3]), k=3)
        b = Clustering(labels=np.array([2, 2, 3, 1]), k=3)
        c = Clustering(labels=np.array([1, 2, 2, 3]), k=3)
        assert a.same_up_to_permutation(b)
        assert not a.same_up_to_permutation(c)


class TestLabelOracle:
    def test_label_query_counts(self):
        o = _toy_oracle()
        assert o.label_query(0) == 1
        assert o.label_query(0) == 1
        assert o.label_queries == 2
        assert o.scq_queries == 0

    def test_exhaustive_recovery(self):
        o = _toy_oracle()
        got = np.array([o.label_query(i) for i in range(o.n)])
        assert np.array_equal(got, o.audit_labels)
        assert o.label_queries == o.n

    def test_scq_semantics(self):
        o = _toy_oracle()
        assert o.same_cluster_query(0, 0)
        assert o.same_cluster_query(0, 1)
        assert not o.same_cluster_query(0, 2)
        assert o.same_cluster_query(2, 4)
        assert o.scq_queries == 4

    def test_scq_symmetric(self):
        o = _toy_oracle()
        gen = np.random.default_rng(0)
        for _ in range(20):
            x, y = gen.integers(o.n, size=2)
            assert o.same_cluster_query(int(x), int(y)) == \
                o.same_cluster_query(int(y), int(x))

    def test_invalid_index(self):
        o = _toy_oracle()
        with pytest.raises(IndexError):
            o.label_query(99)
        with pytest.raises(IndexError):
            o.same_cluster_query(0, -7)

    def test_audit_does_not_count(self):
        o = _toy_oracle()
        _ = o.audit_labels
        assert o.label_queries == 0 and o.scq_queries == 0

    def test_matches_generator_labels(self):
        from marginrec.instances import gen_convex_margin
        from marginrec.sampling import RandomSource
        inst = gen_convex_margin(2, 3, 60, 1.0, RandomSource(4))
        o = LabelOracle(inst.truth)
        gen = np.random.default_rng(1)
        for _ in range(100):
            i = int(gen.integers(inst.n))
            assert o.label_query(i) == inst.truth.labels[i]


class TestEmulation:
    def test_scq_via_labels_costs_two(self):
        o = _toy_oracle()
        assert scq_via_labels(o, 0, 1)
        assert o.label_queries == 2
        assert not scq_via_labels(o, 0, 2)
        assert o.label_queries == 4

    def test_label_via_scq_worst_case_k(self):
        o = _toy_oracle()
        reps = [0, 2, 3]  # one representative per recovered id
        got = label_via_scq(o, 3, reps)  # matches the last representative
        assert got == 3
        assert o.scq_queries == 3

    def test_label_via_scq_new_cluster(self):
        o = _toy_oracle()
        got = label_via_scq(o, 3, [0, 2])
        assert got == 3
        assert o.scq_queries == 2

    def test_full_scq_recovery_matches_up_to_permutation(self):
        from marginrec.instances import gen_convex_margin
        from marginrec.sampling import RandomSource
        inst = gen_convex_margin(2, 3, 40, 1.0, RandomSource(6))
        o1 = LabelOracle(inst.truth)
        via_scq = recover_via_scq(inst.n, o1)
        o2 = LabelOracle(inst.truth)
        via_labels = Clustering(
            labels=np.array([o2.label_query(i) for i in range(inst.n)]), k=3)
        assert via_scq.same_up_to_permutation(via_labels)
        assert o1.scq_queries <= inst.truth.k * inst.n
        assert o1.label_queries == 0
