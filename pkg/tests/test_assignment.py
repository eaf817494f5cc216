import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from straggler_cluster.assignment import (
    AssignmentMatrix,
    DeltaExceeded,
    PointUnrecoverable,
    RecoveryError,
    StragglerModel,
    best_effort_recovery,
    draw_stragglers,
    partition_assignment,
    property_frequency,
    random_assignment,
    recovery_vector,
    theorem_ell,
    theorem_pa,
    verify_property,
)

EQ1 = AssignmentMatrix([[1, 0, 1], [0, 1, 1]])


def test_random_assignment_full_and_deterministic():
    A = random_assignment(20, 4, 1.0, seed=3)
    assert A.entries.all()
    assert all(len(c) == 20 for c in A.node_lists)
    B1 = random_assignment(100, 10, 0.1, seed=42)
    B2 = random_assignment(100, 10, 0.1, seed=42)
    assert np.array_equal(B1.entries, B2.entries)


def test_full_scale_loads():
    for seed in range(30):
        A = random_assignment(5000, 10, 0.1, seed)
        assert abs(np.mean(A.loads) - 500) <= 50


@pytest.mark.parametrize("p_a", [0.0, -0.1, 1.5])
def test_random_assignment_rejects_bad_pa(p_a):
    with pytest.raises(ValueError):
        random_assignment(5, 2, p_a)


def test_theorem_ell_values():
    ell, gamma = theorem_ell(1.0, 0.0, 100)
    assert gamma == pytest.approx(1 / 3)
    assert ell == pytest.approx(54 * math.log(math.sqrt(2) * 100), rel=1e-12)
    assert ell == pytest.approx(267.4, abs=0.05)
    ell2, _ = theorem_ell(2.0, 0.5, 2)
    assert ell2 == pytest.approx(24 * math.log(2 * math.sqrt(2)) / 0.5, rel=1e-12)
    assert ell2 == pytest.approx(49.9, abs=0.05)
    assert theorem_pa(1.0, 0.0, 100, 10) == 1.0
    assert theorem_pa(1.0, 0.0, 100, 1000) == pytest.approx(ell / 1000)


def test_recovery_examples():
    rv = recovery_vector(AssignmentMatrix([[1, 1, 1]]), [0], 0.0)
    assert rv.b.tolist() == [1.0] and rv.a.tolist() == [1.0, 1.0, 1.0]
    rv = recovery_vector(EQ1, [0, 1], 1.0)
    assert rv.b.tolist() == [1.0, 1.0] and rv.a.tolist() == [1.0, 1.0, 2.0]
    assert rv.delta_achieved == 1.0
    with pytest.raises(DeltaExceeded):
        recovery_vector(EQ1, [0, 1], 0.5)
    with pytest.raises(PointUnrecoverable) as exc:
        recovery_vector(AssignmentMatrix([[1, 0], [1, 0]]), [0, 1], 5.0)
    assert exc.value.lost == (1,)


def test_verify_property_examples():
    ones = AssignmentMatrix(np.ones((1, 4)))
    assert verify_property(ones, [0], 0.0, [1.0])
    assert not verify_property(EQ1, [0, 1], 1.0, [-1.0, 1.0])
    assert verify_property(EQ1, [0, 1], 1.0, [1.0, 1.0])
    assert not verify_property(EQ1, [0, 1], 0.5, [1.0, 1.0])


def test_serialization_roundtrip():
    A = random_assignment(12, 4, 0.5, seed=1)
    assert np.array_equal(AssignmentMatrix.from_json(A.to_json()).entries, A.entries)
    assert set(json.loads(A.to_json())) == {"s", "n", "rows"}
    rv = recovery_vector(EQ1, [1, 0], 1.0)
    assert json.loads(rv.to_json()) == {"survivors": [0, 1], "b": [1.0, 1.0], "delta_achieved": 1.0}


def test_partition_assignment():
    for mode in ("random", "contiguous"):
        A = partition_assignment(23, 5, seed=4, mode=mode)
        assert np.all(A.entries.sum(axis=0) == 1)
        assert max(A.loads) - min(A.loads) <= 1
    assert partition_assignment(6, 3, mode="contiguous").node_lists[1].tolist() == [2, 3]
    with pytest.raises(ValueError):
        partition_assignment(5, 2, mode="bogus")


def test_straggler_examples():
    assert draw_stragglers(StragglerModel.random_iid(0.0, 9), 6) == ()
    assert draw_stragglers(StragglerModel.fixed_count(0, 9), 6) == ()
    assert draw_stragglers(StragglerModel.explicit([3, 1]), 6) == (1, 3)


def test_fixed_count_golden():
    assert draw_stragglers(StragglerModel.fixed_count(3, 2024), 10) == (0, 1, 6)


def test_straggler_errors():
    with pytest.raises(ValueError):
        draw_stragglers(StragglerModel.explicit(range(4)), 4)
    with pytest.raises(ValueError):
        draw_stragglers(StragglerModel.fixed_count(4), 4)
    with pytest.raises(ValueError):
        StragglerModel.random_iid(1.0)


def test_iid_always_leaves_a_survivor():
    for seed in range(200):
        assert len(draw_stragglers(StragglerModel.random_iid(0.95, seed), 2)) < 2


def test_property_frequency_extremes():
    assert property_frequency(30, 5, 1.0, StragglerModel.random_iid(0.5), 0.1, 50, seed=1) == 1.0
    assert property_frequency(30, 5, 0.0, StragglerModel.random_iid(0.5), 0.1, 50, seed=1) == 0.0


def test_property_frequency_bound_setting():
    p_a = theorem_pa(1.0, 0.2, 200, 20)
    assert property_frequency(200, 20, p_a, StragglerModel.random_iid(0.2), 1.0, 500, seed=0) >= 1 - 1 / 200


def test_best_effort_records_lost_points():
    A = AssignmentMatrix([[1, 0, 1, 0], [0, 0, 1, 1]])
    rv = best_effort_recovery(A, [0, 1])
    assert rv.lost == (1,)
    assert rv.b.tolist() == [1.0, 1.0]


matrices = st.tuples(st.integers(1, 6), st.integers(1, 10)).flatmap(
    lambda sn: arrays(bool, sn, elements=st.booleans()))


@given(matrices, st.sampled_from([0.0, 0.25, 0.5, 1.0, 3.0]), st.data())
def test_uniform_recovery_matches_column_oracle(entries, delta, data):
    A = AssignmentMatrix(entries)
    surv = data.draw(st.lists(st.integers(0, A.s - 1), min_size=1, unique=True))
    counts = [sum(int(entries[i, j]) for i in surv) for j in range(A.n)]
    expected = min(counts) >= 1 and max(counts) <= (1 + delta) * min(counts)
    try:
        rv = recovery_vector(A, surv, delta)
    except RecoveryError:
        assert not expected
        return
    assert expected
    assert verify_property(A, rv.survivors, delta, rv.b)
    assert rv.delta_achieved <= delta + 1e-12
    assert rv.delta_achieved == float(rv.a.max()) - 1.0
    assert np.array_equal(rv.a, rv.b @ entries[list(rv.survivors)].astype(float))
    # permutation invariance
    perm = recovery_vector(A, list(reversed(surv)), delta)
    assert perm.survivors == rv.survivors and np.array_equal(perm.a, rv.a)
    # monotone in delta
    assert recovery_vector(A, surv, delta + 1.0).survivors == rv.survivors
