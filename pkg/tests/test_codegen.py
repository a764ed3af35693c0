from itertools import permutations

import numpy as np
import pytest

from vdbcode import (
    CodeTable,
    ParameterError,
    SolverOptions,
    TailConstraint,
    constraint_lhs,
    sets_fast,
    solve_iid,
    solve_perbit,
    verify_table,
)
from vdbcode.codegen import (
    load_constraint,
    load_table,
    parse_constraint,
    parse_table,
    serialize_constraint,
    serialize_table,
)
from conftest import EXAMPLE_BOUNDS

REFERENCE_PERBIT = (0.4485, 0.4011, 0.2266)


# ---------------------------------------------------------------------------
# constraint_lhs


def test_lhs_matches_worked_polynomials():
    # m=1 at L=3,k=2: p(1-p)^2 + p^2(1-p); m=4: p_2(1-p_1)(1-p_0)
    for p in (0.1, 0.218, 0.5, 0.9):
        got = constraint_lhs({0b001, 0b011}, [p, p, p])
        want = p * (1 - p) ** 2 + p**2 * (1 - p)
        assert got == pytest.approx(want, abs=1e-15)
    p0, p1, p2 = 0.3, 0.5, 0.7
    assert constraint_lhs({0b100}, [p0, p1, p2]) == pytest.approx(
        p2 * (1 - p1) * (1 - p0), abs=1e-15
    )


def test_lhs_zero_probabilities():
    assert constraint_lhs({0b001, 0b011, 0b111}, [0.0, 0.0, 0.0]) == 0.0
    assert constraint_lhs(set(), [0.3, 0.4, 0.5]) == 0.0


def test_lhs_iid_specialization_many_random_tables():
    # all-equal p_vec must agree with the weight-grouped closed form
    rng = np.random.default_rng(7)
    for L, k in [(4, 2), (6, 3), (8, 4)]:
        ps = sets_fast(L, k)
        for _ in range(5):
            p = float(rng.random())
            for m, s in ps.sets.items():
                weights = {}
                for e in s:
                    w = bin(e).count("1")
                    weights[w] = weights.get(w, 0) + 1
                closed = sum(c * p**w * (1 - p) ** (L - w) for w, c in weights.items())
                assert abs(constraint_lhs(s, [p] * L) - closed) <= 1e-12


def test_lhs_total_over_all_weights_is_one():
    # the full mask space carries the whole product measure
    L = 6
    rng = np.random.default_rng(3)
    p_vec = rng.random(L)
    total = constraint_lhs(range(1 << L), p_vec)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_lhs_accuracy_against_fsum_oracle():
    import math

    rng = np.random.default_rng(5)
    L = 12
    p_vec = [float(v) for v in rng.random(L)]
    masks = [e for e in range(1 << L) if bin(e).count("1") <= 3]
    exact_terms = []
    for e in masks:
        term = 1.0
        for i in range(L):
            term *= p_vec[i] if (e >> i) & 1 else 1 - p_vec[i]
        exact_terms.append(term)
    assert abs(constraint_lhs(masks, p_vec) - math.fsum(exact_terms)) <= 1e-12


# ---------------------------------------------------------------------------
# solve_iid


def test_solve_iid_worked_example(example_sets, example_constraint):
    table = solve_iid(example_sets, example_constraint)
    assert table.p == pytest.approx(0.2180, abs=1e-3)
    assert table.mode == "iid"
    assert verify_table(example_sets, example_constraint, table).passed


def test_solve_iid_vacuous_constraint(example_sets):
    ones = TailConstraint.from_table(3, 2, {m: 1.0 for m in range(1, 7)})
    assert solve_iid(example_sets, ones).p == 1.0


def test_solve_iid_zero_bound(example_sets):
    zero = TailConstraint.from_table(3, 2, {1: 0.0})
    assert solve_iid(example_sets, zero).p == 0.0


def test_solve_iid_maximality_certificate(example_sets, example_constraint):
    opts = SolverOptions()
    table = solve_iid(example_sets, example_constraint, opts)
    hi = table.metadata["first_infeasible_p"]
    assert hi is not None and hi - table.p <= 4 * opts.tol
    bumped = CodeTable.iid(3, 2, hi)
    assert not verify_table(example_sets, example_constraint, bumped).passed


def test_solve_iid_maximality_randomized():
    rng = np.random.default_rng(11)
    ps = sets_fast(4, 2)
    opts = SolverOptions()
    for _ in range(10):
        bounds = {m: float(rng.uniform(0.05, 1.0)) for m in range(1, 13)}
        # enforce a nonincreasing staircase
        running = 1.0
        for m in sorted(bounds):
            running = min(running, bounds[m])
            bounds[m] = running
        c = TailConstraint.from_table(4, 2, bounds)
        table = solve_iid(ps, c, opts)
        assert verify_table(ps, c, table).passed
        hi = table.metadata["first_infeasible_p"]
        if table.p < 1.0:
            assert hi is not None and hi - table.p <= 4 * opts.tol
            assert not verify_table(ps, c, CodeTable.iid(4, 2, hi)).passed


def test_solve_iid_deterministic(example_sets, example_constraint):
    a = solve_iid(example_sets, example_constraint)
    b = solve_iid(example_sets, example_constraint)
    assert a.p == b.p and a.metadata == b.metadata


def test_solve_iid_rejects_mismatched_dimensions(example_constraint):
    with pytest.raises(ParameterError):
        solve_iid(sets_fast(4, 2), example_constraint)


def test_solvers_handle_empty_placement_sets():
    # at L=3, k=1 no single flip produces m=3, so S_3 is empty and its
    # constraint is vacuous
    sets = sets_fast(3, 1)
    assert sets.sets[3] == frozenset()
    c = TailConstraint.from_table(3, 1, {1: 0.3, 2: 0.3, 3: 0.0, 4: 0.3}, allow_nonmonotone=True)
    iid = solve_iid(sets, c)
    assert iid.p > 0  # the zero bound at the empty m=3 never binds
    perbit = solve_perbit(sets, c)
    assert verify_table(sets, c, perbit).passed


# ---------------------------------------------------------------------------
# solve_perbit


def test_reference_perbit_point_is_feasible(example_sets, example_constraint):
    table = CodeTable.perbit(3, 2, REFERENCE_PERBIT)
    report = verify_table(example_sets, example_constraint, table)
    assert report.passed
    assert report.worst >= -1e-3


def test_solve_perbit_feasible_and_certified(example_sets, example_constraint):
    table = solve_perbit(example_sets, example_constraint)
    assert verify_table(example_sets, example_constraint, table).passed
    assert all(c in ("blocked", "at-domain-boundary") for c in table.metadata["certificate"])


def test_solve_perbit_dominates_iid(example_sets, example_constraint):
    opts = SolverOptions()
    iid = solve_iid(example_sets, example_constraint, opts)
    perbit = solve_perbit(example_sets, example_constraint, opts)
    assert all(p >= iid.p - opts.tol for p in perbit.p_vec)


def test_solve_perbit_local_maximality(example_sets, example_constraint):
    opts = SolverOptions()
    table = solve_perbit(example_sets, example_constraint, opts)
    for i, p in enumerate(table.p_vec):
        if p >= 1.0:
            continue
        bumped = list(table.p_vec)
        bumped[i] = min(1.0, p + 4 * opts.tol)
        assert not verify_table(example_sets, example_constraint, CodeTable.perbit(3, 2, bumped)).passed


def test_solve_perbit_zero_bounds(sets_l3k3):
    zero = TailConstraint.from_table(3, 3, {1: 0.0})
    table = solve_perbit(sets_l3k3, zero)
    assert table.p_vec == (0.0, 0.0, 0.0)


def test_solve_perbit_deterministic(example_sets, example_constraint):
    a = solve_perbit(example_sets, example_constraint)
    b = solve_perbit(example_sets, example_constraint)
    assert a.p_vec == b.p_vec


def test_reported_l3k3_point_feasible_in_some_order(sets_l3k3, reciprocal_constraint):
    feasible = [
        perm
        for perm in permutations((0.25, 0.44, 0.31))
        if verify_table(sets_l3k3, reciprocal_constraint, CodeTable.perbit(3, 3, perm)).passed
    ]
    assert feasible  # at least one bit-order assignment satisfies the bound


# ---------------------------------------------------------------------------
# verify_table


def test_verify_reference_iid_point(example_sets, example_constraint):
    report = verify_table(example_sets, example_constraint, CodeTable.iid(3, 2, 0.2180))
    assert report.passed and all(v >= 0 for v in report.margins.values())


def test_verify_half_fails(example_sets, example_constraint):
    report = verify_table(example_sets, example_constraint, CodeTable.iid(3, 2, 0.5))
    assert not report.passed
    assert report.margins[5] < 0  # p^2(1-p) = 0.125 > 2/30


def test_verify_zero_table_margins_equal_bounds(example_sets, example_constraint):
    report = verify_table(example_sets, example_constraint, CodeTable.iid(3, 2, 0.0))
    assert report.passed
    for m, margin in report.margins.items():
        assert margin == pytest.approx(EXAMPLE_BOUNDS[m])


# ---------------------------------------------------------------------------
# TailConstraint validation and file format


def test_constraint_requires_unit_interval():
    with pytest.raises(ParameterError):
        TailConstraint.from_table(3, 2, {1: 1.5})
    with pytest.raises(ParameterError):
        TailConstraint.from_table(3, 2, {1: -0.1})


def test_constraint_monotonicity_enforced_by_default():
    with pytest.raises(ParameterError):
        TailConstraint.from_table(3, 2, {1: 0.2, 2: 0.5})
    c = TailConstraint.from_table(3, 2, {1: 0.2, 2: 0.5}, allow_nonmonotone=True)
    assert c.bounds[2] == 0.5


def test_constraint_gap_inheritance():
    c = TailConstraint.from_table(3, 2, {2: 0.5, 5: 0.25})
    assert c.bounds == {1: 1.0, 2: 0.5, 3: 0.5, 4: 0.5, 5: 0.25, 6: 0.25}


def test_constraint_extension_beyond_range():
    c = TailConstraint.from_table(3, 2, EXAMPLE_BOUNDS)
    assert c.bound(7) == EXAMPLE_BOUNDS[6]


def test_parse_constraint_fractions_and_decimals():
    c = parse_constraint(
        "format=vdb-constraint-v1\nL=3\nk=2\n1,22/30\n2,0.25\n"
    )
    assert c.bounds[1] == pytest.approx(22 / 30)
    assert c.bounds[2] == 0.25
    assert c.bounds[6] == 0.25


def test_parse_constraint_reports_line_numbers():
    with pytest.raises(ParameterError, match="line 4"):
        parse_constraint("format=vdb-constraint-v1\nL=3\nk=2\n1,abc\n")
    with pytest.raises(ParameterError, match="line 5"):
        parse_constraint("format=vdb-constraint-v1\nL=3\nk=2\n1,0.5\n1,0.25\n")
    with pytest.raises(ParameterError, match="line 4"):
        parse_constraint("format=vdb-constraint-v1\nL=3\nk=2\n1,1.5\n")


def test_parse_constraint_rejects_monotonicity_violation():
    text = "format=vdb-constraint-v1\nL=3\nk=2\n1,0.1\n2,0.9\n"
    with pytest.raises(ParameterError, match="increases"):
        parse_constraint(text)
    assert parse_constraint(text, allow_nonmonotone=True).bounds[2] == 0.9


def test_constraint_roundtrip(tmp_path, example_constraint):
    path = tmp_path / "c.txt"
    path.write_text(serialize_constraint(example_constraint))
    loaded = load_constraint(path)
    assert loaded.bounds == example_constraint.bounds


# ---------------------------------------------------------------------------
# CodeTable file format


def test_table_roundtrip_iid(tmp_path):
    table = CodeTable.iid(3, 2, 0.2180625)
    path = tmp_path / "t.txt"
    path.write_text(serialize_table(table, {1: 0.5, 2: 0.25}))
    loaded = load_table(path)
    assert loaded.mode == "iid" and loaded.p == 0.2180625 and (loaded.L, loaded.k) == (3, 2)


def test_table_roundtrip_perbit(tmp_path):
    table = CodeTable.perbit(3, 2, REFERENCE_PERBIT)
    path = tmp_path / "t.txt"
    path.write_text(serialize_table(table))
    assert load_table(path).p_vec == REFERENCE_PERBIT


def test_parse_table_errors():
    with pytest.raises(ParameterError):
        parse_table("format=vdb-table-v1\nL=3\nk=2\nmode=iid\n")  # missing p
    with pytest.raises(ParameterError):
        parse_table("format=vdb-table-v1\nL=3\nk=2\nmode=perbit\np_0=0.1\n")
    with pytest.raises(ParameterError):
        parse_table("format=nope\n")


def test_code_table_validation():
    with pytest.raises(ParameterError):
        CodeTable.iid(3, 2, 1.5)
    with pytest.raises(ParameterError):
        CodeTable.perbit(3, 2, (0.1, 0.2))  # wrong arity
