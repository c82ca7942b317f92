import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdqrank.errors import LoadError, UsageError
from fdqrank.grouprel import GroupWord, parse_presentation
from fdqrank.ncalg import GaussianRational, NCPoly, TensorPoly, contract, involution
from fdqrank.repkit import (
    Evaluator,
    apply_tensor,
    cyclic_shift,
    dump_representation,
    evaluate_poly,
    evaluate_tensor,
    from_descriptor,
    load_representation,
    random_permutations,
    regular_cyclic,
    Representation,
    relator_defect,
    torus,
)

from conftest import ncpolys, tensorpolys

I = GaussianRational(0, 1)
SWAP = np.array([[0, 1], [1, 0]])


class TestFamilies:
    def test_cyclic_trivial(self):
        rep = cyclic_shift(1)
        assert np.array_equal(rep.unitaries[0], np.eye(1))

    def test_cyclic_swap(self):
        assert np.array_equal(cyclic_shift(2).unitaries[0], SWAP)

    def test_cyclic_four(self):
        u = cyclic_shift(4).unitaries[0]
        assert np.array_equal(np.linalg.matrix_power(u, 4), np.eye(4))
        assert not np.array_equal(np.linalg.matrix_power(u, 2), np.eye(4))
        assert u[1, 0] == 1  # e_0 -> e_1

    def test_torus(self):
        assert [u.shape for u in torus(1).unitaries] == [(1, 1), (1, 1)]
        a, b = torus(2).unitaries
        assert a.shape == (4, 4) and np.array_equal(a @ b, b @ a)
        rep = torus(3)
        assert rep.D == 9
        assert relator_defect(rep, GroupWord(((1, 1), (2, 1), (1, -1), (2, -1)))) == 0.0

    @pytest.mark.parametrize("k, expected", [(1, np.eye(1)), (2, SWAP), (3, np.roll(np.eye(3), 1, axis=0))])
    def test_regular_cyclic(self, k, expected):
        rep = regular_cyclic(k)
        assert np.array_equal(rep.unitaries[0], expected)
        assert relator_defect(rep, GroupWord(((1, 1),) * k)) == 0.0

    def test_randperm_trivial(self):
        rep = random_permutations(1, 2, 123)
        assert all(np.array_equal(u, np.eye(1)) for u in rep.unitaries)

    def test_randperm_permutation_matrices(self):
        for u in random_permutations(5, 2, 7).unitaries:
            assert np.array_equal(u.sum(axis=0), np.ones(5))
            assert np.array_equal(u.sum(axis=1), np.ones(5))

    def test_randperm_deterministic(self):
        a = random_permutations(30, 3, 11)
        b = random_permutations(30, 3, 11)
        assert a == b
        assert a != random_permutations(30, 3, 12)

    def test_randperm_frozen_stream(self):
        # Philox stream is platform independent; frozen from one draw
        assert random_permutations(8, 1, 0).data[0].tolist() == [5, 0, 6, 1, 7, 2, 4, 3]
        assert random_permutations(6, 2, 7).data[1].tolist() == [0, 1, 5, 3, 4, 2]

    def test_randperm_defect_recorded(self):
        rep = random_permutations(40, 2, 0)
        defect = relator_defect(rep, GroupWord(((1, 1), (2, 1), (1, -1), (2, -1))))
        assert defect > 0

    def test_bad_sizes(self):
        for make in (cyclic_shift, regular_cyclic, torus):
            with pytest.raises(UsageError):
                make(0)


class TestDefect:
    def test_perm_matches_dense(self):
        rep = random_permutations(9, 2, 4)
        w = GroupWord(((1, 1), (2, 1), (1, 1), (2, -1)))
        dense = np.linalg.norm(rep.word_matrix(w) - np.eye(9), 2)
        assert relator_defect(rep, w) == pytest.approx(dense, abs=1e-12)

    def test_dense_kind(self):
        theta = 2 * np.pi / 3
        u = np.array([[np.exp(1j * theta)]])
        rep = Representation(1, 1, "dense", (u,))
        assert relator_defect(rep, GroupWord(((1, 1),) * 3)) == pytest.approx(0, abs=1e-12)
        assert relator_defect(rep, GroupWord(((1, 1),))) == pytest.approx(abs(np.exp(1j * theta) - 1))


class TestFiles:
    def test_round_trip_perm(self, tmp_path):
        path = tmp_path / "c3.rep"
        dump_representation(cyclic_shift(3), path)
        assert path.read_text().splitlines() == ["rep 3 1 perm", "1 2 0"]
        assert load_representation(path) == cyclic_shift(3)

    def test_round_trip_dense(self, tmp_path):
        rng = np.random.default_rng(1)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
        rep = Representation(3, 1, "dense", (q,))
        path = tmp_path / "d.rep"
        dump_representation(rep, path)
        assert load_representation(path) == rep

    def test_non_unitary_rejected(self, tmp_path):
        path = tmp_path / "bad.rep"
        path.write_text("rep 2 2 dense\n1,0 0,0\n0,0 1,0\n1,0 0,0\n0,0 2,0\n")
        with pytest.raises(LoadError, match="generator 2"):
            load_representation(path)

    def test_repeated_image_rejected(self, tmp_path):
        path = tmp_path / "bad.rep"
        path.write_text("rep 3 1 perm\n0 0 1\n")
        with pytest.raises(LoadError, match="not a permutation"):
            load_representation(path)

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.rep"
        path.write_text("rep 3 perm\n0 1 2\n")
        with pytest.raises(LoadError, match="header"):
            load_representation(path)

    def test_presentation_marks_exactness(self, tmp_path):
        path = tmp_path / "c2.rep"
        dump_representation(cyclic_shift(2), path)
        z2 = parse_presentation("gens a; rel a^2; order finite 2")
        z3 = parse_presentation("gens a; rel a^3; order finite 3")
        assert load_representation(path, z2).exact
        assert not load_representation(path, z3).exact

    def test_descriptors(self, tmp_path):
        assert from_descriptor("cyclic:4") == cyclic_shift(4)
        assert from_descriptor("torus:2") == torus(2)
        assert from_descriptor("regular-cyclic:3") == regular_cyclic(3)
        assert from_descriptor("randperm:6:2", m=2) == random_permutations(6, 2, 2)
        path = tmp_path / "x.rep"
        dump_representation(torus(2), path)
        assert from_descriptor(f"file:{path}") == torus(2)
        with pytest.raises(UsageError):
            from_descriptor("cyclic:x")
        with pytest.raises(UsageError):
            from_descriptor("sphere:3")


class TestEvaluation:
    def test_generator_at_swap(self):
        x1 = evaluate_poly(NCPoly.var(2, 1), cyclic_shift(2))
        assert np.array_equal(x1, [[0, 2], [2, 0]])

    def test_unit_relation_vanishes(self):
        f = NCPoly(2, {(1,): 1, (2,): -I}) * NCPoly(2, {(1,): 1, (2,): I}) - 4
        for rep in (cyclic_shift(3), regular_cyclic(5)):
            assert np.max(np.abs(evaluate_poly(f, rep))) <= 1e-12

    def test_empty_monomial(self):
        assert np.array_equal(evaluate_poly(NCPoly.one(4), torus(2)), np.eye(4))

    def test_nvars_mismatch(self):
        with pytest.raises(UsageError):
            evaluate_poly(NCPoly.var(4, 1), cyclic_shift(2))

    def test_selfadjoint_variables(self):
        for rep in (cyclic_shift(5), torus(3), random_permutations(6, 3, 1)):
            for x in rep.variables:
                assert np.max(np.abs(x - x.conj().T)) <= 1e-12

    def test_unit_tensor_is_identity(self):
        assert np.array_equal(evaluate_tensor(TensorPoly.unit(2), cyclic_shift(2)), np.eye(4))

    def test_left_multiplication_on_basis(self):
        rep = cyclic_shift(2)
        tp = TensorPoly(2, {((1,), ()): 1})
        M = evaluate_tensor(tp, rep)
        X1 = np.array([[0, 2], [2, 0]])
        for a in range(2):
            for b in range(2):
                E = np.zeros((2, 2))
                E[a, b] = 1
                assert np.array_equal((M @ E.ravel()).reshape(2, 2), X1 @ E)

    def test_column_major_convention(self):
        rep = torus(2)
        tp = TensorPoly(4, {((1, 3), (2,)): 1, ((4,), ()): 2})
        T = np.arange(16.0).reshape(4, 4) + 1j
        M = evaluate_tensor(tp, rep, order="F")
        got = (M @ T.ravel(order="F")).reshape(4, 4, order="F")
        assert np.allclose(got, apply_tensor(tp, rep, T), atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(ncpolys(nvars=4, max_terms=5, max_len=4), ncpolys(nvars=4, max_terms=5, max_len=4))
    def test_homomorphism(self, p, q):
        rep = random_permutations(5, 2, 3)
        ev = Evaluator(rep)
        lhs = ev.poly(p * q)
        rhs = ev.poly(p) @ ev.poly(q)
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(1.0, np.linalg.norm(rhs))

    @settings(max_examples=40, deadline=None)
    @given(ncpolys(nvars=4, max_terms=5, max_len=4))
    def test_involution(self, p):
        rep = torus(2)
        lhs = evaluate_poly(involution(p), rep)
        rhs = evaluate_poly(p, rep).conj().T
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(1.0, np.linalg.norm(rhs))

    @settings(max_examples=40, deadline=None)
    @given(tensorpolys(nvars=4, max_terms=4, max_len=3), ncpolys(nvars=4, max_terms=4, max_len=3),
           st.sampled_from(["C", "F"]))
    def test_commuting_square(self, tp, x, order):
        rep = random_permutations(4, 2, 9)
        M = evaluate_tensor(tp, rep, order)
        X = evaluate_poly(x, rep)
        lhs = (M @ X.ravel(order=order)).reshape(4, 4, order=order)
        rhs = evaluate_poly(contract(tp, x), rep)
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(1.0, np.linalg.norm(rhs))
