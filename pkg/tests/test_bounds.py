import itertools
import math
from dataclasses import replace
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ksminimax import bounds as b
from ksminimax.generative import build_ks_dictionary, random_ks_dictionary
from ksminimax.linalg import normalize_columns


def inputs(**kw):
    base = dict(N=1000, m1=16, m2=16, p1=32, p2=32, r=1.0, sigma=1.0, t=0.5, c1=0.05,
                sigma_a=1.0, s=4, sigma_x_norm=1.0)
    base.update(kw)
    return b.BoundInputs(**base)


# Hand re-evaluation in exact rational arithmetic, written from the closed forms.
def oracle_dt(i):
    return F(i.c1) * (i.p1 * (i.m1 - 1) + i.p2 * (i.m2 - 1)) - 3


def oracle_thm1(i, sx=None):
    sx = F(i.sigma_x_norm) if sx is None else sx
    v = (1 - F(i.t)) * F(i.sigma) ** 2 * oracle_dt(i) / (32 * F(i.N) * sx)
    return max(v, F(0))


def oracle_cor1(i):
    return oracle_thm1(i, F(i.s) / (i.p1 * i.p2) * F(i.sigma_a) ** 2)


def oracle_thm2(i):
    p = i.p1 * i.p2
    C2 = F("1.58e-5") * p * (1 - F(i.t)) / F(i.r) ** 2
    v = C2 * F(i.r) ** 2 * F(i.sigma) ** 4 * oracle_dt(i) / (F(i.N) * i.s**2 * F(i.sigma_a) ** 4)
    return max(v, F(0))


GRID = [
    dict(),
    dict(N=37, sigma=0.7, t=0.3, c1=0.03, sigma_a=2.5, s=3, sigma_x_norm=0.2),
    dict(N=1, m1=8, m2=12, p1=16, p2=24, r=0.5, sigma=2.0, t=0.9, c1=0.12),
    dict(N=5000, m1=32, m2=4, p1=64, p2=8, sigma=0.1, sigma_a=0.3, s=2, sigma_x_norm=3.0),
    dict(N=12.5, m1=10, m2=10, p1=20, p2=30, r=2.0, t=0.75, c1=0.08, s=7),
]


class TestKL:
    def test_closed_forms(self):
        assert abs(b.kl_gaussian(2 * np.eye(2), np.eye(2)) - (1 - math.log(2))) <= 1e-12
        assert abs(b.kl_gaussian(np.eye(2), 2 * np.eye(2)) - (math.log(2) - 0.5)) <= 1e-12

    def test_equal_is_zero(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((4, 4))
        S = M @ M.T + np.eye(4)
        assert abs(b.kl_gaussian(S, S)) <= 1e-12

    def test_matches_textbook_formula(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            M1, M2 = rng.standard_normal((2, 5, 5))
            S1, S2 = M1 @ M1.T + 0.1 * np.eye(5), M2 @ M2.T + 0.1 * np.eye(5)
            ref = 0.5 * (np.trace(np.linalg.inv(S2) @ S1) - 5
                         + np.log(np.linalg.det(S2) / np.linalg.det(S1)))
            assert b.kl_gaussian(S1, S2) == pytest.approx(ref, rel=1e-9, abs=1e-12)

    def test_not_pd(self):
        with pytest.raises(ValueError):
            b.kl_gaussian(np.diag([1.0, 0.0]), np.eye(2))
        with pytest.raises(ValueError):
            b.kl_gaussian(np.eye(2), np.eye(3))


class TestCovariance:
    def setup_method(self):
        self.d = random_ks_dictionary(3, 2, 4, 3, np.random.default_rng(3))

    def test_zero_scale(self):
        C = b.conditional_covariance(self.d, [1, 5], 0.0, 0.5)
        assert np.array_equal(C, 0.25 * np.eye(6))

    def test_rank_one_spectrum(self):
        w = np.linalg.eigvalsh(b.conditional_covariance(self.d, [7], 2.0, 0.5))
        assert np.allclose(w, [0.25] * 5 + [4.25], atol=1e-12)

    def test_subdictionary_two_ways(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            support = np.sort(rng.choice(12, 3, replace=False)) + 1
            got = b.subdictionary(self.d, support)
            assert np.max(np.abs(got - self.d.D[:, support - 1])) <= 1e-12

    def test_trace_and_symmetry(self):
        sup = [2, 9, 11]
        C = b.conditional_covariance(self.d, sup, 1.3, 0.4)
        DS = self.d.D[:, np.array(sup) - 1]
        assert np.array_equal(C, C.T)
        assert np.trace(C) == pytest.approx(1.3**2 * np.sum(DS**2) + 6 * 0.16, rel=1e-14)
        assert np.linalg.eigvalsh(C)[0] > 0

    def test_empty_support(self):
        with pytest.raises(ValueError):
            b.conditional_covariance(self.d, [], 1.0, 1.0)


class TestMiAndFano:
    def test_general_example(self):
        i = inputs(N=100, m1=8, m2=8, p1=8, p2=8, sigma_x_norm=0.25)
        assert b.mi_upper_general(i, 1e-3) == pytest.approx(6.4, rel=1e-14)
        assert b.mi_upper_general(i, 0.0) == 0
        assert b.mi_upper_general(replace(i, N=200), 1e-3) == pytest.approx(12.8, rel=1e-14)

    def test_sparse_gaussian_example(self):
        i = inputs(N=100, s=2)
        assert b.mi_upper_sparse_gaussian(i, 1e-5) == pytest.approx(31.684, rel=1e-12)
        assert b.mi_upper_sparse_gaussian(i, 0.0) == 0
        ratio = (b.mi_upper_sparse_gaussian(replace(i, sigma_a=2.0), 1e-5)
                 / b.mi_upper_sparse_gaussian(i, 1e-5))
        assert ratio == pytest.approx(16.0, rel=1e-14)

    @pytest.mark.parametrize("L,expected", [(4, 0.0), (16, 1.0), (2**10, 4.0), (2, -0.5)])
    def test_fano(self, L, expected):
        assert b.fano_lower(L) == expected

    def test_fano_needs_two(self):
        with pytest.raises(ValueError):
            b.fano_lower(1)


class TestTheorems:
    def test_thm1_example(self):
        r = b.thm1_bound(inputs())
        assert r.degrees_term == pytest.approx(45.0, rel=1e-14)
        assert r.value == pytest.approx(0.5 * 45 / 32000, rel=1e-12)
        assert not r.vacuous

    def test_cor1_example(self):
        assert b.cor1_bound(inputs()).value == pytest.approx(0.18, rel=1e-12)

    def test_thm2_example(self):
        r = b.thm2_bound(inputs(s=3))
        assert r.value == pytest.approx(1.58e-5 * 1024 * 0.5 * 45 / 9000, rel=1e-12)

    def test_thm2_constant_literal(self):
        assert b.THM2_CONSTANT == 1.58e-5

    @pytest.mark.parametrize("kw", GRID)
    def test_against_rational_oracle(self, kw):
        i = inputs(**kw)
        for fn, oracle in ((b.thm1_bound, oracle_thm1), (b.cor1_bound, oracle_cor1),
                           (b.thm2_bound, oracle_thm2)):
            want = float(oracle(i))
            assert want > 0
            assert abs(fn(i).value - want) <= 1e-12 * want

    def test_vacuous(self):
        i = inputs(m1=4, m2=4, p1=8, p2=8)
        assert i.degrees_term == pytest.approx(-0.6)
        for fn in (b.thm1_bound, b.cor1_bound, b.thm2_bound):
            r = fn(i)
            assert r.vacuous and r.value == 0.0

    def test_exactly_three_is_vacuous(self):
        # c1 * 60 = 3 exactly in binary floating point
        i = inputs(m1=4, m2=4, p1=10, p2=10, c1=0.05)
        assert i.degrees_term <= 0
        assert b.thm1_bound(i).vacuous

    @given(st.floats(0.01, 0.09), st.integers(2, 20), st.integers(2, 20),
           st.integers(1, 40), st.integers(1, 40))
    @settings(max_examples=200, deadline=None)
    def test_never_negative(self, c1, m1, m2, p1, p2):
        i = inputs(c1=c1, m1=m1, m2=m2, p1=p1, p2=p2)
        for fn in (b.thm1_bound, b.cor1_bound, b.thm2_bound):
            r = fn(i)
            assert r.value >= 0
            assert r.vacuous == (r.value == 0)

    @pytest.mark.parametrize("fn", [b.thm1_bound, b.cor1_bound, b.thm2_bound])
    def test_inverse_in_N(self, fn):
        base = fn(inputs(N=10)).value
        for k in (2, 3, 10, 1000):
            assert fn(inputs(N=10 * k)).value * k == pytest.approx(base, rel=1e-14)

    def test_monotone(self):
        vals = [b.thm2_bound(inputs(sigma_a=a)).value for a in (0.5, 1, 2, 4)]
        assert vals == sorted(vals, reverse=True)
        vals = [b.cor1_bound(inputs(sigma=s)).value for s in (0.5, 1, 2, 4)]
        assert vals == sorted(vals)

    def test_linear_in_degrees(self):
        # degrees_term is affine in c1, so the value is too
        vals = [b.thm1_bound(inputs(c1=c)).value for c in (0.04, 0.05, 0.06)]
        assert vals[1] - vals[0] == pytest.approx(vals[2] - vals[1], rel=1e-12)

    def test_caps(self):
        i = inputs()
        assert b.thm1_bound(i).precondition_cap == pytest.approx(2 * 1024 * 0.5 / 8 / 4096)
        assert b.thm2_bound(replace(i, p1=2, p2=2, m1=40, m2=40)).precondition_cap == \
            pytest.approx(2 * 4 * 0.5 / 8 * min(1 / 4, 1 / 16))

    def test_consistency_chain(self):
        i = inputs()
        r = b.thm1_bound(i)
        assert r.fano_threshold == pytest.approx(0.5 * math.log2(r.L) - 1)
        assert r.mi_upper > 0

    def test_c1_admissibility(self):
        with pytest.raises(ValueError):
            inputs(t=0.5, c1=0.1)


class TestTable:
    def test_example(self):
        assert b.table1_scaling("sparse", "kronecker", 4, 4, 4, 4, 1, 1, 1) == 2.0

    def test_snr_squared(self):
        one = b.table1_scaling("gaussian_sparse", "unstructured", 4, 4, 4, 4, 1, 1, 1)
        two = b.table1_scaling("gaussian_sparse", "unstructured", 4, 4, 4, 4, 1, 1, 2)
        assert two == one / 4

    def test_cells(self):
        args = (2, 3, 5, 7, 11, 0.5, 3.0)
        dof, m, p = 2 * 5 + 3 * 7, 6, 35
        want = {
            ("sparse", "unstructured"): 0.25 * p / (11 * 3.0),
            ("sparse", "kronecker"): 0.25 * dof / (11 * m * 3.0),
            ("gaussian_sparse", "unstructured"): 0.25 * p / (11 * m * 9.0),
            ("gaussian_sparse", "kronecker"): 0.25 * dof / (11 * m * m * 9.0),
        }
        for cell, v in want.items():
            assert b.table1_scaling(*cell, *args) == pytest.approx(v, rel=1e-14)

    def test_unknown(self):
        with pytest.raises(ValueError):
            b.table1_scaling("dense", "kronecker", 1, 1, 1, 1, 1, 1, 1)


class TestCrossover:
    def test_certificate(self):
        i = inputs()
        snr, sa = b.crossover_snr(i)
        at = replace(i, sigma_a=sa)
        c, g = b.cor1_bound(at).value, b.thm2_bound(at).value
        assert abs(c - g) <= 1e-9 * c
        assert snr == pytest.approx(i.s * sa**2 / (i.m * i.sigma**2), rel=1e-14)
        above = replace(i, sigma_a=10 * sa)
        assert b.cor1_bound(above).value > b.thm2_bound(above).value
        below = replace(i, sigma_a=sa / 10)
        assert b.cor1_bound(below).value < b.thm2_bound(below).value

    def test_closed_form(self):
        # cor1 = K1 / sa^2 and thm2 = K2 / sa^4 cross at sa^2 = K2 / K1
        i = inputs(sigma=0.8, s=3)
        p = i.p
        K1 = (1 - i.t) * i.sigma**2 * i.degrees_term * p / (32 * i.N * i.s)
        K2 = 1.58e-5 * p * (1 - i.t) * i.sigma**4 * i.degrees_term / (i.N * i.s**2)
        _, sa = b.crossover_snr(i)
        assert sa**2 == pytest.approx(K2 / K1, rel=1e-9)

    def test_vacuous(self):
        with pytest.raises(ValueError):
            b.crossover_snr(inputs(m1=4, m2=4, p1=8, p2=8))


def rip_oracle(D, s):
    """Per-support singular values, no Gram matrix and no batching."""
    best, wit = -1.0, None
    for sup in itertools.combinations(range(D.shape[1]), s):
        sv = np.linalg.svd(D[:, list(sup)], compute_uv=False)
        dev = max(1 - sv[-1] ** 2, sv[0] ** 2 - 1)
        if dev > best:
            best, wit = dev, tuple(k + 1 for k in sup)
    return best, wit


class TestRip:
    def test_orthonormal(self):
        Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 6)))
        for s in range(1, 7):
            assert b.rip_constant(Q, s).delta <= 1e-14
        assert b.rip_constant(np.eye(5), 3).delta == 0

    def test_identical_columns(self):
        D = normalize_columns(np.random.default_rng(1).standard_normal((4, 5)))
        D[:, 3] = D[:, 1]
        rep = b.rip_constant(D, 2)
        assert rep.delta >= 1 - 1e-12 and rep.witness == (2, 4)

    def test_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            D = normalize_columns(rng.standard_normal((6, 8)))
            rep = b.rip_constant(D, 2)
            delta, wit = rip_oracle(D, 2)
            assert rep.supports_checked == 28
            assert abs(rep.delta - delta) <= 1e-12 and rep.witness == wit

    def test_nondecreasing_in_s(self):
        D = normalize_columns(np.random.default_rng(3).standard_normal((5, 7)))
        deltas = [b.rip_constant(D, s).delta for s in range(1, 8)]
        assert all(x <= y + 1e-12 for x, y in zip(deltas, deltas[1:]))

    def test_batches_agree(self):
        D = normalize_columns(np.random.default_rng(4).standard_normal((6, 10)))
        assert b.rip_constant(D, 3, batch=7) == b.rip_constant(D, 3)

    def test_budget(self):
        with pytest.raises(ValueError, match="budget"):
            b.rip_constant(np.eye(30), 10, budget=1000)

    def test_kronecker_rip(self):
        # factors with orthonormal columns give an orthonormal Kronecker dictionary
        A = np.linalg.qr(np.random.default_rng(5).standard_normal((3, 3)))[0]
        d = build_ks_dictionary(A, np.eye(2))
        assert b.rip_constant(d.D, 2).delta <= 1e-14
