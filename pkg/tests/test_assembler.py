"""
Testes para a montagem da expansão, o termo de erro e a positividade
"""
from math import comb

import mpmath
import pytest
from flint import acb, arb, fmpq

from certasy.main import extended_initial_terms
from certasy.services.algebraic import AlgebraicNumber
from certasy.services.assembler import (
    BelowValidityFloor,
    IrregularDominantSingularity,
    Monomial,
    certify_positivity,
    evaluate_bound_at,
    run_pipeline,
    split_order,
    standardize_and_absorb,
)
from certasy.services.ball_arith import Precision
from certasy.services.contour_bounds import ContourParams, NoSingularity
from certasy.services.dfinite_core import DiffOp, diffop_to_recurrence, unroll_recurrence
from certasy.utils.dyadic import decimal_to_fmpq

from tests.oracles import fmpq_ball, mp_ball

GEOMETRIC = [[-1], [1, -1]]
CENTRAL_BINOMIAL = [[-2], [1, -4]]
ALTERNATING = [[1], [1, 1]]
CORPUS = [
    "geometric",
    "central_binomial",
    "lattice",
    "analytic_at_one",
    "complex_exponents",
    "diagonal_c26",
    "diagonal_c28",
]


def params(N0: int = 10) -> ContourParams:
    return ContourParams(R0=fmpq(2), R1=fmpq(1), M=arb(1), N0=N0, N1=0, N2=9, N3=2, s=fmpq(5, 2))


def monomial(theta, coeff, k: int = 0) -> Monomial:
    return Monomial(rho=AlgebraicNumber.rational(fmpq(1)), theta=acb(theta), k=k, coeff=acb(coeff))


@pytest.fixture(scope="module")
def central_binomial_bound():
    """Expansão de C(2n, n) com r₀ = 3 a partir de n₀ = 10"""
    op = DiffOp.from_rationals(CENTRAL_BINOMIAL)
    return run_pipeline(op, [fmpq(1)], 3, 10, precision=Precision(bits=128))


class TestSplitOrder:
    """Testes da ordem de separação r_c"""

    def test_leading_class_keeps_order(self):
        """Testa r_c = r₀ quando Re ν0 = λ"""
        assert split_order(fmpq_ball(fmpq(-1, 2)), arb(fmpq(-1, 2)), 3) == 3

    def test_higher_class_needs_fewer_terms(self):
        """Testa r_c = r₀ − ⌊Re ν0 − λ⌋ com mínimo 1"""
        assert split_order(acb(1), arb(fmpq(-1, 2)), 3) == 2
        assert split_order(acb(5), arb(fmpq(-1, 2)), 3) == 1


class TestStandardize:
    """Testes da absorção de monômios no termo de erro"""

    def test_absorbs_small_monomials(self):
        """Testa θ = −3 absorvido com fator N₀^(θ−β) e θ = −1 mantido para β = −2"""
        terms, error = standardize_and_absorb(
            [monomial(-1, 3), monomial(-3, 5)], [], arb(0), params(), arb(0), 2
        )
        assert len(terms) == 1
        assert terms[0].coeff == acb(3)
        assert error.A >= arb(fmpq(1, 2))
        assert error.A < arb(fmpq(1, 2)) + arb(fmpq(1, 10 ** 10))
        assert error.kappa == 0
        assert error.exponent.contains(arb(-2))

    def test_big_circle_factor(self):
        """Testa C_B·(M/R₀)^N₀·N₀^(−β) quando o máximo ocorre em N₀"""
        terms, error = standardize_and_absorb([], [], arb(1), params(), arb(0), 2)
        assert terms == []
        exact = arb(fmpq(100, 1024))
        assert error.A >= exact
        assert error.A < exact + arb(fmpq(1, 10 ** 10))

    def test_log_power_goes_to_error(self):
        """Testa κ igual à maior potência de log absorvida"""
        _, error = standardize_and_absorb([monomial(-4, 1, k=2)], [], arb(0), params(), arb(0), 2)
        assert error.kappa == 2


class TestPipelineErrors:
    """Testes das falhas do pipeline"""

    def test_order_must_be_positive(self):
        """Testa r₀ = 0 rejeitado"""
        with pytest.raises(ValueError):
            run_pipeline(DiffOp.from_rationals(GEOMETRIC), [1], 0)

    def test_no_singularity(self):
        """Testa f = z, singular apenas na origem"""
        with pytest.raises(NoSingularity):
            run_pipeline(DiffOp.from_rationals([[-1], [0, 1]]), [0, 1], 2)

    def test_irregular_dominant(self):
        """Testa (1 − z)²f' − f = 0, irregular em 1"""
        with pytest.raises(IrregularDominantSingularity):
            run_pipeline(DiffOp.from_rationals([[-1], [1, -2, 1]]), [1], 2)


@pytest.mark.slow
class TestCentralBinomial:
    """Testes de C(2n, n) ~ 4^n/√(πn)"""

    def test_terms(self, central_binomial_bound):
        """Testa os termos 1/√π·n^(−1/2) e −1/(8√π)·n^(−3/2) em ρ = 1/4"""
        bound = central_binomial_bound
        assert {t.shift for t in bound.terms} <= {0, 1, 2}
        by_shift = {t.shift: t for t in bound.terms if t.k == 0}
        assert by_shift[0].sigma.real.contains(arb(fmpq(-1, 2)))
        assert by_shift[0].coeff.overlaps(mp_ball(1 / mpmath.sqrt(mpmath.pi)))
        assert by_shift[1].coeff.overlaps(mp_ball(-1 / (8 * mpmath.sqrt(mpmath.pi))))
        assert bound.N0 >= 10
        assert bound.error.exponent.contains(arb(fmpq(-7, 2)))

    def test_contains_exact_values(self, central_binomial_bound):
        """Testa que a bola avaliada contém C(2n, n) para n ≥ N₀"""
        bound = central_binomial_bound
        for n in (bound.N0, bound.N0 + 1, 2 * bound.N0, 300):
            assert evaluate_bound_at(bound, n).contains(acb(comb(2 * n, n))), n

    def test_below_validity_floor(self, central_binomial_bound):
        """Testa avaliação recusada para n < N₀"""
        with pytest.raises(BelowValidityFloor):
            evaluate_bound_at(central_binomial_bound, central_binomial_bound.N0 - 1)

    def test_positivity(self, central_binomial_bound):
        """Testa positividade certificada com prefixo verificado"""
        rec = diffop_to_recurrence(DiffOp.from_rationals(CENTRAL_BINOMIAL))
        certificate = certify_positivity(central_binomial_bound, rec, [1])
        assert certificate.mode == "positive"
        assert certificate.checked_prefix
        assert certificate.crossover >= central_binomial_bound.N0


@pytest.mark.slow
def test_alternating_sign_is_nonconclusive():
    """Testa (−1)^n: singularidade dominante em −1"""
    op = DiffOp.from_rationals(ALTERNATING)
    bound = run_pipeline(op, [1], 2, precision=Precision(bits=128))
    certificate = certify_positivity(bound, diffop_to_recurrence(op), [1])
    assert certificate.mode == "nonconclusive"
    assert certificate.reason == "complex-dominant"
    for n in (bound.N0, bound.N0 + 1):
        assert evaluate_bound_at(bound, n).contains(acb((-1) ** n))


def corpus_bound(spec, order=None):
    """Executa o pipeline num problema do corpus; devolve (limitante, recorrência, termos iniciais)"""
    op = spec.diffop()
    rec = spec.recurrence_form() or diffop_to_recurrence(op)
    initial = extended_initial_terms(rec, spec.initial_values())
    options = spec.options
    bound = run_pipeline(
        op,
        initial,
        order or options.order,
        options.start,
        spec.analytic_points(),
        Precision(bits=options.precision),
    )
    return bound, rec, initial


def decimal_ball(mid: str, rad: str) -> arb:
    return arb(decimal_to_fmpq(mid), decimal_to_fmpq(rad))


def terms_at(bound, sign: int):
    """Termos sem log em ρ real com o sinal dado, indexados pela parte real de σ"""
    return {
        round(float(t.sigma.real.mid())): t
        for t in bound.terms
        if t.k == 0 and t.rho.is_real() and (t.rho.enclosure().real > 0) == (sign > 0)
    }


@pytest.mark.slow
@pytest.mark.parametrize("name", CORPUS)
def test_corpus_contains_exact_values(load_problem, name):
    """Testa que a expansão de cada problema do corpus contém os termos exatos"""
    spec = load_problem(name)
    bound, rec, initial = corpus_bound(spec)
    assert bound.N0 >= spec.options.start
    values = unroll_recurrence(rec, initial, bound.N0 + 40)
    for n in (bound.N0, bound.N0 + 1, bound.N0 + 40):
        assert evaluate_bound_at(bound, n).contains(fmpq_ball(values[n])), n


@pytest.mark.slow
class TestLattice:
    """Testes dos passeios no quarto de plano: f_n ~ 4^n/n·(4/π + ...)"""

    def test_terms(self, load_problem):
        """Testa 1.27, −1.91 e 4.93 em ρ = 1/4 e (−1)^n·0.318 em ρ = −1/4 com r₀ = 3"""
        bound, _, _ = corpus_bound(load_problem("lattice"), order=3)
        positive, negative = terms_at(bound, 1), terms_at(bound, -1)
        assert positive[-1].coeff.real.overlaps(mp_ball(4 / mpmath.pi).real)
        assert decimal_ball("1.27", "3.44e-3").contains(positive[-1].coeff.real)
        assert decimal_ball("-1.91", "3.76e-3").contains(positive[-2].coeff.real)
        assert decimal_ball("4.93", "8.13e-3").contains(positive[-3].coeff.real)
        assert decimal_ball("0.318", "6.18e-4").contains(negative[-3].coeff.real)

    def test_million_steps(self, load_problem):
        """Testa f_n/4^n em n = 10^6 com r₀ = 6"""
        bound, _, _ = corpus_bound(load_problem("lattice"), order=6)
        n = 10 ** 6
        value = evaluate_bound_at(bound, n).real / arb(4) ** n
        assert value.overlaps(decimal_ball("1.27323763487919e-6", "2e-20"))
        assert value.rad() < 1e-19


@pytest.mark.slow
class TestDiagonals:
    """Testes das diagonais de 1/(1 − (z₁ + ... + z₄) + c·z₁z₂z₃z₄)"""

    def test_c26_is_positive(self, load_problem):
        """Testa c = 26: coeficiente líder 0.0484997667050581 e positividade a partir de n = 50"""
        bound, rec, initial = corpus_bound(load_problem("diagonal_c26"))
        (lead,) = [t for t in bound.terms if t.k == 0 and t.sigma.real.contains(arb(fmpq(-3, 2)))]
        assert lead.coeff.real.overlaps(decimal_ball("0.0484997667050581", "1e-16"))
        assert bound.N0 >= 50
        certificate = certify_positivity(bound, rec, initial)
        assert certificate.mode == "positive"

    def test_c28_has_complex_dominant_pair(self, load_problem):
        """Testa c = 28: par conjugado dominante e positividade inconclusiva"""
        bound, rec, initial = corpus_bound(load_problem("diagonal_c28"))
        assert len(bound.dominant) == 2
        assert not any(rho.is_real() for rho in bound.dominant)
        leading = [t for t in bound.terms if t.k == 0 and t.sigma.real.contains(arb(fmpq(-3, 2)))]
        assert len(leading) == 2
        assert all(t.coeff.real.overlaps(decimal_ball("-0.0311212622056357", "1e-16")) for t in leading)
        certificate = certify_positivity(bound, rec, initial)
        assert certificate.mode == "nonconclusive"
        assert certificate.reason == "complex-dominant"
