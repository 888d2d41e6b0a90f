"""
Testes para as envoltórias dos coeficientes de (1−z)^(−α) log^k(1/(1−z))
"""
import mpmath
import pytest
from flint import acb, arb, fmpq

from certasy.services.monomial_coeffs import (
    VARS,
    CoeffAsyRequest,
    ParameterError,
    coeffasy,
    exact_gamma_ratio,
    frenzen_order,
    gamma_ratio,
    gen_bernoulli,
    varchange,
)

from tests.oracles import fmpq_ball, monomial_coefficient, mp_ball

ALPHAS = [fmpq(1, 2), fmpq(-1, 2), fmpq(3, 2), fmpq(1, 3), fmpq(1), fmpq(2), fmpq(0), fmpq(-1)]


def at(n: int) -> dict:
    return {"n": fmpq_ball(fmpq(1, n)), "w": acb(arb(n).log()), "e": acb(0), "v": acb(0)}


def request(alpha, K: int = 2, r: int = 3, n0: int = 5) -> CoeffAsyRequest:
    value = alpha if isinstance(alpha, acb) else fmpq_ball(alpha)
    return CoeffAsyRequest(alpha=value, K=K, r=r, s=arb(2), n0=n0)


@pytest.mark.parametrize("alpha", ALPHAS, ids=str)
@pytest.mark.parametrize("r", [1, 3])
def test_envelope_contains_exact_coefficients(alpha, r):
    """Testa n^(α−1)·e_k(1/n, log n) ∋ coeficiente exato para k ≤ 2 e n ≥ n₀"""
    result = coeffasy(request(alpha, r=r))
    for k in range(3):
        for n in (5, 8, 20, 100):
            exact = monomial_coefficient(alpha, k, n)
            assert result.evaluate(k, n).contains(fmpq_ball(exact)), (k, n)


def test_envelope_complex_alpha():
    """Testa α = 1/2 + i contra Γ(n+α)/(Γ(α)n!) e a derivada em α"""
    alpha = acb(arb(fmpq(1, 2)), 1)
    mp_alpha = mpmath.mpc(0.5, 1)
    result = coeffasy(request(alpha, K=1, n0=3))
    for n in (3, 10, 50):
        value = mpmath.rf(mp_alpha, n) / mpmath.factorial(n)
        derivative = value * (mpmath.digamma(n + mp_alpha) - mpmath.digamma(mp_alpha))
        assert result.evaluate(0, n).overlaps(mp_ball(value))
        assert result.evaluate(1, n).overlaps(mp_ball(derivative))


def test_leading_coefficients():
    """Testa termo líder 1/Γ(α) em e_0 e coeficiente de log n em e_1"""
    result = coeffasy(request(fmpq(1, 2)))
    inv_gamma = mp_ball(1 / mpmath.sqrt(mpmath.pi))
    assert result.slice(0).coefficient((0, 0, 0, 0)).overlaps(inv_gamma)
    assert result.slice(1).coefficient((0, 1, 0, 0)).overlaps(inv_gamma)
    assert result.slice(0).degree("n") <= 3


def test_negative_integer_vanishes_for_k_zero():
    """Testa e_0 = 0 para α = −1 (polinômio em z)"""
    result = coeffasy(request(fmpq(-1)))
    assert result.evaluate(0, 10).contains(acb(0))
    assert result.evaluate(0, 10).real.rad() < 1e-20


class TestDomain:
    """Testes de validação do domínio"""

    def test_n0_must_exceed_s_alpha(self):
        """Testa n₀ = s|α| rejeitado"""
        with pytest.raises(ParameterError):
            request(fmpq(3), n0=6)

    def test_s_below_two(self):
        """Testa s < 2 rejeitado"""
        with pytest.raises(ParameterError):
            CoeffAsyRequest(alpha=acb(1), K=0, r=2, s=arb(fmpq(3, 2)), n0=10)

    def test_order_zero(self):
        """Testa r = 0 rejeitado"""
        with pytest.raises(ParameterError):
            request(fmpq(1, 2), r=0)


class TestGammaRatio:
    """Testes de G(n) = n^(1−α) Γ(n+α)/Γ(n+1)"""

    def test_exact_integer_branch(self):
        """Testa G = (1 + n⁻¹)(1 + 2n⁻¹) para α = 3"""
        g = exact_gamma_ratio(3)
        assert g.coefficient((0, 0, 0, 0)) == acb(1)
        assert g.coefficient((1, 0, 0, 0)) == acb(3)
        assert g.coefficient((2, 0, 0, 0)) == acb(2)
        with pytest.raises(ValueError):
            exact_gamma_ratio(0)

    def test_integer_dispatch_is_exact(self):
        """Testa que α = 2 com r ≥ 2 não carrega bolas de resto"""
        g = gamma_ratio(acb(2), 3, arb(2), 5)
        assert all(c.is_exact() for c in g.coeffs.values())

    @pytest.mark.parametrize("alpha", [fmpq(1, 2), fmpq(-3, 2), fmpq(7, 3)], ids=str)
    def test_enclosure(self, alpha):
        """Testa g(1/n) ∋ G(n) para α não inteiro"""
        g = gamma_ratio(fmpq_ball(alpha), 3, arb(2), 6)
        mp_alpha = mpmath.mpf(int(alpha.p)) / int(alpha.q)
        for n in (6, 15, 80):
            exact = mpmath.mpf(n) ** (1 - mp_alpha) * mpmath.gamma(n + mp_alpha) / mpmath.gamma(n + 1)
            assert g.evaluate(at(n)).overlaps(mp_ball(exact))

    def test_frenzen_order(self):
        """Testa η = max(⌈r/2⌉, ⌈Re α/2⌉, 1)"""
        assert frenzen_order(acb(5), 2) == 3
        assert frenzen_order(acb(1), 5) == 3
        assert frenzen_order(acb(-4), 0) == 1


class TestHelpers:
    """Testes das expansões auxiliares"""

    def test_generalized_bernoulli(self):
        """Testa B_0 = 1 e B_2^(2σ)(σ) = −σ/6"""
        assert gen_bernoulli(0, 3) == acb(1)
        assert gen_bernoulli(1, 3).contains(fmpq_ball(fmpq(-1, 2)))
        assert gen_bernoulli(1, fmpq_ball(fmpq(1, 2))).contains(fmpq_ball(fmpq(-1, 12)))

    @pytest.mark.parametrize("n", [4, 9, 1000])
    def test_varchange_inverse(self, n):
        """Testa (n + α)⁻¹ na expansão com resto para α = 3/2, s = 2"""
        poly = varchange("inverse", fmpq_ball(fmpq(3, 2)), 3, 2)
        assert poly.evaluate(at(n)).contains(fmpq_ball(1 / (n + fmpq(3, 2))))

    @pytest.mark.parametrize("n", [4, 9, 1000])
    def test_varchange_log(self, n):
        """Testa log(n + α) na expansão com resto para α = −3/2, s = 2"""
        poly = varchange("log", fmpq_ball(fmpq(-3, 2)), 3, 2)
        exact = mpmath.log(mpmath.mpf(n) - mpmath.mpf(3) / 2)
        assert poly.evaluate(at(n)).overlaps(mp_ball(exact))

    def test_varchange_invalid(self):
        """Testa tipo desconhecido e ordem inválida"""
        with pytest.raises(ValueError):
            varchange("exp", acb(1), 2, 2)
        with pytest.raises(ParameterError):
            varchange("log", acb(1), 0, 2)

    def test_variables(self):
        """Testa a ordem das variáveis formais"""
        assert VARS == ("n", "w", "e", "v")
