"""
Testes para números algébricos, corpos ℚ(ρ) e comparação exata de módulos
"""
import pytest
import sympy
from flint import acb, arb, fmpq
from sympy import Poly, QQ

from certasy.services.algebraic import (
    X,
    AlgebraicNumber,
    NumberField,
    RootIsolationFailure,
    compare_modulus,
    integer_coefficients,
    is_rational_integer,
    kpoly_divmod,
    kpoly_eval,
    kpoly_gcd,
    kpoly_mul,
    kpoly_norm,
    kpoly_shift,
    squarefree_decomposition,
)


def roots(expr) -> list:
    return AlgebraicNumber.roots_of(Poly(expr, X, domain=QQ))


def test_integer_coefficients_primitive():
    """Testa normalização para inteiros primitivos com líder positivo"""
    poly = Poly(-sympy.Rational(1, 2) * X ** 2 + sympy.Rational(1, 3), X, domain=QQ)
    assert integer_coefficients(poly) == (-2, 0, 3)


def test_roots_of_lattice_leading_coefficient():
    """Testa as raízes de z²(4z−1)(4z+1): {0, 1/4, −1/4}"""
    found = roots(X ** 2 * (4 * X - 1) * (4 * X + 1))
    values = sorted(r.rational_value() for r in found)
    assert values == [fmpq(-1, 4), fmpq(0), fmpq(1, 4)]


def test_quadratic_roots_and_describe():
    """Testa raízes de x² − 6x + 1 e a descrição exata"""
    found = roots(X ** 2 - 6 * X + 1)
    assert len(found) == 2
    assert all(r.degree == 2 and r.is_real() for r in found)
    texts = sorted(r.describe() for r in found)
    assert any("sqrt(2)" in t for t in texts)
    small = min(found, key=lambda r: float(r.enclosure().real.mid()))
    assert small.describe().replace(" ", "") == "3-2*sqrt(2)"


def test_complex_roots_are_conjugate():
    """Testa par conjugado de x² + x + 1"""
    a, b = roots(X ** 2 + X + 1)
    assert a.conjugate().same_as(b)
    assert not a.same_as(b)
    assert not a.is_real()


def test_identify_ambiguous():
    """Testa falha quando a bola aproximada contém duas raízes"""
    with pytest.raises(RootIsolationFailure):
        AlgebraicNumber.identify(Poly(X ** 2 - 2, X, domain=QQ), acb(arb(0, 10)))


def test_enclosure_refines_with_precision():
    """Testa refinamento da bola isoladora em precisão maior"""
    (root,) = [r for r in roots(X ** 3 - 2) if r.is_real()]
    refined = root.refined(400)
    assert refined.prec == 400
    assert refined.ball.real.rad() < root.ball.real.rad()
    assert refined.same_as(root)


def test_compare_modulus_equal_for_conjugates():
    """Testa |φ| = |φ̄| para raízes complexas conjugadas"""
    a, b = roots(X ** 2 + 14 * X + 81)
    assert compare_modulus(a, b) == 0


def test_compare_modulus_rational_and_algebraic():
    """Testa |1/4| > |3 − 2√2| ≈ 0.17"""
    quarter = AlgebraicNumber.rational(fmpq(1, 4))
    small = min(roots(X ** 2 - 6 * X + 1), key=lambda r: float(r.enclosure().real.mid()))
    assert compare_modulus(quarter, small) == 1
    assert compare_modulus(small, quarter) == -1
    assert compare_modulus(quarter, AlgebraicNumber.rational(fmpq(-1, 4))) == 0


def test_compare_modulus_exact_tie_across_fields():
    """Testa empate exato |i| = |1| entre corpos diferentes"""
    (i_unit, _) = roots(X ** 2 + 1)
    one = AlgebraicNumber.rational(1)
    assert compare_modulus(i_unit, one) == 0


class TestNumberField:
    """Testes da aritmética exata em ℚ(√2)"""

    @pytest.fixture
    def field(self):
        """Corpo ℚ(√2) com o gerador positivo"""
        gen = max(roots(X ** 2 - 2), key=lambda r: float(r.enclosure().real.mid()))
        return NumberField(gen)

    def test_arithmetic(self, field):
        """Testa (1 + √2)(−1 + √2) = 1 e inversos"""
        s = field.gen()
        assert (1 + s) * (s - 1) == field.one()
        assert (1 + s).inverse() == s - 1
        assert s ** 2 == field.element(2)
        assert s ** -2 == field.element(fmpq(1, 2))

    def test_ball(self, field):
        """Testa a envoltória numérica de 3 − 2√2"""
        value = (3 - 2 * field.gen()).ball()
        assert value.real.overlaps(3 - 2 * arb(2).sqrt())

    def test_rational_detection(self, field):
        """Testa reconhecimento de inteiros racionais"""
        s = field.gen()
        assert is_rational_integer(s * s) == 2
        assert is_rational_integer(s) is None
        assert is_rational_integer(field.element(fmpq(1, 2))) is None

    def test_zero_inverse(self, field):
        """Testa inverso de zero"""
        with pytest.raises(ZeroDivisionError):
            field.zero().inverse()

    def test_kpoly_operations(self, field):
        """Testa produto, divisão e mdc de polinômios sobre K"""
        s = field.gen()
        one = field.one()
        a = [-s, one]  # θ − √2
        b = [s, one]  # θ + √2
        product = kpoly_mul(field, a, b)  # θ² − 2
        assert [c == field.element(v) for c, v in zip(product, (-2, 0, 1))] == [True] * 3
        q, r = kpoly_divmod(field, product, a)
        assert r == []
        assert q[0] == s and q[1] == one
        assert kpoly_gcd(field, product, a)[0] == -s
        assert kpoly_eval(product, s).is_zero()
        assert kpoly_eval(product, acb(0)).overlaps(acb(-2))

    def test_shift_and_norm(self, field):
        """Testa p(θ + 1) e a norma Res_x"""
        s = field.gen()
        p = [-s, field.one()]
        shifted = kpoly_shift(field, p, 1)
        assert shifted[0] == 1 - s
        norm = kpoly_norm(field, p)
        assert norm == Poly(sympy.Symbol("theta") ** 2 - 2, sympy.Symbol("theta"), domain=QQ)

    def test_squarefree_decomposition(self, field):
        """Testa (θ − √2)²(θ + 1)"""
        s = field.gen()
        one = field.one()
        f = kpoly_mul(field, kpoly_mul(field, [-s, one], [-s, one]), [one, one])
        parts = squarefree_decomposition(field, f)
        multiplicities = sorted(m for _, m in parts)
        assert multiplicities == [1, 2]
        double = next(p for p, m in parts if m == 2)
        assert double[0] == -s
