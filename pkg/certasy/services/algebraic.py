"""
Números algébricos isolados, corpos de números ℚ(ρ) e comparação exata
de módulos.

Um número algébrico é o par (polinômio mínimo primitivo sobre ℤ, bola
isoladora). As decisões estruturais (igualdade de módulos, diferenças
inteiras entre expoentes) são feitas de forma exata com sympy; as bolas
servem para identificar raízes e acelerar comparações.
"""
import logging
from functools import lru_cache
from math import lcm
from typing import List, Optional, Sequence, Tuple

import sympy
from flint import acb, arb, ctx, fmpq, fmpz_poly
from pydantic import BaseModel, ConfigDict
from sympy import Poly, QQ, Symbol

from certasy.config import settings
from certasy.exceptions import MathematicalFailure
from certasy.services.ball_arith import workprec

logger = logging.getLogger(__name__)

X = Symbol("x")
T = Symbol("t")
THETA = Symbol("theta")


class RootIsolationFailure(MathematicalFailure):
    """Não foi possível isolar ou identificar uma raiz até o teto de precisão"""
    pass


def to_rational(value) -> sympy.Rational:
    """fmpq/int para sympy.Rational."""
    if isinstance(value, fmpq):
        return sympy.Rational(int(value.p), int(value.q))
    return sympy.Rational(value)


def from_rational(value) -> fmpq:
    """sympy.Rational para fmpq."""
    value = sympy.Rational(value)
    return fmpq(int(value.p), int(value.q))


def integer_coefficients(poly: Poly) -> Tuple[int, ...]:
    """Coeficientes inteiros primitivos, em potências crescentes, líder positivo."""
    coeffs = [sympy.Rational(c) for c in reversed(poly.all_coeffs())]
    denominator = lcm(*[int(c.q) for c in coeffs])
    ints = [int(c * denominator) for c in coeffs]
    g = 0
    for c in ints:
        g = sympy.igcd(g, c)
    ints = [c // g for c in ints]
    if ints[-1] < 0:
        ints = [-c for c in ints]
    return tuple(ints)


@lru_cache(maxsize=1024)
def isolated_roots(coeffs: Tuple[int, ...], prec: int) -> Tuple[acb, ...]:
    """
    Raízes complexas isoladas de um polinômio inteiro.

    As raízes reais vêm com parte imaginária exatamente zero.
    """
    with workprec(prec):
        roots = fmpz_poly(list(coeffs)).complex_roots()
    return tuple(r for r, _ in roots)


class AlgebraicNumber(BaseModel):
    """Raiz de um polinômio irredutível sobre ℚ, identificada por bola isoladora."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    minpoly: Tuple[int, ...]
    ball: acb
    prec: int

    @classmethod
    def rational(cls, value) -> "AlgebraicNumber":
        value = value if isinstance(value, fmpq) else fmpq(value)
        return cls(minpoly=(-int(value.p), int(value.q)), ball=acb(arb(value)), prec=ctx.prec)

    @classmethod
    def roots_of(cls, poly: Poly) -> List["AlgebraicNumber"]:
        """Todas as raízes distintas de um polinômio racional, por fator irredutível."""
        _, factors = sympy.factor_list(poly)
        result = []
        for factor, _ in factors:
            if factor.degree() < 1:
                continue
            coeffs = integer_coefficients(factor)
            for r in isolated_roots(coeffs, ctx.prec):
                result.append(cls(minpoly=coeffs, ball=r, prec=ctx.prec))
        return result

    @classmethod
    def identify(cls, poly: Poly, approx: acb) -> "AlgebraicNumber":
        """
        Raiz de `poly` contida em `approx`.

        Raises:
            RootIsolationFailure: Se nenhuma ou mais de uma raiz for compatível
        """
        candidates = [r for r in cls.roots_of(poly) if r.enclosure().overlaps(approx)]
        if len(candidates) != 1:
            raise RootIsolationFailure(f"{len(candidates)} raízes de {poly.as_expr()} compatíveis com {approx}")
        return candidates[0]

    @property
    def degree(self) -> int:
        return len(self.minpoly) - 1

    def is_rational(self) -> bool:
        return self.degree == 1

    def rational_value(self) -> fmpq:
        if not self.is_rational():
            raise ValueError(f"{self} não é racional")
        return fmpq(-self.minpoly[0], self.minpoly[1])

    def is_zero(self) -> bool:
        return self.minpoly == (0, 1)

    def is_real(self) -> bool:
        return self.is_rational() or self.ball.imag.is_zero()

    def sympy_poly(self) -> Poly:
        """Polinômio mínimo mônico em x sobre QQ."""
        return Poly(list(reversed(self.minpoly)), X, domain=QQ).monic()

    def same_as(self, other: "AlgebraicNumber") -> bool:
        """Igualdade exata: mesmo polinômio mínimo e mesma raiz."""
        if self.minpoly != other.minpoly:
            return False
        if self.is_rational():
            return True
        prec = max(ctx.prec, self.prec, other.prec)
        roots = isolated_roots(self.minpoly, prec)
        with workprec(prec):
            mine = [i for i, r in enumerate(roots) if r.overlaps(self.enclosure())]
            theirs = [i for i, r in enumerate(roots) if r.overlaps(other.enclosure())]
        if len(mine) != 1 or len(theirs) != 1:
            raise RootIsolationFailure(f"Identificação ambígua de {self} e {other}")
        return mine == theirs

    def enclosure(self) -> acb:
        """Bola isoladora na precisão corrente (refinada quando necessário)."""
        if self.is_rational():
            return acb(arb(self.rational_value()))
        if ctx.prec <= self.prec:
            return self.ball
        roots = isolated_roots(self.minpoly, ctx.prec)
        candidates = [r for r in roots if r.overlaps(self.ball)]
        if len(candidates) != 1:
            candidates = [r for r in candidates if self.ball.contains(r.mid())]
        if len(candidates) != 1:
            raise RootIsolationFailure(f"Refinamento ambíguo de {self.minpoly} em {self.ball}")
        return candidates[0]

    def refined(self, prec: int) -> "AlgebraicNumber":
        if prec <= self.prec:
            return self
        with workprec(prec):
            ball = self.enclosure()
        return AlgebraicNumber(minpoly=self.minpoly, ball=ball, prec=prec)

    def conjugate(self) -> "AlgebraicNumber":
        return AlgebraicNumber(minpoly=self.minpoly, ball=self.ball.conjugate(), prec=self.prec)

    def modulus(self) -> arb:
        return abs(self.enclosure())

    def argument(self) -> arb:
        return self.enclosure().arg()

    def describe(self) -> str:
        """Forma exata para grau ≤ 2, senão descrição pela raiz isolada."""
        if self.is_rational():
            q = self.rational_value()
            return str(q.p) if q.q == 1 else f"{q.p}/{q.q}"
        if self.degree == 2:
            approx = complex(float(self.ball.real.mid()), float(self.ball.imag.mid()))
            exprs = sympy.roots(self.sympy_poly().as_expr(), X)
            best = min(exprs, key=lambda e: abs(complex(sympy.N(e, 30)) - approx))
            return sympy.sstr(sympy.nsimplify(best))
        poly = sympy.sstr(Poly(list(reversed(self.minpoly)), X).as_expr())
        return f"root of {poly} near {self.ball.str(10, radius=False)}"

    def __repr__(self) -> str:
        return f"AlgebraicNumber({self.describe()})"

    __str__ = __repr__


@lru_cache(maxsize=256)
def _modulus_square_poly(minpoly: Tuple[int, ...]) -> Poly:
    """Polinômio com raiz |a|² para toda raiz a de minpoly: Res_x(m(x), x^d m(t/x))."""
    d = len(minpoly) - 1
    m = sum(c * X ** i for i, c in enumerate(minpoly))
    reciprocal = sum(c * T ** i * X ** (d - i) for i, c in enumerate(minpoly))
    res = sympy.resultant(m, reciprocal, X)
    return Poly(res, T, domain=QQ)


def modulus_square_poly(a: AlgebraicNumber) -> Poly:
    if a.is_rational():
        q = to_rational(a.rational_value())
        return Poly(T - q * q, T, domain=QQ)
    return _modulus_square_poly(a.minpoly)


def compare_modulus(a: AlgebraicNumber, b: AlgebraicNumber) -> int:
    """
    Compara |a| e |b| exatamente.

    Returns:
        -1, 0 ou 1 conforme |a| <, =, > |b|

    Raises:
        RootIsolationFailure: Se o teto de precisão for atingido
    """
    if a.is_rational() and b.is_rational():
        qa, qb = abs(a.rational_value()), abs(b.rational_value())
        return (qa > qb) - (qa < qb)
    product = (modulus_square_poly(a) * modulus_square_poly(b)).sqf_part()
    coeffs = integer_coefficients(product)
    prec = max(ctx.prec, a.prec, b.prec)
    while prec <= settings.MAX_PRECISION_BITS:
        with workprec(prec):
            ma = abs(a.enclosure()) ** 2
            mb = abs(b.enclosure()) ** 2
            if ma < mb:
                return -1
            if ma > mb:
                return 1
            reals = [r.real for r in isolated_roots(coeffs, prec) if r.imag.is_zero()]
            ia = [i for i, r in enumerate(reals) if r.overlaps(ma)]
            ib = [i for i, r in enumerate(reals) if r.overlaps(mb)]
            if len(ia) == 1 and len(ib) == 1:
                if ia == ib:
                    return 0
                ra, rb = reals[ia[0]], reals[ib[0]]
                if ra < rb:
                    return -1
                if ra > rb:
                    return 1
        prec *= 2
    raise RootIsolationFailure(f"Comparação de módulos indecidida entre {a} e {b}")


class NumberField:
    """ℚ(ρ) representado pela base de potências de ℚ[x]/(m)."""

    __slots__ = ("generator", "minpoly", "_balls")

    def __init__(self, generator: AlgebraicNumber):
        self.generator = generator
        self.minpoly = generator.sympy_poly()
        self._balls = {}

    @property
    def degree(self) -> int:
        return self.minpoly.degree()

    def generator_ball(self) -> acb:
        prec = ctx.prec
        if prec not in self._balls:
            self._balls[prec] = self.generator.enclosure()
        return self._balls[prec]

    def element(self, value) -> "NumberFieldElement":
        if isinstance(value, NumberFieldElement):
            return value
        if isinstance(value, Poly):
            return NumberFieldElement(self, value.rem(self.minpoly))
        if isinstance(value, fmpq):
            value = to_rational(value)
        expr = sympy.sympify(value)
        return NumberFieldElement(self, Poly(expr, X, domain=QQ).rem(self.minpoly))

    def zero(self) -> "NumberFieldElement":
        return self.element(0)

    def one(self) -> "NumberFieldElement":
        return self.element(1)

    def gen(self) -> "NumberFieldElement":
        return self.element(X)

    def __repr__(self) -> str:
        return f"NumberField({self.generator.describe()})"


class NumberFieldElement:
    """Elemento exato de ℚ(ρ)."""

    __slots__ = ("field", "poly")

    def __init__(self, field: NumberField, poly: Poly):
        self.field = field
        self.poly = poly

    def _coerce(self, other) -> "NumberFieldElement":
        if isinstance(other, NumberFieldElement):
            return other
        return self.field.element(other)

    def __add__(self, other):
        return NumberFieldElement(self.field, self.poly + self._coerce(other).poly)

    __radd__ = __add__

    def __neg__(self):
        return NumberFieldElement(self.field, -self.poly)

    def __sub__(self, other):
        return NumberFieldElement(self.field, self.poly - self._coerce(other).poly)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        product = (self.poly * self._coerce(other).poly).rem(self.field.minpoly)
        return NumberFieldElement(self.field, product)

    __rmul__ = __mul__

    def inverse(self) -> "NumberFieldElement":
        if self.is_zero():
            raise ZeroDivisionError("Inverso de zero em ℚ(ρ)")
        return NumberFieldElement(self.field, self.poly.invert(self.field.minpoly))

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __pow__(self, n: int):
        result = self.field.one()
        base = self if n >= 0 else self.inverse()
        for _ in range(abs(n)):
            result = result * base
        return result

    def __eq__(self, other) -> bool:
        try:
            return (self - other).is_zero()
        except (TypeError, sympy.SympifyError):
            return False

    def __hash__(self) -> int:
        return hash(tuple(self.poly.all_coeffs()))

    def is_zero(self) -> bool:
        return self.poly.is_zero

    def is_rational(self) -> bool:
        return self.poly.degree() <= 0

    def rational(self) -> fmpq:
        if not self.is_rational():
            raise ValueError(f"{self} não é racional")
        return from_rational(self.poly.coeff_monomial(1))

    def ball(self) -> acb:
        """Envoltória na precisão corrente."""
        coeffs = self.poly.all_coeffs()
        if self.poly.is_zero:
            return acb(0)
        gen = self.field.generator_ball()
        total = acb(0)
        for c in coeffs:
            total = total * gen + acb(arb(from_rational(c)))
        return total

    def conjugate_ball(self) -> acb:
        return self.ball().conjugate()

    def __repr__(self) -> str:
        return f"[{sympy.sstr(self.poly.as_expr())}]"


KPoly = List[NumberFieldElement]


def kpoly_trim(p: Sequence[NumberFieldElement]) -> KPoly:
    p = list(p)
    while p and p[-1].is_zero():
        p.pop()
    return p


def kpoly_degree(p: Sequence[NumberFieldElement]) -> int:
    return len(kpoly_trim(p)) - 1


def kpoly_add(field: NumberField, a: KPoly, b: KPoly) -> KPoly:
    n = max(len(a), len(b))
    zero = field.zero()
    return kpoly_trim([(a[i] if i < len(a) else zero) + (b[i] if i < len(b) else zero) for i in range(n)])


def kpoly_scale(p: KPoly, c) -> KPoly:
    return kpoly_trim([x * c for x in p])


def kpoly_mul(field: NumberField, a: KPoly, b: KPoly) -> KPoly:
    if not a or not b:
        return []
    out = [field.zero() for _ in range(len(a) + len(b) - 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x * y
    return kpoly_trim(out)


def kpoly_divmod(field: NumberField, a: KPoly, b: KPoly) -> Tuple[KPoly, KPoly]:
    b = kpoly_trim(b)
    if not b:
        raise ZeroDivisionError("Divisão por polinômio nulo")
    r = kpoly_trim(a)
    q = [field.zero() for _ in range(max(len(r) - len(b) + 1, 0))]
    lead_inv = b[-1].inverse()
    while len(r) >= len(b):
        shift = len(r) - len(b)
        c = r[-1] * lead_inv
        q[shift] = c
        for i, y in enumerate(b):
            r[shift + i] = r[shift + i] - c * y
        r = kpoly_trim(r)
    return kpoly_trim(q), r


def kpoly_monic(p: KPoly) -> KPoly:
    p = kpoly_trim(p)
    inv = p[-1].inverse()
    return [x * inv for x in p]


def kpoly_gcd(field: NumberField, a: KPoly, b: KPoly) -> KPoly:
    a, b = kpoly_trim(a), kpoly_trim(b)
    while b:
        _, r = kpoly_divmod(field, a, b)
        a, b = b, r
    return kpoly_monic(a) if a else []


def kpoly_derivative(p: KPoly) -> KPoly:
    return kpoly_trim([p[i] * i for i in range(1, len(p))])


def kpoly_shift(field: NumberField, p: KPoly, c) -> KPoly:
    """p(θ + c)."""
    result: KPoly = []
    linear = [field.element(c), field.one()]
    for coeff in reversed(p):
        result = kpoly_add(field, kpoly_mul(field, result, linear), [coeff])
    return result


def kpoly_eval(p: KPoly, point):
    """Avaliação de Horner; point pode ser elemento de K ou bola."""
    if isinstance(point, acb):
        total = acb(0)
        for c in reversed(p):
            total = total * point + c.ball()
        return total
    total = None
    for c in reversed(p):
        total = c if total is None else total * point + c
    return total


def kpoly_norm(field: NumberField, p: KPoly) -> Poly:
    """Res_x(m(x), p(θ, x)): polinômio racional em θ que se anula nas raízes de p."""
    expr = sum(c.poly.as_expr() * THETA ** i for i, c in enumerate(p))
    if field.degree == 1:
        return Poly(expr.subs(X, to_rational(field.generator.rational_value())), THETA, domain=QQ)
    res = sympy.resultant(field.minpoly.as_expr(), expr, X)
    return Poly(res, THETA, domain=QQ)


def squarefree_decomposition(field: NumberField, f: KPoly) -> List[Tuple[KPoly, int]]:
    """
    Decomposição livre de quadrados de Yun sobre K.

    Returns:
        Lista de (fator mônico livre de quadrados, multiplicidade)
    """
    f = kpoly_monic(f)
    df = kpoly_derivative(f)
    a0 = kpoly_gcd(field, f, df)
    b, _ = kpoly_divmod(field, f, a0)
    c, _ = kpoly_divmod(field, df, a0)
    d = kpoly_add(field, c, kpoly_scale(kpoly_derivative(b), -1))
    result = []
    i = 1
    while len(b) > 1:
        a = kpoly_gcd(field, b, d)
        b, _ = kpoly_divmod(field, b, a)
        c, _ = kpoly_divmod(field, d, a)
        d = kpoly_add(field, c, kpoly_scale(kpoly_derivative(b), -1))
        if len(a) > 1:
            result.append((a, i))
        i += 1
    return result


def is_rational_integer(value: NumberFieldElement) -> Optional[int]:
    if not value.is_rational():
        return None
    q = value.rational()
    return int(q.p) if q.q == 1 else None
