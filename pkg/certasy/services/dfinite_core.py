"""
Operadores diferenciais e recorrências sobre ℚ.

Conversão operador → recorrência (e a volta), desenrolamento exato da
recorrência, conjunto singular com comparação exata de módulos,
classificação de pontos, forma local do operador em θ = t·d/dt e análise
dos expoentes locais (classes módulo ℤ e multiplicidades).
"""
import logging
from functools import lru_cache
from math import lcm
from typing import List, Literal, Optional, Sequence, Tuple

import sympy
from flint import acb, arb, ctx, fmpq, fmpq_poly
from pydantic import BaseModel, ConfigDict, field_validator
from sympy import Poly, QQ, Symbol
from sympy.functions.combinatorial.numbers import stirling

from certasy.config import settings
from certasy.exceptions import InputError, MathematicalFailure
from certasy.services.algebraic import (
    THETA,
    X,
    AlgebraicNumber,
    KPoly,
    NumberField,
    NumberFieldElement,
    RootIsolationFailure,
    compare_modulus,
    from_rational,
    integer_coefficients,
    isolated_roots,
    kpoly_eval,
    kpoly_norm,
    kpoly_trim,
    modulus_square_poly,
    squarefree_decomposition,
    to_rational,
)
from certasy.services.ball_arith import workprec

logger = logging.getLogger(__name__)

Z = Symbol("z")
N = Symbol("n")

PointKind = Literal["ordinary", "regular", "irregular"]


class InsufficientInitialTerms(InputError):
    """Termos iniciais insuficientes para determinar a sequência"""
    pass


class InconsistentInitialTerms(InputError):
    """Termos iniciais incompatíveis com a recorrência"""
    pass


class LeadingCoefficientZero(InputError):
    """O coeficiente líder se anula num índice não coberto pelos termos dados"""
    pass


class IrregularPoint(MathematicalFailure):
    """Ponto singular irregular"""
    pass


class UndecidableOrdering(MathematicalFailure):
    """Expoentes com partes reais iguais que as bolas não conseguem ordenar"""
    pass


def to_sympy_poly(p: fmpq_poly, var: Symbol) -> Poly:
    coeffs = [to_rational(c) for c in p.coeffs()]
    if not coeffs:
        return Poly(0, var, domain=QQ)
    return Poly(list(reversed(coeffs)), var, domain=QQ)


def from_sympy_poly(poly: Poly) -> fmpq_poly:
    if poly.is_zero:
        return fmpq_poly([])
    return fmpq_poly([from_rational(c) for c in reversed(poly.all_coeffs())])


def _horner(coeffs: Sequence[fmpq], n) -> fmpq:
    total = fmpq(0)
    for c in reversed(coeffs):
        total = total * n + c
    return total


class DiffOp(BaseModel):
    """Operador Σ_j p_j(z) (d/dz)^j com coeficientes racionais."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coeffs: Tuple[fmpq_poly, ...]

    @field_validator("coeffs")
    @classmethod
    def validate_coeffs(cls, v):
        if len(v) < 2:
            raise ValueError("O operador precisa ter ordem ≥ 1")
        if v[-1].degree() < 0:
            raise ValueError("O coeficiente líder p_q não pode ser nulo")
        return v

    @classmethod
    def from_rationals(cls, rows: Sequence[Sequence]) -> "DiffOp":
        """Constrói a partir de listas de racionais em potências crescentes de z."""
        return cls(coeffs=tuple(fmpq_poly([fmpq(c) if isinstance(c, int) else c for c in row]) for row in rows))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def leading(self) -> fmpq_poly:
        return self.coeffs[-1]

    def sympy_coeffs(self) -> Tuple[Poly, ...]:
        return tuple(to_sympy_poly(p, Z) for p in self.coeffs)

    def shifted_coeffs(self, center: acb) -> List[List[acb]]:
        """Coeficientes de p_j(center + δ) em potências crescentes de δ, em bolas."""
        result = []
        for p in self.coeffs:
            coeffs = [acb(arb(c)) for c in p.coeffs()]
            # deslocamento de Taylor por Horner
            shifted: List[acb] = []
            for c in reversed(coeffs):
                out = [acb(0)] * (len(shifted) + 1)
                for i, s in enumerate(shifted):
                    out[i] += s * center
                    out[i + 1] += s
                out[0] += c
                shifted = out
            result.append(shifted)
        return result

    def __repr__(self) -> str:
        terms = " + ".join(f"({sympy.sstr(p.as_expr())})*D^{j}" for j, p in enumerate(self.sympy_coeffs()))
        return f"DiffOp({terms})"


class Recurrence(BaseModel):
    """Recorrência Σ_k c_k(n) f_{n+k} = 0, válida para n ≥ start."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coeffs: Tuple[fmpq_poly, ...]
    start: int = 0

    @field_validator("coeffs")
    @classmethod
    def validate_coeffs(cls, v):
        if not v or v[-1].degree() < 0:
            raise ValueError("O coeficiente líder c_r não pode ser nulo")
        return v

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def sympy_coeffs(self) -> Tuple[Poly, ...]:
        return tuple(to_sympy_poly(c, N) for c in self.coeffs)

    def leading_integer_roots(self) -> List[int]:
        """Raízes inteiras n ≥ start do coeficiente líder, em ordem crescente."""
        roots = []
        _, factors = sympy.factor_list(to_sympy_poly(self.coeffs[-1], N))
        for factor, _ in factors:
            if factor.degree() != 1:
                continue
            a, b = factor.all_coeffs()
            root = -b / a
            if root.is_integer and root >= self.start:
                roots.append(int(root))
        return sorted(set(roots))

    def required_terms(self) -> int:
        """Quantidade de termos iniciais que determina a sequência."""
        nonnegative = [m for m in self.leading_integer_roots() if m >= 0]
        if not nonnegative:
            return self.order
        return self.order + max(nonnegative) + 1

    def evaluate(self, k: int, n: int) -> fmpq:
        return _horner(self.coeffs[k].coeffs(), n)

    def __repr__(self) -> str:
        terms = " + ".join(f"({sympy.sstr(c.as_expr())})*f(n+{k})" for k, c in enumerate(self.sympy_coeffs()))
        return f"Recurrence({terms}, n ≥ {self.start})"


def _normalize(polys: List[Poly], start: int) -> List[Poly]:
    """Remove fatores comuns sem raízes inteiras ≥ start e torna os coeficientes inteiros primitivos."""
    common = polys[0]
    for p in polys[1:]:
        common = common.gcd(p)
    if common.degree() > 0:
        _, factors = sympy.factor_list(common)
        for factor, multiplicity in factors:
            keep = False
            if factor.degree() == 1:
                a, b = factor.all_coeffs()
                root = -b / a
                keep = bool(root.is_integer and root >= start)
            if not keep:
                divisor = factor ** multiplicity
                polys = [p.exquo(divisor) for p in polys]
    denominators = [int(sympy.Rational(c).q) for p in polys for c in p.all_coeffs()]
    scale = lcm(*denominators)
    polys = [p * scale for p in polys]
    content = 0
    for p in polys:
        for c in p.all_coeffs():
            content = sympy.igcd(content, int(c))
    if polys[-1].LC() < 0:
        content = -content
    return [Poly(p.as_expr() / content, N, domain=QQ) for p in polys]


def diffop_to_recurrence(op: DiffOp) -> Recurrence:
    """
    Recorrência satisfeita pelos coeficientes das soluções em série de potências.

    O termo a·z^i·D^j contribui a·(n+k)^(j descendente) a c_k com k = j − i − s_min.
    """
    pairs = [
        (j, i, to_rational(c))
        for j, p in enumerate(op.coeffs)
        for i, c in enumerate(p.coeffs())
        if c != 0
    ]
    s_min = min(j - i for j, i, _ in pairs)
    s_max = max(j - i for j, i, _ in pairs)
    exprs = [sympy.Integer(0)] * (s_max - s_min + 1)
    for j, i, a in pairs:
        k = j - i - s_min
        exprs[k] += a * sympy.prod([N + k - l for l in range(j)])
    polys = [Poly(sympy.expand(e), N, domain=QQ) for e in exprs]
    while polys and polys[-1].is_zero:
        polys.pop()
    while polys and polys[0].is_zero:
        polys = [Poly(p.as_expr().subs(N, N + 1), N, domain=QQ) for p in polys[1:]]
        s_min += 1
    start = min(s_min, 0)
    polys = _normalize(polys, start)
    rec = Recurrence(coeffs=tuple(from_sympy_poly(p) for p in polys), start=start)
    logger.debug(f"Recorrência de ordem {rec.order} obtida do operador de ordem {op.order}")
    return rec


def recurrence_to_diffop(rec: Recurrence) -> DiffOp:
    """
    Operador cujas soluções em série têm coeficientes que satisfazem a recorrência.

    L = Σ_k z^(r−k) Π_{j<r}(θ + r − k − j) c_k(θ − k), com θ^m = Σ S(m, j) z^j D^j.
    """
    theta = Symbol("theta")
    r = rec.order
    rows: dict = {}
    for k, c in enumerate(rec.sympy_coeffs()):
        if c.is_zero:
            continue
        factor = sympy.prod([theta + r - k - j for j in range(r)])
        poly = Poly(sympy.expand(factor * c.as_expr().subs(N, theta - k)), theta, domain=QQ)
        for (m,), a in poly.terms():
            for j in range(m + 1):
                s = stirling(m, j)
                if s:
                    rows[j] = rows.get(j, 0) + a * s * Z ** (r - k + j)
    order = max(rows)
    polys = [Poly(sympy.expand(rows.get(j, 0)), Z, domain=QQ) for j in range(order + 1)]
    shift = min(min(m for (m,) in p.monoms()) for p in polys if not p.is_zero)
    if shift:
        polys = [p.exquo(Poly(Z ** shift, Z, domain=QQ)) if not p.is_zero else p for p in polys]
    return DiffOp(coeffs=tuple(from_sympy_poly(p) for p in polys))


def unroll_recurrence(rec: Recurrence, initial: Sequence, count: int) -> List[fmpq]:
    """
    Desenrola a recorrência exatamente.

    Args:
        rec: Recorrência
        initial: Termos iniciais f_0, f_1, ... (racionais)
        count: Último índice pedido N; retorna f_0..f_N

    Raises:
        InsufficientInitialTerms: Se faltam termos para determinar a sequência
        InconsistentInitialTerms: Se um termo dado contradiz a recorrência
        LeadingCoefficientZero: Se c_r(n) = 0 num índice não coberto
    """
    given = [fmpq(v) if isinstance(v, int) else v for v in initial]
    required = rec.required_terms()
    if len(given) < min(required, count + 1):
        raise InsufficientInitialTerms(
            f"São necessários {required} termos iniciais (f_0..f_{required - 1}); recebidos {len(given)}"
        )
    r = rec.order
    coeffs = [c.coeffs() for c in rec.coeffs]

    def residual(n: int, values: List[fmpq]) -> fmpq:
        total = fmpq(0)
        for k in range(r):
            idx = n + k
            if 0 <= idx < len(values):
                total += _horner(coeffs[k], n) * values[idx]
        return total

    values = list(given)
    for n in range(rec.start, 0):
        if n + r >= len(values):
            break
        rhs = residual(n, values) + _horner(coeffs[r], n) * values[n + r]
        if rhs != 0:
            raise InconsistentInitialTerms(f"A equação de índice n={n} não é satisfeita pelos termos dados")
    last = max(count, len(given) - 1)
    n = 0
    while n + r <= last:
        target = n + r
        rhs = -residual(n, values)
        lead = _horner(coeffs[r], n)
        if lead == 0:
            if target >= len(values):
                raise LeadingCoefficientZero(f"c_r({n}) = 0: o termo f_{target} precisa ser fornecido")
            if rhs != 0:
                raise InconsistentInitialTerms(f"A equação de índice n={n} não é satisfeita pelos termos dados")
        else:
            value = rhs / lead
            if target < len(values):
                if values[target] != value:
                    raise InconsistentInitialTerms(
                        f"f_{target} = {values[target]} difere do valor {value} imposto pela recorrência"
                    )
            else:
                values.append(value)
        n += 1
    return values[: count + 1]


class SingularSet(BaseModel):
    """Conjunto singular do operador e a parte dominante para f."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: Tuple[AlgebraicNumber, ...]
    analytic: Tuple[AlgebraicNumber, ...] = ()
    dominant: Tuple[AlgebraicNumber, ...] = ()
    extended: Tuple[AlgebraicNumber, ...] = ()
    modulus: Optional[arb] = None
    modulus_poly: Optional[Poly] = None

    def is_analytic(self, point: AlgebraicNumber) -> bool:
        return point.is_zero() or any(point.same_as(a) for a in self.analytic)

    def others(self, point: AlgebraicNumber) -> List[AlgebraicNumber]:
        return [p for p in self.points if not p.same_as(point)]


def singular_points(op: DiffOp, assume_analytic: Sequence[AlgebraicNumber] = ()) -> SingularSet:
    """
    Raízes de p_q, pontos dominantes (módulo mínimo fora de Ξᵃ ∪ {0}) e a parte estendida.

    Módulos são comparados de forma exata pelos polinômios de |ρ|².
    """
    lead = to_sympy_poly(op.leading(), Z)
    points = AlgebraicNumber.roots_of(lead)
    analytic = []
    for a in assume_analytic:
        if any(a.same_as(p) for p in points):
            analytic.append(a)
        else:
            logger.warning(f"Ponto {a} declarado analítico não é singular para o operador; ignorado")
    candidates = [p for p in points if not p.is_zero() and not any(p.same_as(a) for a in analytic)]
    dominant: List[AlgebraicNumber] = []
    for p in candidates:
        if not dominant:
            dominant = [p]
            continue
        cmp = compare_modulus(p, dominant[0])
        if cmp < 0:
            dominant = [p]
        elif cmp == 0:
            dominant.append(p)
    if not dominant:
        return SingularSet(points=tuple(points), analytic=tuple(analytic))
    dominant.sort(key=lambda p: float(p.ball.arg().mid()))
    extended = [p for p in points if compare_modulus(p, dominant[0]) <= 0]
    logger.info(
        f"Singularidades: {[p.describe() for p in points]}; dominantes: {[p.describe() for p in dominant]}"
    )
    return SingularSet(
        points=tuple(points),
        analytic=tuple(analytic),
        dominant=tuple(dominant),
        extended=tuple(extended),
        modulus=dominant[0].modulus(),
        modulus_poly=modulus_square_poly(dominant[0]),
    )


def _valuation(poly: Poly, minpoly: Poly) -> Optional[int]:
    """Multiplicidade de minpoly como fator de poly (None para poly nulo)."""
    if poly.is_zero:
        return None
    v = 0
    while True:
        q, r = poly.div(minpoly)
        if not r.is_zero:
            return v
        poly, v = q, v + 1


def _valuations(op: DiffOp, point: AlgebraicNumber) -> List[Optional[int]]:
    minpoly = point.sympy_poly().as_expr().subs(X, Z)
    minpoly = Poly(minpoly, Z, domain=QQ)
    return [_valuation(p, minpoly) for p in op.sympy_coeffs()]


def classify_point(op: DiffOp, point: AlgebraicNumber) -> PointKind:
    """Ordinário, singular regular ou irregular, por valuações exatas."""
    vals = _valuations(op, point)
    q = op.order
    if vals[q] == 0:
        return "ordinary"
    for j, v in enumerate(vals[:q]):
        if v is not None and vals[q] - v > q - j:
            return "irregular"
    return "regular"


@lru_cache(maxsize=None)
def falling_factorial_coeffs(j: int) -> Tuple[int, ...]:
    """Coeficientes de θ(θ−1)···(θ−j+1) em potências crescentes de θ."""
    return tuple(int(stirling(j, i, kind=1, signed=True)) for i in range(j + 1))


class LocalOperator(BaseModel):
    """
    Forma local Σ_k t^k Q_k(θ) do operador em ρ, com θ = t·d/dt.

    Para ρ ≠ 0, t = 1 − z/ρ e o logaritmo local é L = log(1/t) (σ = −1);
    para ρ = 0, t = z e L = log t (σ = +1).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    point: AlgebraicNumber
    field: NumberField
    h: NumberFieldElement
    sigma: int
    order: int
    kind: PointKind
    q_coeffs: Tuple[Tuple[NumberFieldElement, ...], ...]

    def indicial(self) -> KPoly:
        return list(self.q_coeffs[0])

    def leading_coefficient(self, k: int) -> NumberFieldElement:
        """Coeficiente de θ^q em Q_k."""
        qk = self.q_coeffs[k] if k < len(self.q_coeffs) else ()
        return qk[self.order] if len(qk) > self.order else self.field.zero()

    def q_balls(self) -> List[List[acb]]:
        """Q_k com coeficientes em bolas, na precisão corrente."""
        rows = []
        for qk in self.q_coeffs:
            row = [c.ball() for c in qk]
            rows.append(row + [acb(0)] * (self.order + 1 - len(row)))
        return rows


def local_operator(op: DiffOp, point: AlgebraicNumber) -> LocalOperator:
    """
    Operador localizado em ρ.

    Raises:
        IrregularPoint: Se ρ for singular irregular
    """
    kind = classify_point(op, point)
    if kind == "irregular":
        raise IrregularPoint(f"O ponto {point.describe()} é singular irregular")
    field = NumberField(point)
    gen = field.gen()
    t = Symbol("t")
    if point.is_zero():
        h, sigma = field.one(), 1
        h_expr = sympy.Integer(1)
    else:
        h, sigma = -gen, -1
        h_expr = -X
    h_inv = h.inverse()
    q = op.order
    local_rows: List[List[NumberFieldElement]] = []
    for j, p in enumerate(op.sympy_coeffs()):
        expr = sympy.expand(p.as_expr().subs(Z, X + h_expr * t))
        poly_t = Poly(expr, t)
        row: List[NumberFieldElement] = []
        if not poly_t.is_zero:
            row = [field.zero() for _ in range(poly_t.degree() + 1)]
            for (i,), c in poly_t.terms():
                row[i] = field.element(Poly(c, X, domain=QQ)) * (h_inv ** j)
        local_rows.append(kpoly_trim(row))
    vals = [next((i for i, c in enumerate(row) if not c.is_zero()), None) for row in local_rows]
    shift = vals[q] - q
    degree = max(len(row) for row in local_rows)
    q_coeffs = []
    for k in range(degree - shift):
        poly = [field.zero() for _ in range(q + 1)]
        for j, row in enumerate(local_rows):
            idx = k + shift + j
            if 0 <= idx < len(row) and not row[idx].is_zero():
                for i, s in enumerate(falling_factorial_coeffs(j)):
                    if s:
                        poly[i] = poly[i] + row[idx] * s
        q_coeffs.append(tuple(poly))
    while len(q_coeffs) > 1 and all(c.is_zero() for c in q_coeffs[-1]):
        q_coeffs.pop()
    return LocalOperator(
        point=point,
        field=field,
        h=h,
        sigma=sigma,
        order=q,
        kind=kind,
        q_coeffs=tuple(q_coeffs),
    )


def indicial_polynomial(op: DiffOp, point: AlgebraicNumber) -> KPoly:
    """
    Polinômio indicial Q_0(θ) sobre ℚ(ρ).

    Raises:
        IrregularPoint: Se ρ for singular irregular
    """
    return kpoly_trim(local_operator(op, point).indicial())


class Exponent(BaseModel):
    """Expoente local ν (algébrico sobre ℚ) com sua multiplicidade como raiz indicial."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    value: AlgebraicNumber
    multiplicity: int

    def is_exact_rational(self) -> bool:
        return self.value.is_rational()

    def ball(self) -> acb:
        return self.value.enclosure()


class ExponentClass(BaseModel):
    """Expoentes que diferem por inteiros: base ν0 e deslocamentos com multiplicidades."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    base: AlgebraicNumber
    members: Tuple[Tuple[int, int], ...]

    @property
    def max_offset(self) -> int:
        return max(m for m, _ in self.members)

    def multiplicity_at(self, offset: int) -> int:
        return sum(mu for m, mu in self.members if m == offset)

    def exponents(self) -> List[Exponent]:
        result = []
        for m, mu in self.members:
            value = self.base if m == 0 else _shift_algebraic(self.base, m)
            result.append(Exponent(value=value, multiplicity=mu))
        return result


def _shift_poly(coeffs: Tuple[int, ...], m: int) -> Tuple[int, ...]:
    """Coeficientes de g(θ − m)."""
    poly = Poly(list(reversed(coeffs)), THETA).as_expr().subs(THETA, THETA - m)
    return integer_coefficients(Poly(sympy.expand(poly), THETA, domain=QQ))


def _shift_algebraic(value: AlgebraicNumber, m: int) -> AlgebraicNumber:
    return AlgebraicNumber(minpoly=_shift_poly(value.minpoly, m), ball=value.ball + m, prec=value.prec)


def integer_difference(a: AlgebraicNumber, b: AlgebraicNumber) -> Optional[int]:
    """b − a quando for um inteiro (decidido exatamente), senão None."""
    diff = b.enclosure() - a.enclosure()
    if not diff.imag.contains(0):
        return None
    low = diff.real.lower()
    high = diff.real.upper()
    if not (high - low < 4):
        return None
    lo, hi = int(float(low.floor().mid())), int(float(high.ceil().mid()))
    candidates = [m for m in range(lo, hi + 1) if diff.real.contains(m)]
    for m in candidates:
        if _shift_poly(a.minpoly, m) != b.minpoly:
            continue
        if _shift_algebraic(a, m).same_as(b):
            return m
    return None


def _sort_key(value: AlgebraicNumber) -> Tuple[float, float]:
    ball = value.enclosure()
    return float(ball.real.mid()), -float(ball.imag.mid())


def exponent_roots(field: NumberField, indicial: KPoly, strict: bool = False) -> List[ExponentClass]:
    """
    Raízes do polinômio indicial agrupadas em classes módulo ℤ.

    Returns:
        Classes ordenadas pela parte real da base

    Raises:
        RootIsolationFailure: Se as raízes não puderem ser isoladas
        UndecidableOrdering: Em modo estrito, quando duas classes não conjugadas
            têm partes reais que as bolas não separam
    """
    roots: List[Tuple[AlgebraicNumber, int]] = []
    for factor, mu in squarefree_decomposition(field, indicial):
        degree = len(factor) - 1
        norm = kpoly_norm(field, factor)
        prec = ctx.prec
        while True:
            with workprec(prec):
                found = []
                for beta in AlgebraicNumber.roots_of(norm):
                    if kpoly_eval(factor, beta.enclosure()).contains(0):
                        found.append(beta)
            if len(found) == degree:
                break
            if prec > settings.MAX_PRECISION_BITS:
                raise RootIsolationFailure(f"Não foi possível separar as raízes de {factor}")
            prec *= 2
        roots.extend((beta, mu) for beta in found)

    classes: List[List[Tuple[AlgebraicNumber, int, int]]] = []
    for beta, mu in roots:
        placed = False
        for cls in classes:
            ref = cls[0][0]
            m = integer_difference(ref, beta)
            if m is not None:
                cls.append((beta, mu, cls[0][2] + m))
                placed = True
                break
        if not placed:
            classes.append([(beta, mu, 0)])

    result = []
    for cls in classes:
        low = min(offset for _, _, offset in cls)
        base = next(beta for beta, _, offset in cls if offset == low)
        members = tuple(sorted((offset - low, mu) for _, mu, offset in cls))
        result.append(ExponentClass(base=base, members=members))
    result.sort(key=lambda c: _sort_key(c.base))

    for a, b in zip(result, result[1:]):
        ra, rb = a.base.enclosure().real, b.base.enclosure().real
        if ra.overlaps(rb):
            conjugates = a.base.minpoly == b.base.minpoly and a.base.conjugate().same_as(b.base)
            if strict and not conjugates:
                raise UndecidableOrdering(
                    f"Não é possível ordenar {a.base.describe()} e {b.base.describe()} pela parte real"
                )
    return result
