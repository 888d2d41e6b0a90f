"""
Serviço de apresentação do limitante em texto e JSON
"""
import logging
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import sympy
from flint import acb, arb, fmpq

from certasy.schemas.result import (
    BallJSON,
    ComplexJSON,
    ErrorJSON,
    EvaluationJSON,
    MetadataJSON,
    PositivityJSON,
    ResultJSON,
    TermJSON,
)
from certasy.services.algebraic import AlgebraicNumber
from certasy.services.assembler import AsymptoticBound, AsymptoticTerm, PositivityCertificate
from certasy.utils.dyadic import exact_fmpq

logger = logging.getLogger(__name__)

OutputFormat = Literal["text", "json"]

# Dígitos exibidos no texto
BALL_DIGITS = 10
SHORT_DIGITS = 5


class Evaluation:
    """Valor de f_n: bola vinda do limitante e, se disponível, o valor exato."""

    def __init__(self, n: int, value: acb, exact: Optional[fmpq] = None):
        self.n = n
        self.value = value
        self.exact = exact


def _fraction(q: fmpq) -> str:
    return str(q.p) if q.q == 1 else f"{q.p}/{q.q}"


def exponent_text(term: AsymptoticTerm) -> str:
    """Expoente σ em forma exata quando o expoente base tem grau ≤ 2."""
    base = term.base
    if base is not None and base.is_rational():
        return _fraction(-base.rational_value() - 1 - term.shift)
    if base is not None and base.degree == 2:
        expr = -sympy.sympify(base.describe(), locals={"I": sympy.I}) - 1 - term.shift
        return sympy.sstr(sympy.expand(expr))
    return _complex_text(term.sigma, SHORT_DIGITS + 10)


def _ball_text(x: arb, digits: int = BALL_DIGITS) -> str:
    return x.str(digits, radius=True)


def _complex_text(z: acb, digits: int = BALL_DIGITS) -> str:
    """Parte imaginária só aparece quando certamente não nula."""
    if z.imag.is_zero() or z.imag.contains(0):
        return _ball_text(z.real, digits)
    return f"({_ball_text(z.real, digits)} + {_ball_text(z.imag, digits)}*I)"


def _power(base: str, exponent: str) -> str:
    if exponent == "0":
        return ""
    if exponent == "1":
        return base
    return f"{base}^({exponent})"


def _monomial_text(term: AsymptoticTerm, sign_flip: bool) -> str:
    factors = [_complex_text(term.coeff)]
    if sign_flip:
        factors.insert(0, "(-1)^n")
    n_power = _power("n", exponent_text(term))
    if n_power:
        factors.append(n_power)
    if term.k:
        factors.append(_power("log(n)", str(term.k)))
    return "*".join(factors)


def _rho_text(rho: AlgebraicNumber) -> str:
    text = rho.describe()
    return text if rho.is_rational() and rho.rational_value() > 0 and rho.rational_value().q == 1 else f"({text})"


def _negated_minpoly(coeffs: Tuple[int, ...]) -> Tuple[int, ...]:
    flipped = [-c if i % 2 else c for i, c in enumerate(coeffs)]
    if flipped[-1] < 0:
        flipped = [-c for c in flipped]
    return tuple(flipped)


def _real_pair(dominant: Sequence[AlgebraicNumber]) -> Optional[AlgebraicNumber]:
    """ρ > 0 quando as singularidades dominantes são exatamente {ρ, −ρ}."""
    if len(dominant) != 2:
        return None
    positive = [p for p in dominant if p.is_real() and p.enclosure().real > 0]
    negative = [p for p in dominant if p.is_real() and p.enclosure().real < 0]
    if len(positive) != 1 or len(negative) != 1:
        return None
    rho, other = positive[0], negative[0]
    return rho if _negated_minpoly(other.minpoly) == rho.minpoly else None


def _grouped(bound: AsymptoticBound) -> List[Tuple[AlgebraicNumber, List[Tuple[AsymptoticTerm, bool]]]]:
    """Termos agrupados por ρ na ordem das singularidades dominantes."""
    pair = _real_pair(bound.dominant)
    groups: Dict[int, List[Tuple[AsymptoticTerm, bool]]] = {}
    order: List[AlgebraicNumber] = []
    for rho in bound.dominant:
        if pair is not None and not rho.same_as(pair):
            continue
        order.append(rho)
    for term in bound.terms:
        flip = pair is not None and not term.rho.same_as(pair)
        target = pair if flip else term.rho
        index = next(i for i, rho in enumerate(order) if rho.same_as(target))
        groups.setdefault(index, []).append((term, flip))
    return [(rho, groups.get(i, [])) for i, rho in enumerate(order)]


def _term_key(item: Tuple[AsymptoticTerm, bool]):
    term, flip = item
    return (flip, -float(term.sigma.real.mid()), -term.k, float(term.sigma.imag.mid()))


def _modulus_text(bound: AsymptoticBound) -> str:
    rho = bound.dominant[0]
    if rho.is_rational():
        return _fraction(abs(rho.rational_value()))
    return _ball_text(bound.error.M_modulus, SHORT_DIGITS + 10)


def render_text(
    bound: AsymptoticBound,
    certificate: Optional[PositivityCertificate] = None,
    evaluations: Sequence[Evaluation] = (),
) -> str:
    lines = []
    for rho, items in _grouped(bound):
        items = sorted(items, key=_term_key)
        body = [_monomial_text(t, flip) for t, flip in items] or ["0"]
        lines.append(f"{_rho_text(rho)}^(-n) * (")
        lines.append("      " + body[0])
        lines.extend("    + " + b for b in body[1:])
        lines.append(")")
    error = bound.error
    beta = _real_text(error.exponent)
    log_part = f"*log(n)^{error.kappa}" if error.kappa else ""
    lines.append(
        f"+ B({_ball_text(error.A, SHORT_DIGITS)} * ({_modulus_text(bound)})^(-n) * n^({beta}){log_part})"
    )
    lines.append(f"valid for n >= {bound.N0}")
    if certificate is not None:
        if certificate.mode == "positive":
            lines.append(f"positivity: f_n > 0 for all n >= 0 (crossover {certificate.crossover})")
        else:
            lines.append(f"positivity: nonconclusive ({certificate.reason})")
    for ev in evaluations:
        exact = f" = {_fraction(ev.exact)}" if ev.exact is not None else ""
        lines.append(f"f_{ev.n} in {_complex_text(ev.value)}{exact}")
    return "\n".join(lines) + "\n"


def _real_text(x: arb) -> str:
    if x.is_exact():
        return _fraction(exact_fmpq(x.mid()))
    return _ball_text(x, SHORT_DIGITS)


def build_result(
    bound: AsymptoticBound,
    certificate: Optional[PositivityCertificate] = None,
    evaluations: Sequence[Evaluation] = (),
) -> ResultJSON:
    """Documento JSON v1; as bolas saem com ponto médio e raio decimais exatos."""
    terms = [
        TermJSON(
            rho=term.rho.describe(),
            exponent=ComplexJSON.from_acb(term.sigma),
            log_power=term.k,
            coefficient=ComplexJSON.from_acb(term.coeff),
        )
        for term in sorted(bound.terms, key=lambda t: (_dominant_index(bound, t.rho), _term_key((t, False))))
    ]
    error = bound.error
    metadata = MetadataJSON(
        order=bound.r0,
        start=bound.n0,
        precision=bound.precision,
        error_bits=bound.error_bits,
        assume_analytic=[p.describe() for p in bound.assume_analytic],
        singularities=[p.describe() for p in bound.singularities],
        N0=bound.N0,
        positivity=PositivityJSON(**certificate.model_dump()) if certificate is not None else None,
        evaluations=[
            EvaluationJSON(
                n=ev.n,
                value=ComplexJSON.from_acb(ev.value),
                exact=_fraction(ev.exact) if ev.exact is not None else None,
            )
            for ev in evaluations
        ]
        or None,
    )
    return ResultJSON(
        terms=terms,
        error=ErrorJSON(
            A=BallJSON.from_arb(error.A),
            M=BallJSON.from_arb(error.M_modulus),
            exponent=BallJSON.from_arb(error.exponent),
            log_power=error.kappa,
            N0=error.N0,
        ),
        metadata=metadata,
    )


def _dominant_index(bound: AsymptoticBound, rho: AlgebraicNumber) -> int:
    return next(i for i, p in enumerate(bound.dominant) if p.same_as(rho))


def render_output(
    bound: AsymptoticBound,
    output_format: OutputFormat = "text",
    certificate: Optional[PositivityCertificate] = None,
    evaluations: Sequence[Evaluation] = (),
) -> str:
    """
    Renderiza o limitante no formato pedido.

    A saída é determinística: mesma entrada e mesma precisão produzem o
    mesmo texto byte a byte.
    """
    logger.debug(f"Renderizando {len(bound.terms)} termos em {output_format}")
    if output_format == "json":
        result = build_result(bound, certificate, evaluations)
        return result.model_dump_json(by_alias=True, indent=2) + "\n"
    if output_format != "text":
        raise ValueError(f"Formato desconhecido: {output_format}")
    return render_text(bound, certificate, evaluations)
