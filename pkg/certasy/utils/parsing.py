"""
Utilitários para ler racionais e pontos exatos da entrada
Com validação de formato e diagnóstico pelo caminho do campo
"""
import logging
import re
from typing import Optional

import sympy
from flint import acb, arb, fmpq
from sympy import I, Rational, minimal_polynomial, sqrt

from certasy.exceptions import InputError
from certasy.services.algebraic import X, AlgebraicNumber

logger = logging.getLogger(__name__)

# Limites de segurança
MAX_FIELD_LENGTH = 200

RATIONAL_PATTERN = re.compile(r"^([+-]?\d+)(?:/(\d+))?$")
DECIMAL_PATTERN = re.compile(r"^[+-]?\d*\.\d+(?:[eE][+-]?\d+)?$|^[+-]?\d+[eE][+-]?\d+$")
# termo: [sinal] [racional] [*] (i | sqrt(d) | sqrt(d)*i)? ; racional opcional quando há fator
TERM_PATTERN = re.compile(
    r"([+-]?)\s*(\d+(?:/\d+)?)?\s*\*?\s*(sqrt\((-?\d+)\))?\s*\*?\s*(i)?",
)


class ParseError(InputError):
    """Campo da entrada com formato inválido"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ProblemValidationError(InputError):
    """Problema bem formado mas inconsistente"""
    pass


def parse_rational(value, field: Optional[str] = None) -> fmpq:
    """
    Converte "p/q", "p" ou um inteiro JSON em fmpq, sem passar por ponto flutuante.

    Raises:
        ParseError: Se o texto não for um racional ou o denominador for 0
    """
    if isinstance(value, bool):
        raise ParseError("booleano não é um racional", field)
    if isinstance(value, int):
        return fmpq(value)
    if not isinstance(value, str):
        raise ParseError(f"esperado racional em texto, recebido {type(value).__name__}", field)
    text = value.strip()
    if len(text) > MAX_FIELD_LENGTH:
        raise ParseError(f"racional muito longo (máximo {MAX_FIELD_LENGTH} caracteres)", field)
    match = RATIONAL_PATTERN.match(text)
    if not match:
        if DECIMAL_PATTERN.match(text):
            raise ParseError(f"'{text}' é decimal; use a forma exata p/q", field)
        raise ParseError(f"'{text}' não é um racional p/q", field)
    num = int(match.group(1))
    den = int(match.group(2)) if match.group(2) else 1
    if den == 0:
        raise ParseError(f"denominador nulo em '{text}'", field)
    return fmpq(num, den)


def _point_expression(text: str, field: Optional[str]) -> sympy.Expr:
    """Soma de termos racionais, racionais·i e racionais·sqrt(d)."""
    compact = text.replace(" ", "")
    if not compact:
        raise ParseError("ponto vazio", field)
    expr = sympy.Integer(0)
    pos = 0
    while pos < len(compact):
        match = TERM_PATTERN.match(compact, pos)
        if not match or match.end() == pos:
            raise ParseError(f"'{text}' não segue a sintaxe a+bi ou a+b*sqrt(d)", field)
        sign, coeff, root, radicand, imag = match.groups()
        if coeff is None and root is None and imag is None:
            raise ParseError(f"termo vazio em '{text}'", field)
        if pos and not sign:
            raise ParseError(f"termos de '{text}' devem ser separados por + ou -", field)
        term = Rational(coeff) if coeff else sympy.Integer(1)
        if root:
            term *= sqrt(sympy.Integer(radicand))
        if imag:
            term *= I
        expr += -term if sign == "-" else term
        pos = match.end()
    return expr


def parse_point(text: str, field: Optional[str] = None) -> AlgebraicNumber:
    """
    Ponto exato em mini-sintaxe: "1/4", "-1/2+3/2i", "3-2*sqrt(2)", "i".

    Raises:
        ParseError: Se a sintaxe for inválida
    """
    if not isinstance(text, str):
        raise ParseError("ponto deve ser texto", field)
    if len(text) > MAX_FIELD_LENGTH:
        raise ParseError(f"ponto muito longo (máximo {MAX_FIELD_LENGTH} caracteres)", field)
    expr = _point_expression(text, field)
    if expr.is_Rational:
        return AlgebraicNumber.rational(fmpq(int(expr.p), int(expr.q)))
    poly = sympy.Poly(minimal_polynomial(expr, X), X)
    approx = complex(sympy.N(expr, 40))
    point = AlgebraicNumber.identify(poly, acb(arb(approx.real, 1e-12), arb(approx.imag, 1e-12)))
    logger.debug(f"Ponto '{text}' identificado como {point.describe()}")
    return point
