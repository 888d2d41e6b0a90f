"""
Pontos diádicos exatos e conversões decimais exatas de bolas.

Os pontos de caminho são arredondados para uma grade 2^-k para que todo
centro de expansão seja representado exatamente em aritmética de bolas.
"""
import re

from flint import acb, arb, fmpq, fmpz

DECIMAL_PATTERN = re.compile(r"^\s*([+-]?)(\d*)(?:\.(\d*))?(?:[eE]([+-]?\d+))?\s*$")


def to_fmpq(value) -> fmpq:
    """Converte int, fmpz ou fmpq para fmpq."""
    if isinstance(value, fmpq):
        return value
    if isinstance(value, (int, fmpz)):
        return fmpq(value)
    raise TypeError(f"Valor não racional: {value!r}")


def floor_dyadic(x: arb, bits: int) -> fmpq:
    """Maior múltiplo de 2^-bits menor ou igual a todo o intervalo x."""
    man, exp = x.lower().man_exp()
    shift = int(exp) + bits
    man = int(man)
    num = man << shift if shift >= 0 else man >> (-shift)
    return fmpq(num, 2 ** bits)


def ceil_dyadic(x: arb, bits: int) -> fmpq:
    """Menor múltiplo de 2^-bits maior ou igual a todo o intervalo x."""
    return -floor_dyadic(-x, bits)


def round_dyadic(x: arb, bits: int) -> fmpq:
    """Arredonda o ponto médio de x para a grade 2^-bits."""
    man, exp = x.mid().man_exp()
    shift = int(exp) + bits
    man = int(man)
    num = man << shift if shift >= 0 else man >> (-shift)
    return fmpq(num, 2 ** bits)


class ExactPoint:
    """Ponto complexo com partes real e imaginária racionais."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = to_fmpq(re)
        self.im = to_fmpq(im)

    @classmethod
    def from_ball(cls, z: acb, bits: int) -> "ExactPoint":
        return cls(round_dyadic(z.real, bits), round_dyadic(z.imag, bits))

    def ball(self) -> acb:
        return acb(arb(self.re), arb(self.im))

    def abs2(self) -> fmpq:
        return self.re * self.re + self.im * self.im

    def conjugate(self) -> "ExactPoint":
        return ExactPoint(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_real(self) -> bool:
        return self.im == 0

    def __add__(self, other: "ExactPoint") -> "ExactPoint":
        return ExactPoint(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ExactPoint") -> "ExactPoint":
        return ExactPoint(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "ExactPoint":
        return ExactPoint(-self.re, -self.im)

    def scale(self, factor) -> "ExactPoint":
        factor = to_fmpq(factor)
        return ExactPoint(self.re * factor, self.im * factor)

    def __eq__(self, other) -> bool:
        return isinstance(other, ExactPoint) and self.re == other.re and self.im == other.im

    def __hash__(self) -> int:
        return hash((int(self.re.p), int(self.re.q), int(self.im.p), int(self.im.q)))

    def __repr__(self) -> str:
        if self.im == 0:
            return f"ExactPoint({self.re})"
        return f"ExactPoint({self.re}, {self.im})"


def exact_decimal(x: arb) -> str:
    """
    Representação decimal exata de um número diádico exato.

    Args:
        x: arb exato (ponto médio ou raio)

    Returns:
        String decimal sem perda, por exemplo "0.15625"
    """
    man, exp = x.man_exp()
    man, exp = int(man), int(exp)
    if man == 0:
        return "0"
    if exp >= 0:
        return str(man << exp)
    k = -exp
    sign = "-" if man < 0 else ""
    digits = str(abs(man) * 5 ** k).rjust(k + 1, "0")
    whole, frac = digits[:-k], digits[-k:].rstrip("0")
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"


def decimal_to_fmpq(text: str) -> fmpq:
    """
    Converte uma string decimal (com expoente opcional) em racional exato.

    Raises:
        ValueError: Se a string não for um decimal válido
    """
    match = DECIMAL_PATTERN.match(text)
    if not match or not (match.group(2) or match.group(3)):
        raise ValueError(f"Decimal inválido: {text!r}")
    sign, whole, frac, exponent = match.groups()
    frac = frac or ""
    num = int((whole or "0") + frac)
    scale = int(exponent or 0) - len(frac)
    value = fmpq(num * 10 ** scale) if scale >= 0 else fmpq(num, 10 ** (-scale))
    return -value if sign == "-" else value


def exact_fmpq(x: arb) -> fmpq:
    """Valor racional de um arb exato."""
    man, exp = x.man_exp()
    man, exp = int(man), int(exp)
    return fmpq(man << exp) if exp >= 0 else fmpq(man, 2 ** (-exp))
