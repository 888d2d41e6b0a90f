"""
Aritmética de bolas complexas (retângulos) e envoltórias rigorosas.

Bolas são elementos `acb` do python-flint: ponto médio em ponto flutuante
binário de precisão arbitrária e raio arredondado para cima, separadamente
nas partes real e imaginária. Este módulo acrescenta:
- o tratamento explícito do corte do logaritmo (lado de aproximação);
- Γ, 1/Γ e ψ^(m) via deslocamento + expansão assintótica com resto explícito;
- polinômios de bolas em variáveis formais (n⁻¹, log n, ε, u, v) com as
  regras de aparo que preservam a contenção.
"""
import logging
import math
from contextlib import contextmanager
from functools import lru_cache
from typing import Dict, Iterable, Optional, Tuple

from flint import acb, arb, ctx, fmpq, fmpz
from pydantic import BaseModel, ConfigDict, Field
from sympy import bernoulli

from certasy.config import settings
from certasy.exceptions import MathematicalFailure
from certasy.utils.dyadic import exact_fmpq

logger = logging.getLogger(__name__)

ComplexBall = acb

GUARD_BITS = 16
SIDES = ("above", "below")


class BranchCutStraddle(MathematicalFailure):
    """O argumento encosta no corte ℝ≤0 sem lado de aproximação definido"""
    pass


class PoleArgument(MathematicalFailure):
    """O argumento contém um polo de Γ ou ψ^(m) (inteiro não positivo)"""
    pass


class Precision(BaseModel):
    """Precisão de trabalho e precisão fixa dos cálculos de erro."""

    model_config = ConfigDict(frozen=True)

    bits: int = Field(default_factory=lambda: settings.PRECISION_BITS, ge=24)
    error_bits: int = Field(default_factory=lambda: settings.ERROR_BITS, ge=53)


@contextmanager
def workprec(bits: int):
    """Executa o bloco com `ctx.prec` igual a `bits`, restaurando depois."""
    old = ctx.prec
    ctx.prec = bits
    try:
        yield
    finally:
        ctx.prec = old


def as_ball(value) -> acb:
    """Converte int, fmpz, fmpq, arb ou acb em bola complexa."""
    if isinstance(value, acb):
        return value
    if isinstance(value, arb):
        return acb(value)
    if isinstance(value, (int, fmpz, fmpq)):
        return acb(arb(value))
    raise TypeError(f"Não é possível converter {value!r} em bola")


def disk(radius: arb) -> acb:
    """Bola centrada em 0 que contém o disco de raio `radius`."""
    radius = arb(radius).abs_upper()
    return acb(arb(0, radius), arb(0, radius))


def exact_integer(z: acb) -> Optional[int]:
    """Inteiro representado por z se z for uma bola exata inteira, senão None."""
    if not (z.imag.is_zero() and z.real.is_exact()):
        return None
    n = z.real.unique_fmpz()
    return None if n is None else int(n)


def _floor_fmpq(x: fmpq) -> int:
    return int(x.p) // int(x.q)


def contains_nonpositive_integer(z: acb) -> bool:
    """Verdadeiro se a bola pode conter um inteiro ≤ 0."""
    if not z.imag.contains(0):
        return False
    low = exact_fmpq(z.real.lower())
    high = exact_fmpq(z.real.upper())
    smallest = -_floor_fmpq(-low)
    return smallest <= min(0, _floor_fmpq(high))


def ball_ring_op(a: acb, b: acb, op: str) -> acb:
    """Soma, subtração ou produto de bolas."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"Operação desconhecida: {op}")


def meets_branch_cut(z: acb) -> bool:
    return bool(z.imag.contains(0)) and bool(z.real.lower() <= 0)


def log_ball(z: acb, side: Optional[str] = None) -> acb:
    """
    Logaritmo principal com limite unilateral opcional no corte.

    Args:
        z: Bola de entrada
        side: "above" ou "below" para continuar o ramo vindo do semiplano
            superior ou inferior quando z encosta em ℝ≤0

    Raises:
        BranchCutStraddle: Se z encosta no corte sem lado, ou contém 0
    """
    if not meets_branch_cut(z):
        return z.log()
    if z.real.contains(0):
        raise BranchCutStraddle(f"Argumento {z} contém 0")
    if side not in SIDES:
        raise BranchCutStraddle(f"Argumento {z} encosta no corte ℝ≤0 sem lado definido")
    turn = acb(0, arb.pi())
    return (-z).log() + turn if side == "above" else (-z).log() - turn


def pow_ball(z: acb, alpha: acb, side: Optional[str] = None) -> acb:
    """z^α no ramo principal; expoente inteiro exato usa potência inteira."""
    n = exact_integer(alpha)
    if n is not None:
        return z ** n
    return (alpha * log_ball(z, side)).exp()


def ball_elementary(kind: str, z: acb, alpha: Optional[acb] = None, side: Optional[str] = None) -> acb:
    """
    Envoltória de exp, log, sin ou pow(·, α) no ramo principal.

    Raises:
        BranchCutStraddle: Para log/pow sobre o corte sem lado definido
    """
    if kind == "exp":
        return z.exp()
    if kind == "sin":
        return z.sin()
    if kind == "log":
        return log_ball(z, side)
    if kind == "pow":
        if alpha is None:
            raise ValueError("pow exige o expoente alpha")
        return pow_ball(z, as_ball(alpha), side)
    raise ValueError(f"Função elementar desconhecida: {kind}")


@lru_cache(maxsize=None)
def bernoulli_number(n: int) -> fmpq:
    """Número de Bernoulli B_n como racional exato."""
    value = bernoulli(n)
    return fmpq(int(value.p), int(value.q))


def _log_abs_bernoulli(n: int) -> float:
    # |B_2k| ≈ 2 (2k)! / (2π)^(2k)
    return math.log(2) + math.lgamma(n + 1) - n * math.log(2 * math.pi)


def _shift_count(z: acb, m: int) -> int:
    threshold = max(8.0, 0.15 * ctx.prec + m, float(abs(z.imag).upper()))
    return max(0, math.ceil(threshold - float(z.real.lower())) + 1)


def _pick_order(abs_w: float, m: int, stirling: bool) -> int:
    """Escolhe η minimizando a estimativa do resto, parando abaixo de 2^-prec."""
    target = -(ctx.prec + GUARD_BITS) * math.log(2)
    log_w = math.log(abs_w)
    best, best_eta = None, 1
    for eta in range(1, 4 * ctx.prec + 8):
        n = 2 * eta
        if stirling:
            value = _log_abs_bernoulli(n) - math.log(n * (n - 1)) - (n - 1) * log_w
            value += eta * math.log(4 / (2 + math.sqrt(2)))
        else:
            value = _log_abs_bernoulli(n) + math.lgamma(n + m) - math.lgamma(n + 1) - (n + m) * log_w
        if best is None or value < best:
            best, best_eta = value, eta
        if value < target:
            return eta
        if value > best + 5:
            break
    return best_eta


def stirling_log_gamma_series(w: acb, eta: int) -> Tuple[acb, arb]:
    """
    Soma parcial de Stirling para log Γ(w) e limitante do resto.

    Válida para |arg w| ≤ π/4: o resto após os termos j < η é limitado por
    |B_2η| / (2η(2η−1)|w|^(2η−1)) · (4/(2+√2))^η.

    Returns:
        (soma parcial, limitante do resto)
    """
    half = arb(fmpq(1, 2))
    partial = (w - half) * w.log() - w + (2 * arb.pi()).log() * half
    winv = 1 / w
    winv2 = winv * winv
    power = winv
    for j in range(1, eta):
        partial += arb(bernoulli_number(2 * j)) / (2 * j * (2 * j - 1)) * power
        power *= winv2
    abs_low = abs(w).lower()
    sector = arb(4) / (2 + arb(2).sqrt())
    remainder = (
        abs(arb(bernoulli_number(2 * eta)))
        / (2 * eta * (2 * eta - 1))
        / abs_low ** (2 * eta - 1)
        * sector ** eta
    )
    return partial, remainder.abs_upper()


def nemes_polygamma_series(m: int, w: acb, eta: int) -> Tuple[acb, arb]:
    """
    Soma parcial da expansão assintótica de ψ^(m)(w) e limitante do resto.

    m = 0: log w − 1/(2w) − Σ_{1≤j<η} B_2j/(2j w^2j), resto |B_2η|/(2η|w|^2η).
    m ≥ 1: (−1)^(m+1)[(m−1)!/w^m + m!/(2w^(m+1)) + Σ_{1≤j<η} B_2j (2j+m−1)!/((2j)! w^(2j+m))],
    resto (2η+m−1)! |B_2η| / ((2η)! |w|^(2η+m)). Ambos para |arg w| ≤ π/4.
    """
    winv = 1 / w
    winv2 = winv * winv
    abs_low = abs(w).lower()
    b_eta = abs(arb(bernoulli_number(2 * eta)))
    if m == 0:
        partial = w.log() - winv / 2
        power = winv2
        for j in range(1, eta):
            partial -= arb(bernoulli_number(2 * j)) / (2 * j) * power
            power *= winv2
        remainder = b_eta / (2 * eta) / abs_low ** (2 * eta)
        return partial, remainder.abs_upper()
    wm = winv ** m
    inner = math.factorial(m - 1) * wm + arb(math.factorial(m)) / 2 * wm * winv
    power = wm * winv2
    for j in range(1, eta):
        coeff = arb(bernoulli_number(2 * j)) * math.factorial(2 * j + m - 1) / math.factorial(2 * j)
        inner += coeff * power
        power *= winv2
    sign = 1 if (m + 1) % 2 == 0 else -1
    remainder = b_eta * math.factorial(2 * eta + m - 1) / math.factorial(2 * eta) / abs_low ** (2 * eta + m)
    return sign * inner, remainder.abs_upper()


def _shifted(z: acb, m: int) -> Tuple[int, acb]:
    shift = _shift_count(z, m)
    w = z + shift
    if not (w.real.lower() >= abs(w.imag).upper()):
        raise MathematicalFailure(f"Deslocamento insuficiente para {z}")
    return shift, w


def _log_gamma_shifted(z: acb) -> Tuple[acb, acb]:
    """Retorna (log Γ(z+N), Π_{i<N}(z+i))."""
    shift, w = _shifted(z, 0)
    eta = _pick_order(float(abs(w).lower()), 0, stirling=True)
    partial, remainder = stirling_log_gamma_series(w, eta)
    product = acb(1)
    for i in range(shift):
        product *= z + i
    return partial + disk(remainder), product


def gamma_ball(z: acb) -> acb:
    """Γ(z) rigoroso."""
    if contains_nonpositive_integer(z):
        raise PoleArgument(f"Γ tem polo em {z}")
    with workprec(ctx.prec + GUARD_BITS):
        log_gamma, product = _log_gamma_shifted(z)
        result = log_gamma.exp() / product
    return +result


def inv_gamma_ball(z: acb) -> acb:
    """1/Γ(z) rigoroso, definido em todo o plano."""
    with workprec(ctx.prec + GUARD_BITS):
        log_gamma, product = _log_gamma_shifted(z)
        result = product * (-log_gamma).exp()
    return +result


def polygamma_ball(m: int, z: acb) -> acb:
    """ψ^(m)(z) rigoroso via deslocamento e a expansão com resto."""
    if m < 0:
        raise ValueError("Ordem de poligama negativa")
    if contains_nonpositive_integer(z):
        raise PoleArgument(f"ψ^({m}) tem polo em {z}")
    with workprec(ctx.prec + GUARD_BITS):
        shift, w = _shifted(z, m)
        eta = _pick_order(float(abs(w).lower()), m, stirling=False)
        partial, remainder = nemes_polygamma_series(m, w, eta)
        value = partial + disk(remainder)
        correction = acb(0)
        for i in range(shift):
            correction += (z + i) ** (-m - 1)
        sign = 1 if m % 2 == 0 else -1
        value -= sign * math.factorial(m) * correction
    return +value


def gamma_family(kind: str, z: acb, m: int = 0) -> acb:
    """
    Γ, 1/Γ ou ψ^(m) em bola.

    Args:
        kind: "gamma", "inv_gamma" ou "polygamma"
        z: Argumento
        m: Ordem da poligama (ignorada nos demais casos)

    Raises:
        PoleArgument: Para gamma/polygamma em enclosures de inteiros ≤ 0
    """
    if kind == "gamma":
        return gamma_ball(z)
    if kind == "inv_gamma":
        return inv_gamma_ball(z)
    if kind == "polygamma":
        return polygamma_ball(m, z)
    raise ValueError(f"Função desconhecida: {kind}")


Exponents = Tuple[int, ...]


class BallPoly:
    """
    Polinômio com coeficientes bola em variáveis formais.

    Cada variável tem um domínio implícito (n⁻¹ ∈ (0, 1/n₀], w = log n, ε
    formal truncado); avaliar em qualquer ponto do domínio dá uma bola que
    contém o valor da função representada.
    """

    __slots__ = ("variables", "coeffs")

    def __init__(self, variables: Iterable[str], coeffs: Optional[Dict[Exponents, acb]] = None):
        self.variables = tuple(variables)
        self.coeffs: Dict[Exponents, acb] = {}
        for exps, c in (coeffs or {}).items():
            c = as_ball(c)
            if not c.is_zero():
                self.coeffs[tuple(exps)] = c

    @classmethod
    def constant(cls, variables: Iterable[str], value) -> "BallPoly":
        variables = tuple(variables)
        return cls(variables, {(0,) * len(variables): as_ball(value)})

    @classmethod
    def monomial(cls, variables: Iterable[str], var: str, power: int = 1, value=1) -> "BallPoly":
        variables = tuple(variables)
        exps = [0] * len(variables)
        exps[variables.index(var)] = power
        return cls(variables, {tuple(exps): as_ball(value)})

    def _index(self, var: str) -> int:
        return self.variables.index(var)

    def _check(self, other: "BallPoly") -> None:
        if other.variables != self.variables:
            raise ValueError(f"Variáveis incompatíveis: {self.variables} e {other.variables}")

    def _lift(self, other) -> "BallPoly":
        if isinstance(other, BallPoly):
            self._check(other)
            return other
        return BallPoly.constant(self.variables, other)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other) -> "BallPoly":
        other = self._lift(other)
        coeffs = dict(self.coeffs)
        for exps, c in other.coeffs.items():
            coeffs[exps] = coeffs[exps] + c if exps in coeffs else c
        return BallPoly(self.variables, coeffs)

    __radd__ = __add__

    def __neg__(self) -> "BallPoly":
        return BallPoly(self.variables, {e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other) -> "BallPoly":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "BallPoly":
        return self._lift(other) - self

    def __mul__(self, other) -> "BallPoly":
        if not isinstance(other, BallPoly):
            return self.scale(other)
        self._check(other)
        coeffs: Dict[Exponents, acb] = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                exps = tuple(a + b for a, b in zip(e1, e2))
                term = c1 * c2
                coeffs[exps] = coeffs[exps] + term if exps in coeffs else term
        return BallPoly(self.variables, coeffs)

    __rmul__ = __mul__

    def scale(self, factor) -> "BallPoly":
        factor = as_ball(factor)
        return BallPoly(self.variables, {e: c * factor for e, c in self.coeffs.items()})

    def degree(self, var: str) -> int:
        i = self._index(var)
        return max((e[i] for e in self.coeffs), default=-1)

    def coefficient(self, exps: Exponents) -> acb:
        return self.coeffs.get(tuple(exps), acb(0))

    def slice(self, var: str, power: int) -> "BallPoly":
        """Coeficiente de var^power, como polinômio (expoente de var zerado)."""
        i = self._index(var)
        coeffs = {}
        for e, c in self.coeffs.items():
            if e[i] == power:
                exps = list(e)
                exps[i] = 0
                coeffs[tuple(exps)] = c
        return BallPoly(self.variables, coeffs)

    def truncate(self, var: str, degree: int) -> "BallPoly":
        """Truncamento exato de série formal: descarta var^j com j > degree."""
        i = self._index(var)
        return BallPoly(self.variables, {e: c for e, c in self.coeffs.items() if e[i] <= degree})

    def trim(self, var: str, cap: int, bound) -> "BallPoly":
        """
        Absorve os monômios c·var^(cap+j), j > 0, como B(0, |c|·bound^j)·var^cap.

        Args:
            var: Variável aparada
            cap: Grau máximo mantido
            bound: Limitante superior de |var| no domínio
        """
        i = self._index(var)
        bound = arb(bound).abs_upper()
        coeffs: Dict[Exponents, acb] = {}
        for e, c in self.coeffs.items():
            if e[i] <= cap:
                exps, term = e, c
            else:
                exps = e[:i] + (cap,) + e[i + 1:]
                term = disk(abs(c).abs_upper() * bound ** (e[i] - cap))
            coeffs[exps] = coeffs[exps] + term if exps in coeffs else term
        return BallPoly(self.variables, coeffs)

    def substitute(self, var: str, value: "BallPoly") -> "BallPoly":
        """Substitui var por outro polinômio nas mesmas variáveis."""
        self._check(value)
        i = self._index(var)
        result = BallPoly(self.variables)
        powers = [BallPoly.constant(self.variables, 1)]
        for e, c in sorted(self.coeffs.items()):
            while len(powers) <= e[i]:
                powers.append(powers[-1] * value)
            exps = e[:i] + (0,) + e[i + 1:]
            result = result + BallPoly(self.variables, {exps: c}) * powers[e[i]]
        return result

    def evaluate(self, values: Dict[str, acb]) -> acb:
        """Avalia em bolas para todas as variáveis."""
        points = [as_ball(values[v]) for v in self.variables]
        total = acb(0)
        for e, c in self.coeffs.items():
            term = c
            for p, k in zip(points, e):
                if k:
                    term = term * p ** k
            total += term
        return total

    def terms(self):
        return sorted(self.coeffs.items())

    def __repr__(self) -> str:
        body = " + ".join(f"{c}*{e}" for e, c in self.terms()) or "0"
        return f"BallPoly({self.variables}: {body})"


def trim_poly(p: BallPoly, var: str, degree_cap: int, floor: int) -> BallPoly:
    """
    Apara p ao grau `degree_cap` em var, válido para var ∈ (0, 1/floor].

    Cada monômio c·var^(r+j) vira B(0, |c|·floor^(−j))·var^r.
    """
    if floor < 1:
        raise ValueError("O piso n0 deve ser ≥ 1")
    return p.trim(var, degree_cap, arb(fmpq(1, floor)))
