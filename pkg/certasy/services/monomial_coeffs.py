"""
Envoltórias dos coeficientes de (1−z)^(−α) log^k(1/(1−z)).

Para n ≥ n₀ > s|α| (s ≥ 2) e k ≤ K:

    [z^n] (1−z)^(−α) log^k(1/(1−z)) ∈ n^(α−1)·e_k(n⁻¹, log n)

com e_k polinomial de grau ≤ r em n⁻¹ e ≤ k em log n. O cálculo separa
G(n) = n^(1−α) Γ(n+α)/Γ(n+1) (razão de gamas, expansão com resto explícito)
e H(n, k) = k!·[ε^k] da série geradora das derivadas em α, em que as
poligamas ψ^(m)(n+α) são trocadas pelas suas expansões com resto.

Os polinômios usam as variáveis formais n (para n⁻¹), w (para log n),
e (para ε) e v (variável auxiliar (n+α)⁻¹ ou (n+α/2)⁻¹).
"""
import logging
import math
from functools import lru_cache
from typing import List, Optional

from flint import acb, arb, fmpq
from pydantic import BaseModel, ConfigDict, model_validator

from certasy.exceptions import MathematicalFailure
from certasy.services.ball_arith import (
    BallPoly,
    as_ball,
    bernoulli_number,
    disk,
    exact_integer,
    gamma_ball,
    inv_gamma_ball,
    polygamma_ball,
    trim_poly,
)

logger = logging.getLogger(__name__)

VARS = ("n", "w", "e", "v")


class ParameterError(MathematicalFailure):
    """Parâmetros fora do domínio de validade (s < 2 ou n₀ ≤ s|α|)"""
    pass


def _const(value) -> BallPoly:
    return BallPoly.constant(VARS, value)


def _mono(var: str, power: int = 1, value=1) -> BallPoly:
    return BallPoly.monomial(VARS, var, power, value)


@lru_cache(maxsize=None)
def _bernoulli_log_series(order: int) -> tuple:
    """Coeficientes exatos de log(t/(e^t − 1)) até t^order."""
    s = [fmpq(1), fmpq(-1, 2)] + [bernoulli_number(k) / math.factorial(k) for k in range(2, order + 1)]
    s = s[: order + 1]
    log = [fmpq(0)] * (order + 1)
    for k in range(1, order + 1):
        acc = k * s[k]
        for i in range(1, k):
            acc -= i * log[i] * s[k - i]
        log[k] = acc / k
    return tuple(log)


def _series_exp(a: List[acb], order: int) -> List[acb]:
    """exp de uma série com termo constante nulo, truncada em t^order."""
    out = [acb(1)] + [acb(0)] * order
    for k in range(1, order + 1):
        acc = acb(0)
        for i in range(1, k + 1):
            if not a[i].is_zero():
                acc += i * a[i] * out[k - i]
        out[k] = acc / k
    return out


def gen_bernoulli(j: int, sigma) -> acb:
    """
    Número de Bernoulli generalizado B_2j^(2σ)(σ).

    Coeficiente de t^2j/(2j)! em (t/(e^t − 1))^(2σ) e^(σt), obtido como
    exp(2σ·log(t/(e^t−1)) + σt) por composição exata de séries truncadas.
    """
    sigma = as_ball(sigma)
    order = 2 * j
    if order == 0:
        return acb(1)
    log = _bernoulli_log_series(order)
    exponent = [acb(0)] * (order + 1)
    for k in range(1, order + 1):
        exponent[k] = 2 * sigma * arb(log[k])
    exponent[1] += sigma
    series = _series_exp(exponent, order)
    return series[order] * math.factorial(order)


def _rising(x: acb, count: int) -> acb:
    out = acb(1)
    for i in range(count):
        out *= x + i
    return out


def varchange(kind: str, alpha, r: int, s) -> BallPoly:
    """
    Expansões em n⁻¹ com resto de (n+α)⁻¹ ("inverse") e log(n+α) ("log").

    Válidas para n > s|α| com s ≥ 1:
        (n+α)⁻¹ ∈ Σ_{j≤r−2} (−α)^j n^(−j−1) + B(0, |α|^(r−1)/(1−1/s)) n^(−r)
        log(n+α) ∈ w − Σ_{1≤j≤r−1} (−α)^j/j n^(−j) + B(0, |α|^r/(r(1−1/s))) n^(−r)

    Raises:
        ParameterError: Se r < 1 ou s < 1
    """
    alpha = as_ball(alpha)
    s = arb(s)
    if r < 1 or not (s >= 1):
        raise ParameterError(f"varchange exige r ≥ 1 e s ≥ 1 (r={r})")
    factor = 1 / (1 - 1 / s)
    if kind == "inverse":
        if alpha.is_zero():
            return _mono("n")
        out = BallPoly(VARS)
        for j in range(r - 1):
            out = out + _mono("n", j + 1, (-alpha) ** j)
        return out + _mono("n", r, disk(abs(alpha) ** (r - 1) * factor))
    if kind == "log":
        out = _mono("w")
        if alpha.is_zero():
            return out
        for j in range(1, r):
            out = out - _mono("n", j, (-alpha) ** j / j)
        return out + _mono("n", r, disk(abs(alpha) ** r * factor / r))
    raise ValueError(f"Tipo de mudança de variável desconhecido: {kind}")


def exact_gamma_ratio(alpha: int) -> BallPoly:
    """G(n) = Π_{j=1}^{α−1} (1 + j n⁻¹), exato para α inteiro ≥ 1."""
    if alpha < 1:
        raise ValueError("A razão exata exige α ≥ 1")
    out = _const(1)
    for j in range(1, alpha):
        out = out * (_const(1) + _mono("n", 1, j))
    return out


def frenzen_order(alpha: acb, r: int) -> int:
    """η = max(⌈r/2⌉, ⌈Re α/2⌉, 1)."""
    return max(math.ceil(r / 2), math.ceil(float(alpha.real.upper()) / 2), 1)


def gamma_ratio_G1(alpha, eta: int, r: int, s, n0: int) -> BallPoly:
    """
    G₁(n) = (n+α/2)^(1−α) Γ(n+α)/Γ(n+1) como polinômio em n⁻¹ de grau ≤ r.

    A expansão de Frenzen em u = (n+α/2)⁻¹ tem termos c_j u^2j (j < η) e
    resto em u^2η; u é trocado pela sua expansão em n⁻¹ (com s' = 2s).
    """
    alpha = as_ball(alpha)
    s = arb(s)
    half = alpha / 2
    ghat = BallPoly(VARS)
    for j in range(eta):
        c = _rising(1 - alpha, 2 * j) / math.factorial(2 * j) * gen_bernoulli(j, half)
        ghat = ghat + _mono("v", 2 * j, c)
    re = alpha.real
    bern = abs(gen_bernoulli(eta, acb(abs(half))))
    lead = gamma_ball(acb(1 - re + 2 * eta)).real * abs(inv_gamma_ball(1 - alpha)) / math.factorial(2 * eta)
    angle = (abs(alpha.imag) * (1 / (2 * s)).asin()).exp()
    exponent = (2 * eta + 1 - re).upper()
    exponent = exponent if exponent > 0 else arb(0)
    ratio = ((s + arb(fmpq(1, 2))) / (s - arb(fmpq(1, 2)))) ** exponent
    remainder = lead * bern * angle * ratio
    ghat = ghat + _mono("v", 2 * eta, disk(remainder))
    u = varchange("inverse", half, r, 2 * s)
    return trim_poly(ghat.substitute("v", u), "n", r, n0)


def _upper_of(a: arb, b: arb) -> arb:
    ua, ub = a.abs_upper(), b.abs_upper()
    return arb(ua) if ua > ub else arb(ub)


def binomial_factor_G2(alpha, r: int, s) -> BallPoly:
    """
    G₂(n) = (1 + α/(2n))^(α−1) pela série binomial com resto de Cauchy.

    Para α inteiro com 1 ≤ α ≤ r a série termina antes de n^(−r) e é exata.
    """
    alpha = as_ball(alpha)
    s = arb(s)
    integer = exact_integer(alpha)
    exact = integer is not None and 1 <= integer <= r
    out = BallPoly(VARS)
    binom = acb(1)
    for j in range(r):
        out = out + _mono("n", j, binom * (alpha / 2) ** j)
        binom = binom * (alpha - 1 - j) / (j + 1)
    if exact or alpha.is_zero():
        return out
    re = alpha.real
    three_halves = arb(fmpq(3, 2)) ** (re - 1)
    one_half = arb(fmpq(1, 2)) ** (re - 1)
    big = _upper_of(three_halves, one_half)
    radius = abs(alpha) ** r / (1 - 1 / s) * big * (abs(alpha.imag) / 2).exp()
    return out + _mono("n", r, disk(radius))


def gamma_ratio(alpha, r: int, s, n0: int) -> BallPoly:
    """g(n⁻¹) ∋ G(n), pelo ramo exato quando α ∈ ℤ≥1 e r ≥ α."""
    alpha = as_ball(alpha)
    integer = exact_integer(alpha)
    if integer is not None and 1 <= integer <= r:
        return exact_gamma_ratio(integer)
    eta = frenzen_order(alpha, r)
    g1 = gamma_ratio_G1(alpha, eta, r, s, n0)
    g2 = binomial_factor_G2(alpha, r, s)
    return trim_poly(g1 * g2, "n", r, n0)


def _nemes_poly(m: int, eta: int) -> BallPoly:
    """Expansão de ψ^(m)(1/v) (sem o log para m = 0) em v, com resto em v^(2η+m)."""
    b_eta = abs(arb(bernoulli_number(2 * eta)))
    if m == 0:
        out = _mono("v", 1, fmpq(-1, 2))
        for j in range(1, eta):
            out = out - _mono("v", 2 * j, arb(bernoulli_number(2 * j)) / (2 * j))
        return out + _mono("v", 2 * eta, disk(b_eta / (2 * eta)))
    sign = 1 if (m + 1) % 2 == 0 else -1
    out = _mono("v", m, math.factorial(m - 1)) + _mono("v", m + 1, arb(math.factorial(m)) / 2)
    for j in range(1, eta):
        coeff = arb(bernoulli_number(2 * j)) * math.factorial(2 * j + m - 1) / math.factorial(2 * j)
        out = out + _mono("v", 2 * j + m, coeff)
    out = out * sign
    remainder = b_eta * math.factorial(2 * eta + m - 1) / math.factorial(2 * eta)
    return out + _mono("v", 2 * eta + m, disk(remainder))


def _exp_truncated(p: BallPoly, K: int) -> BallPoly:
    """exp(p) truncada em ε^K, para p sem termo em ε^0."""
    result = _const(1)
    term = _const(1)
    for i in range(1, K + 1):
        term = (term * p).truncate("e", K).scale(fmpq(1, i))
        result = result + term
    return result


def _sin_pi_series(K: int) -> BallPoly:
    """sin(πε)/π truncada em ε^K."""
    out = BallPoly(VARS)
    pi2 = arb.pi() ** 2
    for i in range((K + 1) // 2 + 1):
        power = 2 * i + 1
        if power > K:
            break
        out = out + _mono("e", power, (-1) ** i * pi2 ** i / math.factorial(power))
    return out


def h_factor(alpha, K: int, r: int, s, n0: int) -> BallPoly:
    """
    h₁·h₂·h₃ com H(n, k) ∈ k!·[ε^k](h₁h₂h₃) para n ≥ n₀.

    α ∉ ℤ≤0: h₁ = Γ(α)⁻¹ exp(Σ_{m<K} (ψ^(m)(n+α) − ψ^(m)(α))/(m+1)! ε^(m+1)), sem a parte log.
    α ∈ ℤ≤0: h₁ = (−1)^α Γ(1−α) exp(Σ_{m≤K−2} (ψ^(m)(n+α) + (−1)^(m+1) ψ^(m)(1−α))/(m+1)! ε^(m+1))·sin(πε)/π.
    h₂h₃ = (n+α)^ε = exp(q(n⁻¹)ε)·exp(wε).

    Raises:
        PoleArgument: Se ψ^(m)(α) não puder ser avaliada (α encostando num polo)
    """
    alpha = as_ball(alpha)
    s = arb(s)
    integer = exact_integer(alpha)
    negint = integer is not None and integer <= 0
    eta = max(1, math.ceil(r / 2))
    p = BallPoly(VARS)
    top = K - 1 if negint else K
    for m in range(top):
        poly = _nemes_poly(m, eta)
        if negint:
            shift = (-1) ** (m + 1) * polygamma_ball(m, acb(1 - integer))
        else:
            shift = -polygamma_ball(m, alpha)
        poly = (poly + shift).scale(fmpq(1, math.factorial(m + 1)))
        p = p + poly * _mono("e", m + 1)
    expo = _exp_truncated(p, K)
    if negint:
        prefactor = (-1) ** (-integer) * math.factorial(-integer)
        hhat = (expo * _sin_pi_series(K)).truncate("e", K).scale(prefactor)
    else:
        hhat = expo.scale(inv_gamma_ball(alpha))
    bound_v = 1 / (n0 - abs(alpha))
    hhat = hhat.trim("v", r, bound_v)
    h1 = trim_poly(hhat.substitute("v", varchange("inverse", alpha, r, s)), "n", r, n0)
    q = varchange("log", alpha, r, s) - _mono("w")
    h2 = _exp_truncated(q * _mono("e"), K)
    h3 = _exp_truncated(_mono("w") * _mono("e"), K)
    out = (h1 * h2).truncate("e", K)
    out = trim_poly(out, "n", r, n0)
    return (out * h3).truncate("e", K)


class CoeffAsyRequest(BaseModel):
    """Pedido: α, grau máximo K do log, ordem r, parâmetro s e índice mínimo n₀."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    alpha: acb
    K: int
    r: int
    s: arb
    n0: int

    @model_validator(mode="after")
    def check_domain(self):
        if self.K < 0 or self.r < 1:
            raise ParameterError(f"K ≥ 0 e r ≥ 1 são obrigatórios (K={self.K}, r={self.r})")
        if not (self.s >= 2):
            raise ParameterError(f"s = {self.s.str(5)} < 2")
        if not (self.n0 > self.s * abs(self.alpha)):
            raise ParameterError(f"n₀ = {self.n0} não excede s|α|")
        return self


class CoeffAsyResult(BaseModel):
    """e(n⁻¹, w, ε) = Σ_k e_k(n⁻¹, w) ε^k."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    alpha: acb
    K: int
    r: int
    n0: int
    e: BallPoly

    def slice(self, k: int) -> BallPoly:
        return self.e.slice("e", k)

    def evaluate(self, k: int, n: int, alpha: Optional[acb] = None) -> acb:
        """Bola n^(α−1)·e_k(1/n, log n), que contém o coeficiente para n ≥ n₀."""
        log_n = acb(arb(n).log())
        prefactor = ((self.alpha if alpha is None else alpha) - 1) * log_n
        value = self.slice(k).evaluate({"n": acb(arb(fmpq(1, n))), "w": log_n, "e": acb(0), "v": acb(0)})
        return prefactor.exp() * value


def coeffasy(req: CoeffAsyRequest) -> CoeffAsyResult:
    """
    Polinômio e com [z^n](1−z)^(−α) log^k(1/(1−z)) ∈ n^(α−1) e_k(n⁻¹, log n), n ≥ n₀.

    Os coeficientes de grau < r em n⁻¹ saem sem bolas de resto; só o
    coeficiente de n^(−r) absorve os restos.
    """
    g = gamma_ratio(req.alpha, req.r, req.s, req.n0)
    h = h_factor(req.alpha, req.K, req.r, req.s, req.n0)
    product = (h * g).truncate("e", req.K)
    terms = {}
    for exps, c in product.coeffs.items():
        terms[exps] = c * math.factorial(exps[VARS.index("e")])
    e = trim_poly(BallPoly(VARS, terms), "n", req.r, req.n0)
    logger.debug(f"coeffasy: α={req.alpha.str(8)}, K={req.K}, r={req.r}, {len(e.coeffs)} monômios")
    return CoeffAsyResult(alpha=req.alpha, K=req.K, r=req.r, n0=req.n0, e=e)
