"""
Parâmetros do contorno e cotas dos pedaços da integral de Cauchy.

O contorno para n ≥ N₀ é o círculo grande |z| = R₀ mais, para cada
singularidade dominante ρ, um círculo pequeno de raio |ρ|/n em torno de ρ
e os dois segmentos que o ligam ao círculo grande ao longo do corte.
"""
import logging
import math
from typing import List, Literal, Optional, Sequence, Tuple, Union

from flint import acb, arb, fmpq
from pydantic import BaseModel, ConfigDict

from certasy.exceptions import MathematicalFailure
from certasy.services.algebraic import AlgebraicNumber
from certasy.services.analytic_continuation import (
    apply_matrix,
    bisected_step,
    distance_to,
    enclose_f_on_square,
    plan_path,
    propagate,
)
from certasy.services.ball_arith import disk, exact_integer, log_ball, workprec
from certasy.services.dfinite_core import DiffOp, SingularSet
from certasy.services.monomial_coeffs import ParameterError
from certasy.utils.dyadic import ExactPoint, ceil_dyadic, floor_dyadic

logger = logging.getLogger(__name__)


class NoSingularity(MathematicalFailure):
    """O operador não tem singularidade dominante fora de Ξᵃ ∪ {0}"""
    pass


class ContourParams(BaseModel):
    """R₀, R₁ racionais e os índices N₀ ≥ max(n₀, N₁, N₂, N₃)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    R0: fmpq
    R1: fmpq
    M: arb
    N0: int
    N1: int
    N2: int
    N3: int
    s: fmpq


class LocalErrorBound(BaseModel):
    """
    E(n) = constant·|ρ|^(−n)·n^(−Re ν−1−r)·B(π + log n), B(x) = Σ_k b_k x^k.

    Vale para n ≥ N₀ e domina a parte do contorno indicada em `kind`.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: Literal["small_circle", "segment"]
    rho_modulus: arb
    nu: acb
    r: int
    b: Tuple[arb, ...]
    constant: arb

    @property
    def exponent_decay(self) -> arb:
        return self.nu.real + 1 + self.r

    def log_poly(self, n: int) -> arb:
        x = arb.pi() + arb(n).log()
        total = arb(0)
        for b in reversed(self.b):
            total = total * x + b
        return total

    def value(self, n: int) -> arb:
        """Cota E(n) como bola real."""
        decay = (-self.exponent_decay * arb(n).log()).exp()
        return self.constant * self.rho_modulus ** (-n) * decay * self.log_poly(n)

    def standard_constant(self, N0: int, kappa: int) -> arb:
        """
        A com E(n) ≤ A·|ρ|^(−n)·n^(−Re ν−1−r)·log^κ n para n ≥ N₀.

        Usa (π + log n)^k ≤ (1 + π/log N₀)^k log^k n e log^(k−κ) n ≤ log^(k−κ) N₀.
        """
        if len(self.b) > kappa + 1:
            raise ValueError(f"κ = {kappa} menor que o grau {len(self.b) - 1} de B")
        log_n0 = arb(N0).log()
        widen = 1 + arb.pi() / log_n0
        total = arb(0)
        for k, b in enumerate(self.b):
            total += b * widen ** k * log_n0 ** (k - kappa)
        return arb((self.constant * total).abs_upper())


def _outer_minimum(singular: SingularSet) -> Optional[arb]:
    """min |ξ| sobre Ξ∖Ξᵉ."""
    outer = [p for p in singular.points if not any(p.same_as(e) for e in singular.extended)]
    if not outer:
        return None
    return min((p.modulus() for p in outer), key=lambda m: float(m.mid()))


def _min_distance(singular: SingularSet) -> Optional[arb]:
    """min |ρ₁ − ξ| para ρ₁ dominante e ξ ∈ Ξ∖{ρ₁}."""
    best = None
    for rho in singular.dominant:
        d = distance_to(rho.enclosure(), singular.others(rho))
        if d is not None and (best is None or d < best):
            best = d
    return best


def contour_params(
    singular: SingularSet,
    exponents: Sequence[Tuple[acb, int]],
    n0: int,
    error_bits: int,
) -> ContourParams:
    """
    Escolhe R₀, R₁ e N₀.

    R₀ ≈ min(M/8 + 7/8·min_{Ξ∖Ξᵉ}|ξ|, M + 3/4·mindist) arredondado para baixo,
    com cada termo valendo +∞ quando o conjunto correspondente é vazio; se os
    dois são infinitos (Ξ reduzido a um ponto), R₀ = 2M.

    Args:
        singular: Conjunto singular com a parte dominante
        exponents: Pares (ν0, r_c) das classes de expoentes usadas
        n0: Índice mínimo pedido
        error_bits: Precisão dos arredondamentos

    Raises:
        NoSingularity: Se não houver singularidade dominante
        ParameterError: Se as desigualdades estritas não forem certificadas
    """
    if not singular.dominant:
        raise NoSingularity("Não há singularidade dominante: a sequência é eventualmente nula ou polinomial")
    M = singular.modulus
    outer = _outer_minimum(singular)
    mindist = _min_distance(singular)
    candidates = []
    if outer is not None:
        candidates.append(M / 8 + 7 * outer / 8)
    if mindist is not None:
        candidates.append(M + 3 * mindist / 4)
    if candidates:
        bound = min(candidates, key=lambda c: float(c.mid()))
        R0 = floor_dyadic(bound, error_bits)
    else:
        R0 = ceil_dyadic(2 * M, error_bits)
    R1 = ceil_dyadic(arb(R0) - M, error_bits)
    if not (arb(R0) > M) or not (arb(R1) > 0):
        raise ParameterError(f"R₀ = {R0} não excede M = {M.str(10)}")
    if outer is not None and not (arb(R0) < outer):
        raise ParameterError(f"R₀ = {R0} não fica abaixo de min |ξ| = {outer.str(10)}")
    if mindist is not None and not (arb(R1) < mindist):
        raise ParameterError(f"R₁ = {R1} não fica abaixo de {mindist.str(10)}")

    if mindist is not None:
        N1 = int(math.ceil(float((2 * M / mindist).upper())))
    else:
        N1 = 0
    N3 = int(math.floor(float((M / arb(R1)).upper()))) + 1
    width = max([abs(nu) + r + 1 for nu, r in exponents] or [arb(1)], key=lambda w: float(w.upper()))
    D = ceil_dyadic(width, error_bits)
    scaled = fmpq(21, 10) * D
    N2 = int(-((-scaled.p) // scaled.q))
    N0 = max(n0, N1, N2, N3)
    s = fmpq(N0) / D
    logger.info(f"Contorno: R₀={R0}, R₁={R1}, N₁={N1}, N₂={N2}, N₃={N3}, N₀={N0}")
    return ContourParams(R0=R0, R1=R1, M=M, N0=N0, N1=N1, N2=N2, N3=N3, s=s)


def _nu_ball(nu: Union[AlgebraicNumber, acb]) -> acb:
    return nu.enclosure() if isinstance(nu, AlgebraicNumber) else nu


def small_circle_bound(nu, r: int, b: Sequence[arb], rho_modulus: arb, n0: int) -> LocalErrorBound:
    """
    Cota do círculo pequeno |z − ρ| = |ρ|/n para n ≥ n₀.

    A constante é e^(π|Im ν|)/(1 − 1/n₀)^(n₀+1).
    """
    if n0 < 2:
        raise ParameterError(f"n₀ = {n0} < 2 no círculo pequeno")
    nu = _nu_ball(nu)
    growth = (arb.pi() * abs(nu.imag)).exp()
    shrink = (1 - arb(fmpq(1, n0))) ** (n0 + 1)
    return LocalErrorBound(
        kind="small_circle",
        rho_modulus=rho_modulus,
        nu=nu,
        r=r,
        b=tuple(b),
        constant=arb((growth / shrink).abs_upper()),
    )


def _segment_factor(beta: arb, s: arb) -> arb:
    """C(β): 1 para β ≤ 0 e 2((s−2)e/(2sβ))^β para β > 0."""
    if beta <= 0:
        return arb(1)
    c = (s - 2) * arb(1).exp() / (2 * s)
    if beta > 0:
        return 2 * (c / beta) ** beta
    # β encosta em 0: sup_{β>0} (c/β)^β = e^(c/e)
    return 2 * (c / arb(1).exp()).exp()


def segment_bound(nu, r: int, b: Sequence[arb], rho_modulus: arb, s) -> LocalErrorBound:
    """Cota dos dois segmentos ao longo do corte, no limite de abertura nula."""
    nu = _nu_ball(nu)
    s = arb(s)
    if not (s > 2):
        raise ParameterError(f"s = {s.str(5)} deve exceder 2")
    beta = nu.real + r
    growth = (arb.pi() * abs(nu.imag)).exp()
    constant = _segment_factor(beta, s) / arb.pi() * growth
    return LocalErrorBound(
        kind="segment",
        rho_modulus=rho_modulus,
        nu=nu,
        r=r,
        b=tuple(b),
        constant=arb(constant.abs_upper()),
    )


def analytic_skip(nu, r: int, kappa: int) -> bool:
    """Verdadeiro se t^(ν+r) Σ h_k L^k é analítica em ρ: ν + r inteiro ≥ 0 e κ = 0."""
    if kappa != 0:
        return False
    if isinstance(nu, AlgebraicNumber):
        if not nu.is_rational():
            return False
        value = nu.rational_value() + r
        return value.q == 1 and value >= 0
    n = exact_integer(nu + r)
    return n is not None and n >= 0


class ExplicitPart(BaseModel):
    """
    ℓ_ρ(z) = Σ_classes t^ν0 Σ_{n<r_c} t^n Σ_k W_n[k] L^k, com t = (z − ρ)/h.

    `pieces` guarda (ν0, linhas W_0..W_{r_c−1}) de cada classe.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    point: AlgebraicNumber
    center: acb
    h: acb
    sigma: int
    pieces: Tuple[Tuple[acb, Tuple[Tuple[acb, ...], ...]], ...]

    def evaluate(self, z: acb, side: Optional[str] = None) -> acb:
        t = (z - self.center) / self.h
        log_t = log_ball(t, side)
        big_l = log_t if self.sigma == 1 else -log_t
        total = acb(0)
        for nu0, rows in self.pieces:
            inner = acb(0)
            for row in reversed(rows):
                value = acb(0)
                for c in reversed(row):
                    value = value * big_l + c
                inner = inner * t + value
            total += (nu0 * log_t).exp() * inner
        return total


def _sectors(angles: List[float]) -> List[Tuple[int, int, float, float]]:
    """Setores (ia, ib, a, b) entre argumentos dominantes consecutivos."""
    if len(angles) == 1:
        return [(0, 0, angles[0], angles[0] + 2 * math.pi)]
    out = []
    for i, a in enumerate(angles):
        j = (i + 1) % len(angles)
        b = angles[j] if j else angles[0] + 2 * math.pi
        out.append((i, j, a, b))
    return out


def _arc_center(R0: fmpq, angle: arb, bits: int) -> ExactPoint:
    z = acb(arb(R0) * angle.cos(), arb(R0) * angle.sin())
    return ExactPoint.from_ball(z, bits)


def big_circle_bound(
    op: DiffOp,
    start: ExactPoint,
    start_coords: Sequence[acb],
    singular: SingularSet,
    parts: Sequence[ExplicitPart],
    params: ContourParams,
    error_bits: int,
) -> arb:
    """
    C_B ≥ sup_{|z|=R₀} |f(z) − Σ_ρ ℓ_ρ(z)|, incluindo os dois limites laterais nos cortes.

    Cobre o círculo com quadrados de lado min_ξ |R₀ − |ξ||/5 centrados em
    pontos diádicos do arco. Cada setor entre argumentos dominantes
    consecutivos é alcançado pelo centro do meio e percorrido nos dois
    sentidos; os quadrados da primeira metade usam o lado "below" do corte
    de ρ_a e os da segunda o lado "above" do corte de ρ_b.

    Args:
        op: Operador
        start: Ponto de partida z_a
        start_coords: Coordenadas de Taylor de f em z_a
        singular: Conjunto singular
        parts: Partes explícitas ℓ_ρ, na ordem de `singular.dominant`
        params: Parâmetros do contorno
        error_bits: Precisão fixa do cálculo
    """
    points = list(singular.points)
    with workprec(error_bits):
        R0 = arb(params.R0)
        gap = min((abs(R0 - p.modulus()) for p in points), key=lambda g: float(g.lower()))
        half_side = arb(floor_dyadic(arb(gap.lower()) / 10, error_bits))
        if not (half_side > 0):
            raise ParameterError("Quadrados do círculo grande degeneraram")
        angles = [float(p.argument().mid()) for p in singular.dominant]
        bound = arb(0)
        squares = 0
        for ia, ib, a, b in _sectors(angles):
            span = arb(b) - arb(a)
            m = max(2, int(math.ceil(float((span * R0 / half_side).upper()))))
            centers = [_arc_center(params.R0, arb(a) + span * fmpq(i, m), error_bits) for i in range(m + 1)]
            mid = m // 2
            path = plan_path(start, centers[mid], points)
            coords = {mid: apply_matrix(propagate(op, path, points), start_coords)}
            for i in range(mid + 1, m + 1):
                coords[i] = apply_matrix(bisected_step(op, centers[i - 1], centers[i], points), coords[i - 1])
            for i in range(mid - 1, -1, -1):
                coords[i] = apply_matrix(bisected_step(op, centers[i + 1], centers[i], points), coords[i + 1])
            for i in range(m + 1):
                f_box = enclose_f_on_square(op, coords[i], centers[i], half_side, points)
                box = centers[i].ball() + disk(half_side)
                ell = acb(0)
                for j, part in enumerate(parts):
                    side = None
                    if j == ia and (ia != ib or i <= mid):
                        side = "below"
                    elif j == ib and (ia != ib or i > mid):
                        side = "above"
                    ell += part.evaluate(box, side)
                value = arb(abs(f_box - ell).abs_upper())
                if value > bound:
                    bound = value
            squares += m + 1
    logger.debug(f"Círculo grande: {squares} quadrados de meio-lado {half_side.str(5)}")
    logger.info(f"C_B = {bound.str(8)}")
    return bound
