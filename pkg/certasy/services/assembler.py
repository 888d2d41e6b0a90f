"""
Montagem do limitante assintótico.

Encadeia conjunto singular, bases locais, conexões, coeficientes dos
monômios e cotas do contorno, e reduz tudo a

    f_n ∈ Σ a·ρ^(−n)·n^σ·log^k n + B(0, A·M^(−n)·n^(Re γ − r₀)·log^κ n),  n ≥ N₀.
"""
import logging
import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple

from flint import acb, arb, fmpq
from pydantic import BaseModel, ConfigDict

from certasy.config import settings
from certasy.exceptions import InputError, MathematicalFailure
from certasy.services.algebraic import AlgebraicNumber
from certasy.services.analytic_continuation import (
    SingularSystem,
    apply_matrix,
    connection_to_singularity,
    coords_at_origin,
    distance_to,
    matching_point,
    origin_transfer,
)
from certasy.services.ball_arith import Precision, disk, workprec
from certasy.services.contour_bounds import (
    ContourParams,
    ExplicitPart,
    LocalErrorBound,
    NoSingularity,
    analytic_skip,
    big_circle_bound,
    contour_params,
    segment_bound,
    small_circle_bound,
)
from certasy.services.dfinite_core import (
    DiffOp,
    IrregularPoint,
    Recurrence,
    SingularSet,
    classify_point,
    singular_points,
    unroll_recurrence,
)
from certasy.services.local_basis import (
    LocalBasis,
    LogSeriesSolution,
    combine_solutions,
    local_basis_structure,
    ordinary_basis,
    split_solution,
    tail_bound_bk,
)
from certasy.services.monomial_coeffs import CoeffAsyRequest, coeffasy

logger = logging.getLogger(__name__)

ZERO = AlgebraicNumber.rational(0)


class IrregularDominantSingularity(MathematicalFailure):
    """Uma singularidade dominante é singular irregular do operador"""
    pass


class BelowValidityFloor(InputError):
    """Avaliação pedida para n < N₀"""
    pass


class AsymptoticTerm(BaseModel):
    """
    coeff·ρ^(−n)·n^sigma·log^k n.

    Quando `base` é conhecido, sigma = −base − 1 − shift exatamente.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rho: AlgebraicNumber
    sigma: acb
    k: int
    coeff: acb
    base: Optional[AlgebraicNumber] = None
    shift: int = 0

    def value(self, n: int) -> acb:
        log_n = arb(n).log()
        rho = self.rho.enclosure()
        return self.coeff * rho ** (-n) * (self.sigma * log_n).exp() * log_n ** self.k


class ErrorTerm(BaseModel):
    """|R(n)| ≤ A·M^(−n)·n^(re_gamma − r0)·log^kappa n para n ≥ N0."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    A: arb
    M_modulus: arb
    re_gamma: arb
    r0: int
    kappa: int
    N0: int

    @property
    def exponent(self) -> arb:
        return self.re_gamma - self.r0

    def value(self, n: int) -> arb:
        log_n = arb(n).log()
        exponent = arb(self.exponent.upper())
        bound = self.A * self.M_modulus ** (-n) * (exponent * log_n).exp() * log_n ** self.kappa
        return arb(bound.abs_upper())


class AsymptoticBound(BaseModel):
    """Termos explícitos mais um único termo de erro, válidos para n ≥ N0."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    terms: Tuple[AsymptoticTerm, ...]
    error: ErrorTerm
    dominant: Tuple[AlgebraicNumber, ...]
    singularities: Tuple[AlgebraicNumber, ...]
    assume_analytic: Tuple[AlgebraicNumber, ...] = ()
    n0: int
    precision: int
    error_bits: int
    R0: fmpq
    big_circle: arb

    @property
    def N0(self) -> int:
        return self.error.N0

    @property
    def r0(self) -> int:
        return self.error.r0


class PositivityCertificate(BaseModel):
    """Resultado da certificação de positividade."""

    mode: Literal["positive", "nonconclusive"]
    crossover: Optional[int] = None
    checked_prefix: bool = False
    reason: Optional[Literal["complex-dominant", "sign-undecided", "nonpositive-prefix", "crossover-cap"]] = None


class Monomial(BaseModel):
    """Monômio bruto coeff·ρ^(−n)·n^theta·log^k n antes da padronização."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rho: AlgebraicNumber
    theta: acb
    k: int
    coeff: acb
    base: Optional[AlgebraicNumber] = None
    shift: int = 0


class LocalError(BaseModel):
    """Erro local já na forma constant·|ρ|^(−n)·n^theta·log^k n com k ≤ log_power."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    bounds: Tuple[LocalErrorBound, ...]
    theta: arb
    log_power: int


def _real_lower(z: acb) -> arb:
    return arb(z.real.lower())


def _class_members(basis: LocalBasis, index: int) -> List[int]:
    return [i for i, s in enumerate(basis.solutions) if s.class_index == index]


def _class_analytic(basis: LocalBasis, index: int) -> bool:
    """A classe inteira é analítica em ρ (expoentes inteiros ≥ 0, sem log)."""
    return all(basis.solutions[i].is_analytic() for i in _class_members(basis, index))


def _lambda(bases: Sequence[LocalBasis]) -> arb:
    """Bola que contém min Re ν0 sobre as classes não analíticas (todas, se não houver)."""
    reals = []
    for basis in bases:
        for index, cls in enumerate(basis.classes):
            if not _class_analytic(basis, index):
                reals.append(cls.base.enclosure().real)
    if not reals:
        reals = [cls.base.enclosure().real for basis in bases for cls in basis.classes]
    lower = min((r.lower() for r in reals), key=float)
    upper = min((r.upper() for r in reals), key=float)
    return lower + (upper - lower) * arb(0.5, 0.5)


def split_order(nu0: acb, lam: arb, r0: int) -> int:
    """r_c = max(1, r₀ + ⌈λ − Re ν0⌉), usando uma cota inferior de Re ν0 − λ ≥ 0."""
    gap = nu0.real.lower() - lam.upper()
    shift = max(0, math.floor(float(gap)))
    return max(1, r0 - shift)


def _dominant_bases(op: DiffOp, singular: SingularSet) -> List[LocalBasis]:
    bases = []
    for rho in singular.dominant:
        try:
            bases.append(local_basis_structure(op, rho))
        except IrregularPoint:
            raise IrregularDominantSingularity(f"A singularidade dominante {rho.describe()} é irregular")
    return bases


def _origin_basis(op: DiffOp) -> LocalBasis:
    if classify_point(op, ZERO) == "ordinary":
        return ordinary_basis(op, acb(0))
    return local_basis_structure(op, ZERO)


def _explicit_monomials(
    rho: AlgebraicNumber,
    base: AlgebraicNumber,
    combined: LogSeriesSolution,
    rows: Sequence[Sequence[acb]],
    params: ContourParams,
) -> List[Tuple[int, Monomial]]:
    """
    Monômios de [z^n] Σ_{i<r_c} Σ_k W_i[k] (1−z/ρ)^(ν0+i) log^k(1/(1−z/ρ)).

    Cada linha i vira coeffasy com α = −ν0−i e ordem r_c − i; o coeficiente
    de n^(−(r_c−i)) carrega o resto. Devolve pares (i + j, monômio), em que
    n^(−j) é a potência vinda de coeffasy.
    """
    nu0 = combined.base
    split = len(rows)
    out = []
    for i, row in enumerate(rows):
        if all(c.is_zero() for c in row):
            continue
        alpha = -(nu0 + i)
        result = coeffasy(
            CoeffAsyRequest(alpha=alpha, K=len(row) - 1, r=split - i, s=arb(params.s), n0=params.N0)
        )
        for k, w in enumerate(row):
            if w.is_zero():
                continue
            for exps, c in result.slice(k).terms():
                j, power = exps[0], exps[1]
                monomial = Monomial(
                    rho=rho, theta=alpha - 1 - j, k=power, coeff=w * c, base=base, shift=i + j
                )
                out.append((i + j, monomial))
    return out


def _merge_terms(keyed: Sequence[Tuple[Tuple, Monomial]]) -> List[Monomial]:
    """Soma monômios de mesma chave (ρ, classe, deslocamento, k): os expoentes coincidem exatamente."""
    merged: Dict[Tuple, Monomial] = {}
    for key, m in keyed:
        if key in merged:
            merged[key] = merged[key].model_copy(update={"coeff": merged[key].coeff + m.coeff})
        else:
            merged[key] = m
    return list(merged.values())


def standardize_and_absorb(
    monomials: Sequence[Monomial],
    local_errors: Sequence[LocalError],
    big_circle: arb,
    params: ContourParams,
    re_gamma: arb,
    r0: int,
) -> Tuple[List[AsymptoticTerm], ErrorTerm]:
    """
    Reduz monômios e erros a termos explícitos mais um termo de erro.

    Monômios com Re θ certificadamente ≤ Re γ − r₀ são absorvidos com fator
    N₀^(Re θ − β)·log^(k−κ) N₀; os demais ficam como termos. A parte do
    círculo grande C_B·R₀^(−n) entra com o máximo de (M/R₀)^n·n^(−β) em n ≥ N₀.
    """
    beta = re_gamma - r0
    N0 = params.N0
    log_n0 = arb(N0).log()
    terms: List[AsymptoticTerm] = []
    absorbed: List[Monomial] = []
    for m in monomials:
        if m.theta.real <= beta:
            absorbed.append(m)
        else:
            terms.append(
                AsymptoticTerm(rho=m.rho, sigma=m.theta, k=m.k, coeff=m.coeff, base=m.base, shift=m.shift)
            )
    kappa = max(
        [m.k for m in absorbed] + [e.log_power for e in local_errors] + [0]
    )
    A = arb(0)
    for m in absorbed:
        excess = arb(min(0.0, float((m.theta.real - beta).upper())))
        factor = (excess * log_n0).exp() * log_n0 ** (m.k - kappa)
        A += arb(abs(m.coeff).abs_upper()) * factor
    for e in local_errors:
        excess = arb(min(0.0, float((e.theta - beta).upper())))
        factor = (excess * log_n0).exp()
        for bound in e.bounds:
            A += bound.standard_constant(N0, kappa) * factor
    if not big_circle.is_zero():
        A += big_circle * _big_circle_factor(params, beta)
    A = arb(A.abs_upper())
    error = ErrorTerm(A=A, M_modulus=params.M, re_gamma=re_gamma, r0=r0, kappa=kappa, N0=N0)
    logger.info(f"Termo de erro: A = {A.str(6)}, expoente {beta.str(6)}, κ = {kappa}")
    return terms, error


def _big_circle_factor(params: ContourParams, beta: arb) -> arb:
    """max_{n≥N₀} (M/R₀)^n·n^(−β) (com log^κ n ≥ 1)."""
    x = arb((params.M / arb(params.R0)).upper())
    decay = -arb(beta.lower())
    N0 = params.N0
    at_floor = x ** N0 * (decay * arb(N0).log()).exp()
    if decay <= 0:
        return arb(at_floor.abs_upper())
    peak = decay / (-x.log())
    if peak <= N0:
        return arb(at_floor.abs_upper())
    value = (-decay).exp() * peak ** decay
    return arb(value.abs_upper())


def _pipeline(
    op: DiffOp,
    initial: Sequence[fmpq],
    r0: int,
    n0: int,
    assume_analytic: Sequence[AlgebraicNumber],
    precision: Precision,
) -> AsymptoticBound:
    singular = singular_points(op, assume_analytic)
    if not singular.dominant:
        raise NoSingularity("Não há singularidade dominante fora de Ξᵃ ∪ {0}")
    bases = _dominant_bases(op, singular)

    lam = _lambda(bases)
    splits: List[Dict[int, int]] = []
    exponents = []
    for basis in bases:
        per_class = {}
        for index, cls in enumerate(basis.classes):
            nu0 = cls.base.enclosure()
            per_class[index] = split_order(nu0, lam, r0)
            exponents.append((nu0, per_class[index]))
        splits.append(per_class)
    params = contour_params(singular, exponents, n0, precision.error_bits)

    basis0 = _origin_basis(op)
    c0 = coords_at_origin(op, initial, basis0)
    toward = matching_point(singular.dominant[0], arb(params.R1))
    start, origin_matrix = origin_transfer(basis0, toward, singular.others(ZERO))
    start_coords = apply_matrix(origin_matrix, c0)

    radius_t = arb((arb(params.R1) / params.M).upper())
    keyed: List[Tuple[Tuple, Monomial]] = []
    local_errors: List[LocalError] = []
    parts: List[ExplicitPart] = []
    for rho_idx, (rho, basis) in enumerate(zip(singular.dominant, bases)):
        connection = connection_to_singularity(
            op, basis, start, origin_matrix, list(singular.points), arb(params.R1)
        )
        coords = apply_matrix(connection, c0)
        dist = distance_to(basis.center, singular.others(rho))
        r_conv = None if dist is None else dist / abs(basis.h)
        rho_modulus = abs(basis.center)
        pieces = []
        for index, cls in enumerate(basis.classes):
            members = _class_members(basis, index)
            weights = [coords[i] for i in members]
            if all(w.is_zero() for w in weights) or _class_analytic(basis, index):
                continue
            combined = combine_solutions([basis.solutions[i] for i in members], weights)
            split = splits[rho_idx][index]
            part = split_solution(combined, split)
            pieces.append((combined.base, part.explicit))
            for shift, m in _explicit_monomials(rho, cls.base, combined, part.explicit, params):
                keyed.append(((rho_idx, index, shift, m.k), m))
            if part.vanishing_tail or analytic_skip(cls.base, split, combined.kappa):
                continue
            tail = tail_bound_bk(combined, split, radius_t, r_conv)
            small = small_circle_bound(combined.base, split, tail.b, rho_modulus, params.N0)
            segment = segment_bound(combined.base, split, tail.b, rho_modulus, params.s)
            local_errors.append(
                LocalError(bounds=(small, segment), theta=-small.exponent_decay, log_power=len(tail.b) - 1)
            )
        parts.append(
            ExplicitPart(point=rho, center=basis.center, h=basis.h, sigma=basis.sigma, pieces=tuple(pieces))
        )

    C_B = big_circle_bound(op, start, start_coords, singular, parts, params, precision.error_bits)
    re_gamma = -lam - 1
    terms, error = standardize_and_absorb(_merge_terms(keyed), local_errors, C_B, params, re_gamma, r0)
    return AsymptoticBound(
        terms=tuple(terms),
        error=error,
        dominant=singular.dominant,
        singularities=singular.points,
        assume_analytic=singular.analytic,
        n0=n0,
        precision=precision.bits,
        error_bits=precision.error_bits,
        R0=params.R0,
        big_circle=C_B,
    )


def run_pipeline(
    op: DiffOp,
    initial: Sequence,
    r0: int,
    n0: int = 0,
    assume_analytic: Sequence[AlgebraicNumber] = (),
    precision: Optional[Precision] = None,
) -> AsymptoticBound:
    """
    Expansão assintótica de f_n com limitante de erro explícito.

    Repete com precisão dobrada enquanto a matriz de casamento não for
    certificada invertível, até MAX_PRECISION_BITS.

    Raises:
        IrregularDominantSingularity: Se alguma singularidade dominante for irregular
        NoSingularity: Se não houver singularidade dominante
        MajorantFailure: Se um majorante de cauda não for validado
        SingularSystem: Se a precisão máxima não bastar
    """
    if op.order < 1:
        raise ValueError("O operador deve ter ordem ≥ 1")
    if r0 < 1:
        raise ValueError("A ordem r₀ da expansão deve ser ≥ 1")
    precision = precision or Precision()
    bits = precision.bits
    while True:
        try:
            with workprec(bits):
                current = precision.model_copy(update={"bits": bits})
                return _pipeline(op, initial, r0, n0, assume_analytic, current)
        except SingularSystem as e:
            if 2 * bits > settings.MAX_PRECISION_BITS:
                raise
            logger.warning(f"{e}; repetindo com {2 * bits} bits")
            bits *= 2


def evaluate_bound_at(bound: AsymptoticBound, n: int) -> acb:
    """
    Bola Σ termos(n) alargada pelo erro em n.

    Raises:
        BelowValidityFloor: Se n < N₀
    """
    if n < bound.N0:
        raise BelowValidityFloor(f"n = {n} abaixo de N₀ = {bound.N0}")
    with workprec(bound.precision):
        total = acb(0)
        for term in bound.terms:
            total += term.value(n)
        return total + disk(bound.error.value(n))


def _decreasing_floor(a: arb, b: int) -> int:
    """Menor n a partir do qual n^(−a)·log^b n decresce (a > 0)."""
    if b <= 0:
        return 2
    return max(2, int(math.ceil(float((arb(b) / arb(a.lower())).exp().upper()))))


def _rest_bound(n: int, ratios: Sequence[Tuple[arb, arb, int]]) -> arb:
    """Σ |c|·n^(−a)·log^b n."""
    log_n = arb(n).log()
    total = arb(0)
    for c, a, b in ratios:
        total += c * (-a * log_n).exp() * log_n ** b
    return total


def certify_positivity(bound: AsymptoticBound, rec: Recurrence, initial: Sequence) -> PositivityCertificate:
    """
    Certifica f_n > 0 para todo n ≥ 0.

    O termo líder precisa vir de uma singularidade real positiva, com
    expoente real e coeficiente de parte real positiva; os demais termos e
    o erro, divididos por ele, são somas de n^(−a) log^b n decrescentes a
    partir de pisos explícitos. O prefixo n < N_pos é verificado por
    desenrolamento exato.
    """
    with workprec(bound.precision):
        leaders = list(bound.terms)
        if not leaders:
            return PositivityCertificate(mode="nonconclusive", reason="sign-undecided")
        lead = max(leaders, key=lambda t: (float(t.sigma.real.mid()), t.k))
        rho = lead.rho
        if not (rho.is_real() and rho.enclosure().real > 0 and lead.sigma.imag.is_zero()):
            logger.warning("Termo líder vem de singularidade não real positiva")
            return PositivityCertificate(mode="nonconclusive", reason="complex-dominant")
        if not (lead.coeff.real > 0):
            logger.warning(f"Sinal do coeficiente líder {lead.coeff.str(6)} não certificado")
            return PositivityCertificate(mode="nonconclusive", reason="sign-undecided")

        ratios = []
        floor = bound.N0
        for t in bound.terms:
            if t is lead:
                continue
            a = lead.sigma.real - t.sigma.real
            b = t.k - lead.k
            if not (a > 0 or (a.is_zero() and b < 0)):
                reason = "sign-undecided" if t.rho.same_as(rho) else "complex-dominant"
                logger.warning(f"Termo em {t.rho.describe()} não é dominado pelo termo líder")
                return PositivityCertificate(mode="nonconclusive", reason=reason)
            if a > 0:
                floor = max(floor, _decreasing_floor(a, b))
            ratios.append((arb(abs(t.coeff).abs_upper()), a if a > 0 else arb(0), b))
        a = lead.sigma.real - arb(bound.error.exponent.upper())
        if not (a > 0):
            return PositivityCertificate(mode="nonconclusive", reason="sign-undecided")
        b = bound.error.kappa - lead.k
        floor = max(floor, _decreasing_floor(a, b))
        ratios.append((bound.error.A, a, b))
        c_low = _real_lower(lead.coeff)

        def holds(n: int) -> bool:
            return bool(c_low - _rest_bound(n, ratios) > 0)

        n = floor
        while not holds(n):
            n *= 2
            if n > settings.POSITIVITY_MAX_CROSSOVER:
                logger.warning(f"Cruzamento acima de {settings.POSITIVITY_MAX_CROSSOVER}")
                return PositivityCertificate(mode="nonconclusive", reason="crossover-cap")
        low, high = max(floor, n // 2), n
        while low < high:
            middle = (low + high) // 2
            if holds(middle):
                high = middle
            else:
                low = middle + 1
        crossover = high

    if crossover > settings.POSITIVITY_MAX_PREFIX:
        return PositivityCertificate(mode="nonconclusive", crossover=crossover, reason="crossover-cap")
    values = unroll_recurrence(rec, initial, crossover - 1)
    if any(v <= 0 for v in values[:crossover]):
        logger.warning("Prefixo com termo não positivo")
        return PositivityCertificate(
            mode="nonconclusive", crossover=crossover, checked_prefix=True, reason="nonpositive-prefix"
        )
    logger.info(f"Positividade certificada: N_pos = {crossover}")
    return PositivityCertificate(mode="positive", crossover=crossover, checked_prefix=True)
