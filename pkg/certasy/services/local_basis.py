"""
Base de Frobenius num ponto singular regular (ou ordinário).

Cada elemento da base é t^ν0 Σ_n t^n U_n(L), com U_n polinômio no
logaritmo local L. Os coeficientes saem da recorrência

    Q_0(ν0+n+σ∂) U_n = −Σ_{k≥1} Q_k(ν0+n−k+σ∂) U_{n−k}

resolvida em bolas; a estrutura (expoentes, multiplicidades, grau em L)
é decidida de forma exata. Os restos das séries são controlados por um
majorante geométrico |U_n| ≤ C·â^n obtido da parte característica da
recorrência e verificado em aritmética de bolas para todo n ≥ N*.
"""
import logging
from math import comb, perm
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from flint import acb, acb_mat, arb, fmpq
from pydantic import BaseModel, ConfigDict

from certasy.config import settings
from certasy.exceptions import MathematicalFailure
from certasy.services.algebraic import AlgebraicNumber
from certasy.services.dfinite_core import (
    DiffOp,
    ExponentClass,
    LocalOperator,
    PointKind,
    exponent_roots,
    falling_factorial_coeffs,
    local_operator,
)

logger = logging.getLogger(__name__)


class MajorantFailure(MathematicalFailure):
    """Não foi encontrado majorante geométrico válido abaixo do limite de trabalho"""
    pass


class BallOperator:
    """Coeficientes de Q_k(θ) em bolas, com a convenção de sinal σ do logaritmo."""

    __slots__ = ("rows", "order", "sigma")

    def __init__(self, rows: List[List[acb]], order: int, sigma: int):
        while len(rows) > 1 and all(c.is_zero() for c in rows[-1]):
            rows = rows[:-1]
        self.rows = rows
        self.order = order
        self.sigma = sigma

    @classmethod
    def from_local(cls, lop: LocalOperator) -> "BallOperator":
        return cls(lop.q_balls(), lop.order, lop.sigma)

    @classmethod
    def ordinary(cls, op: DiffOp, center: acb) -> "BallOperator":
        """Forma em θ = δ·d/dδ do operador deslocado para um centro ordinário."""
        q = op.order
        shifted = op.shifted_coeffs(center)
        depth = max(len(p) - 1 - j for j, p in enumerate(shifted)) + q
        rows = []
        for k in range(depth + 1):
            row = [acb(0)] * (q + 1)
            for j, p in enumerate(shifted):
                i = k - q + j
                if 0 <= i < len(p) and not p[i].is_zero():
                    for d, s in enumerate(falling_factorial_coeffs(j)):
                        if s:
                            row[d] += p[i] * s
            rows.append(row)
        return cls(rows, q, 1)

    @property
    def depth(self) -> int:
        """K: número de termos anteriores que a recorrência usa."""
        return len(self.rows) - 1

    def leading(self, k: int) -> acb:
        return self.rows[k][self.order]


def _taylor_shift(coeffs: Sequence, point, zero) -> list:
    """Coeficientes de P(point + x) em x, isto é P^(m)(point)/m!."""
    out: list = []
    for c in reversed(coeffs):
        new = [zero] * (len(out) + 1)
        for i, s in enumerate(out):
            new[i] = new[i] + s * point
            new[i + 1] = new[i + 1] + s
        new[0] = new[0] + c
        out = new
    return out


def _apply(shifted: Sequence, sigma: int, u: Sequence, zero) -> list:
    """Σ_m shifted[m]·σ^m·∂^m aplicado ao vetor de coeficientes em L."""
    width = len(u)
    out = [zero] * width
    for m, a in enumerate(shifted):
        if m >= width:
            break
        if a.is_zero():
            continue
        s = sigma ** m
        for k in range(width - m):
            if u[k + m].is_zero():
                continue
            out[k] = out[k] + a * s * u[k + m] * perm(k + m, m)
    return out


def _solve_position(shifted0: Sequence, rhs: Sequence, sigma: int, mu: int, zero) -> list:
    """
    Resolve Q_0(λ+σ∂)U = rhs quando λ é raiz de multiplicidade μ (μ = 0 fora das raízes).

    Resolve V = ∂^μ U pelo operador de coeficiente líder a_μ e integra μ vezes;
    a parte livre (grau < μ) fica nula.
    """
    width = len(rhs)
    lead = shifted0[mu]
    sign = sigma ** mu
    v = [zero] * width
    for k in reversed(range(width)):
        acc = rhs[k] * sign
        for m in range(1, len(shifted0) - mu):
            if k + m >= width:
                break
            a = shifted0[mu + m]
            if a.is_zero() or v[k + m].is_zero():
                continue
            acc = acc - a * (sigma ** m) * v[k + m] * perm(k + m, m)
        v[k] = acc / lead
    for _ in range(mu):
        v = [zero] + [v[k] / (k + 1) for k in range(width - 1)]
    return v


def _extend_series(
    rows: Sequence[Sequence],
    sigma: int,
    nu0,
    members: Dict[int, int],
    start: int,
    log_start: int,
    width: int,
    log_free: bool,
    coeffs: List[list],
    upto: int,
    zero,
    one,
) -> List[list]:
    """Acrescenta U_n para n = len(coeffs) .. upto−1, em bolas ou exatamente."""
    coeffs = list(coeffs)
    depth = len(rows) - 1
    for n in range(len(coeffs), upto):
        mu = members.get(n, 0)
        if n < start:
            coeffs.append([zero] * width)
            continue
        if log_free and n == start:
            coeffs.append([one] + [zero] * (width - 1))
            continue
        if log_free and mu:
            coeffs.append([zero] * width)
            continue
        rhs = [zero] * width
        for k in range(1, min(n, depth) + 1):
            u = coeffs[n - k]
            if all(x.is_zero() for x in u):
                continue
            applied = _apply(_taylor_shift(rows[k], nu0 + (n - k), zero), sigma, u, zero)
            rhs = [a - b for a, b in zip(rhs, applied)]
        if log_free:
            mu = 0
        shifted0 = _taylor_shift(rows[0], nu0 + n, zero)
        u = _solve_position(shifted0, rhs, sigma, mu, zero)
        if n == start:
            u[log_start] = u[log_start] + one
        coeffs.append(u)
    return coeffs


class LogSeriesSolution(BaseModel):
    """
    Série t^ν0 Σ_n t^n U_n(L) de uma classe de expoentes.

    `coeffs[n][k]` é o coeficiente de t^(ν0+n) L^k. Um elemento da base tem
    U_n = 0 para n < start e U_start = L^log_start; combinações de
    elementos usam log_start = −1.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    operator: BallOperator
    base: acb
    base_exact: Optional[AlgebraicNumber] = None
    members: Tuple[Tuple[int, int], ...]
    start: int
    log_start: int
    kappa: int
    log_free: bool = False
    class_index: int = 0
    coeffs: Tuple[Tuple[acb, ...], ...] = ()

    @property
    def truncation(self) -> int:
        return len(self.coeffs)

    @property
    def triangular_index(self) -> int:
        return self.log_start

    @property
    def max_offset(self) -> int:
        return max(m for m, _ in self.members)

    @property
    def exponent(self) -> acb:
        return self.base + self.start

    def table(self) -> List[Tuple[acb, ...]]:
        """d_{i,k}: coeficientes relativos ao próprio expoente ν0 + start."""
        return list(self.coeffs[self.start:])

    def is_analytic(self) -> bool:
        """Série de potências inteira em t (expoente inteiro ≥ 0, sem logaritmo)."""
        if self.log_free:
            return True
        if self.kappa != 0 or self.base_exact is None or not self.base_exact.is_rational():
            return False
        value = self.base_exact.rational_value() + self.start
        return value.q == 1 and value >= 0


def extend_coefficients(sol: LogSeriesSolution, up_to: int) -> LogSeriesSolution:
    """Preenche a tabela de coeficientes até o índice up_to (exclusivo)."""
    if up_to <= sol.truncation:
        return sol
    coeffs = _extend_series(
        sol.operator.rows,
        sol.operator.sigma,
        sol.base,
        dict(sol.members),
        sol.start,
        sol.log_start,
        sol.kappa + 1,
        sol.log_free,
        [list(u) for u in sol.coeffs],
        up_to,
        acb(0),
        acb(1),
    )
    return sol.model_copy(update={"coeffs": tuple(tuple(u) for u in coeffs)})


def _structural_kappa(members: Dict[int, int], start: int, log_start: int) -> int:
    return log_start + sum(mu for m, mu in members.items() if m > start)


def exact_table(lop: LocalOperator, cls: ExponentClass, start: int, log_start: int, upto: int) -> List[list]:
    """
    Coeficientes U_0..U_{upto−1} de um elemento da base, exatos em ℚ(ρ).

    Exige base racional da classe de expoentes.
    """
    members = dict(cls.members)
    width = _structural_kappa(members, start, log_start) + 1
    field = lop.field
    zero, one = field.zero(), field.one()
    rows = [list(r) for r in lop.q_coeffs]
    nu0 = field.element(cls.base.rational_value())
    return _extend_series(rows, lop.sigma, nu0, members, start, log_start, width, False, [], upto, zero, one)


def _exact_kappa(lop: LocalOperator, cls: ExponentClass, start: int, log_start: int) -> int:
    """Grau exato em L, calculado em ℚ(ρ) até o último deslocamento da classe."""
    coeffs = exact_table(lop, cls, start, log_start, cls.max_offset + 1)
    degree = 0
    for u in coeffs:
        for k, c in enumerate(u):
            if not c.is_zero():
                degree = max(degree, k)
    return degree


class LocalBasis(BaseModel):
    """Base de soluções locais num ponto, na ordem classe → deslocamento → índice triangular."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    point: Optional[AlgebraicNumber] = None
    center: acb
    h: acb
    sigma: int
    kind: PointKind
    operator: BallOperator
    classes: Tuple[ExponentClass, ...] = ()
    solutions: Tuple[LogSeriesSolution, ...]
    local: Optional[LocalOperator] = None

    def class_of(self, index: int) -> List[int]:
        """Índices dos elementos da base na mesma classe que o elemento `index`."""
        target = self.solutions[index]
        return [i for i, s in enumerate(self.solutions) if s.class_index == target.class_index]


def local_basis_structure(op: DiffOp, point: AlgebraicNumber) -> LocalBasis:
    """
    Base de Frobenius triangular em ρ.

    Raises:
        IrregularPoint: Se ρ for singular irregular
    """
    lop = local_operator(op, point)
    classes = exponent_roots(lop.field, lop.indicial())
    log_free = lop.kind == "ordinary"
    operator = BallOperator.from_local(lop)
    solutions = []
    for index, cls in enumerate(classes):
        base = cls.base.enclosure()
        members = dict(cls.members)
        exact = cls.base.is_rational() and not log_free
        for offset, mu in cls.members:
            for log_start in range(mu):
                if log_free:
                    kappa = 0
                elif exact:
                    kappa = _exact_kappa(lop, cls, offset, log_start)
                else:
                    kappa = _structural_kappa(members, offset, log_start)
                sol = LogSeriesSolution(
                    operator=operator,
                    base=base,
                    base_exact=cls.base,
                    members=cls.members,
                    start=offset,
                    log_start=log_start,
                    kappa=kappa,
                    log_free=log_free,
                    class_index=index,
                )
                solutions.append(extend_coefficients(sol, cls.max_offset + 1))
    logger.debug(
        f"Base local em {point.describe()}: {len(solutions)} elementos, "
        f"expoentes {[c.base.describe() for c in classes]}"
    )
    h = lop.h.ball()
    return LocalBasis(
        point=point,
        center=point.enclosure(),
        h=h,
        sigma=lop.sigma,
        kind=lop.kind,
        operator=operator,
        classes=tuple(classes),
        solutions=tuple(solutions),
        local=lop,
    )


def ordinary_basis(op: DiffOp, center: acb) -> LocalBasis:
    """Base y_j = δ^j + O(δ^q) num centro ordinário exato."""
    q = op.order
    operator = BallOperator.ordinary(op, center)
    members = tuple((j, 1) for j in range(q))
    solutions = []
    for j in range(q):
        sol = LogSeriesSolution(
            operator=operator,
            base=acb(0),
            members=members,
            start=j,
            log_start=0,
            kappa=0,
            log_free=True,
        )
        solutions.append(extend_coefficients(sol, q))
    return LocalBasis(
        center=center,
        h=acb(1),
        sigma=1,
        kind="ordinary",
        operator=operator,
        solutions=tuple(solutions),
    )


def combine_solutions(solutions: Sequence[LogSeriesSolution], weights: Sequence[acb]) -> LogSeriesSolution:
    """W = Σ c_e U^(e) para elementos de uma mesma classe."""
    first = solutions[0]
    upto = max(first.max_offset + 1, min(s.truncation for s in solutions))
    solutions = [extend_coefficients(s, upto) for s in solutions]
    kappa = max(s.kappa for s in solutions)
    coeffs = []
    for n in range(upto):
        row = [acb(0)] * (kappa + 1)
        for s, c in zip(solutions, weights):
            for k, d in enumerate(s.coeffs[n]):
                row[k] += c * d
        coeffs.append(tuple(row))
    return first.model_copy(
        update={
            "start": min(s.start for s in solutions),
            "log_start": -1,
            "kappa": kappa,
            "coeffs": tuple(coeffs),
        }
    )


class SplitSolution(BaseModel):
    """Parte explícita (n < r) e dados do resto t^(ν0+r) Σ_k h_k(t) L^k."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    explicit: Tuple[Tuple[acb, ...], ...]
    split: int
    exponent: acb
    kappa: int
    vanishing_tail: bool


def split_solution(sol: LogSeriesSolution, split: int) -> SplitSolution:
    """
    Separa os termos de índice < split.

    O resto é identicamente nulo quando split passou do último deslocamento
    e os K coeficientes seguintes são zeros exatos.
    """
    if split < 1:
        raise ValueError("A ordem de separação deve ser ≥ 1")
    depth = max(sol.operator.depth, 1)
    sol = extend_coefficients(sol, split + depth)
    vanishing = split > sol.max_offset and all(
        c.is_zero() for u in sol.coeffs[split: split + depth] for c in u
    )
    return SplitSolution(
        explicit=sol.coeffs[:split],
        split=split,
        exponent=sol.base + split,
        kappa=sol.kappa,
        vanishing_tail=vanishing,
    )


class TailMajorant(BaseModel):
    """|U_n[k]| ≤ C·a^n para todo n ≥ n_star; b_k limita h_k no disco de raio `radius`."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n_star: int
    C: arb
    a: arb
    radius: arb
    b: Tuple[arb, ...] = ()


def _upper_max(values) -> arb:
    """Maior dos limitantes superiores (exatos) de |v|."""
    best = arb(0)
    for v in values:
        upper = arb(v).abs_upper()
        if upper > best:
            best = upper
    return arb(best)


def _norm_inf(mat: acb_mat) -> arb:
    rows = []
    for i in range(mat.nrows()):
        row = arb(0)
        for j in range(mat.ncols()):
            row += abs(mat[i, j])
        rows.append(row)
    return _upper_max(rows)


def _companion(operator: BallOperator) -> acb_mat:
    depth = operator.depth
    lead = operator.leading(0)
    mat = acb_mat(depth, depth)
    for k in range(1, depth + 1):
        mat[0, k - 1] = -operator.leading(k) / lead
    for i in range(1, depth):
        mat[i, i - 1] = acb(1)
    return mat


def _power_constant(comp: acb_mat, a: arb) -> Tuple[int, arb]:
    """p com ‖C^p‖ ≤ a^p e K = max_{j<p} ‖C^j‖/a^j."""
    power = acb_mat(comp)
    best = arb(1)
    for p in range(1, settings.MAX_TAIL_TERMS + 1):
        norm = _norm_inf(power)
        if norm <= a ** p:
            return p, best
        ratio = norm / a ** p
        if ratio > best:
            best = arb(ratio.abs_upper())
        power = power * comp
    raise MajorantFailure("A parte característica da recorrência não contrai na taxa escolhida")


def _perturbation_matrix(operator: BallOperator, nu0: acb, k: int, eps: arb, width: int) -> acb_mat:
    """Ã_k(ε): Q_k(ν0+n−k+σ∂)/n^q como matriz nos coeficientes em L, com ε = 1/n."""
    q = operator.order
    sigma = operator.sigma
    mat = acb_mat(width, width)
    scale = 1 + (nu0 - k) * eps
    row = operator.rows[k]
    for r in range(width):
        for m in range(width - r):
            total = acb(0)
            for d, b in enumerate(row):
                if d < m or b.is_zero():
                    continue
                binom = comb(d, m)
                total += b * binom * eps ** (q - d + m) * scale ** (d - m)
            mat[r, r + m] = total * (sigma ** m) * perm(r + m, m)
    return mat


def _rate_candidates(radius: arb, r_conv: Optional[arb]) -> List[Tuple[arb, arb]]:
    """
    Pares (a, alvo) com 1/r_conv < a < alvo < 1/radius, na ordem de tentativa.
    """
    inv = 1 / radius
    if r_conv is None:
        a = inv / 2
        return [(a, (a + inv) / 2), (a, (a + 7 * inv) / 8)]
    spectral = 1 / r_conv
    a = 2 / (radius + r_conv)
    near = spectral + (inv - spectral) / 4
    return [(a, (a + inv) / 2), (a, (a + 7 * inv) / 8), (near, (near + 7 * inv) / 8)]


def _validate_rate(
    operator: BallOperator,
    nu0: acb,
    width: int,
    comp: acb_mat,
    a: arb,
    target: arb,
    min_index: int,
) -> Optional[Tuple[int, int, arb, arb]]:
    """(N*, p, K, â) com â = a + K·e(N*) ≤ alvo, ou None se não houver N* até MAX_TAIL_TERMS."""
    try:
        p, k_const = _power_constant(comp, a)
    except MajorantFailure:
        return None
    depth = operator.depth
    lead = operator.leading(0)
    n_star = max(min_index, depth)
    while n_star <= settings.MAX_TAIL_TERMS:
        eps = arb(fmpq(1, 2 * (n_star + 1)), fmpq(1, 2 * (n_star + 1)))
        a0 = _perturbation_matrix(operator, nu0, 0, eps, width)
        e = arb(0)
        try:
            for k in range(1, depth + 1):
                ak = _perturbation_matrix(operator, nu0, k, eps, width)
                ek = -a0.solve(ak)
                ratio = operator.leading(k) / lead
                for i in range(width):
                    ek[i, i] += ratio
                e += _norm_inf(ek)
        except ZeroDivisionError:
            e = None
        if e is not None:
            a_hat = a + k_const * e
            if a_hat <= target:
                return n_star, p, k_const, a_hat
        n_star *= 2
    return None


def geometric_majorant(
    operator: BallOperator,
    nu0: acb,
    width: int,
    coefficients: Callable[[int], Sequence[Sequence[acb]]],
    radius: arb,
    r_conv: Optional[arb],
    min_index: int,
) -> TailMajorant:
    """
    Majorante |U_n| ≤ C·â^n (n ≥ N*) com â·radius < 1.

    Args:
        operator: Recorrência local em bolas
        nu0: Base da classe de expoentes
        width: κ + 1
        coefficients: Função que devolve U_0..U_{m−1} para m pedido
        radius: Raio (na variável t) onde a cauda precisa ser controlada
        r_conv: Raio de convergência em t (None quando infinito)
        min_index: Menor N* admissível (além do último deslocamento da classe)

    Raises:
        MajorantFailure: Se nenhuma taxa candidata é validada até MAX_TAIL_TERMS
    """
    depth = operator.depth
    if depth == 0:
        return TailMajorant(n_star=min_index, C=arb(0), a=arb(0), radius=radius)
    if r_conv is not None and not (radius < r_conv):
        raise MajorantFailure(f"Raio {radius.str(5)} não é menor que o raio de convergência {r_conv.str(5)}")
    comp = _companion(operator)
    for a, target in _rate_candidates(radius, r_conv):
        a = arb(a.abs_upper())
        found = _validate_rate(operator, nu0, width, comp, a, target, min_index)
        if found is None:
            logger.debug(f"Taxa a={a.str(5)} não validada; tentando a próxima")
            continue
        n_star, p, k_const, a_hat = found
        series = coefficients(n_star + 1)
        x_norm = _upper_max(
            abs(c) for j in range(depth) if n_star - j >= 0 for c in series[n_star - j]
        )
        big_c = k_const * x_norm / a_hat ** n_star
        logger.debug(f"Majorante: N*={n_star}, p={p}, â={a_hat.str(5)}, C={big_c.str(5)}")
        return TailMajorant(n_star=n_star, C=arb(big_c.abs_upper()), a=arb(a_hat.abs_upper()), radius=radius)
    raise MajorantFailure(f"Majorante geométrico não validado até N* = {settings.MAX_TAIL_TERMS}")


def series_majorant(sol: LogSeriesSolution, radius: arb, r_conv: Optional[arb]) -> Tuple[LogSeriesSolution, TailMajorant]:
    """Majorante da série `sol`, estendendo os coeficientes conforme necessário."""
    holder = {"sol": sol}

    def coefficients(count: int):
        holder["sol"] = extend_coefficients(holder["sol"], count)
        return holder["sol"].coeffs

    majorant = geometric_majorant(
        sol.operator,
        sol.base,
        sol.kappa + 1,
        coefficients,
        radius,
        r_conv,
        sol.max_offset + 1,
    )
    return holder["sol"], majorant


def tail_bound_bk(sol: LogSeriesSolution, split: int, radius: arb, r_conv: Optional[arb]) -> TailMajorant:
    """
    Limitantes b_k ≥ sup_{|t| < radius} |h_k(t)|, h_k(t) = Σ_{i≥split} U_i[k] t^(i−split).

    Raises:
        MajorantFailure: Se o majorante geométrico não for validado
    """
    sol, majorant = series_majorant(sol, radius, r_conv)
    n_end = max(majorant.n_star, split)
    sol = extend_coefficients(sol, n_end)
    a_hat, big_c = majorant.a, majorant.C
    tail = big_c * a_hat ** n_end * radius ** (n_end - split) / (1 - a_hat * radius)
    b = []
    for k in range(sol.kappa + 1):
        total = arb(0)
        power = arb(1)
        for i in range(split, n_end):
            total += abs(sol.coeffs[i][k]) * power
            power *= radius
        b.append(arb((total + tail).abs_upper()))
    return majorant.model_copy(update={"b": tuple(b)})
