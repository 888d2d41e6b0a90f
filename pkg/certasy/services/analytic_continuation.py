"""
Continuação analítica rigorosa das coordenadas de f.

Matrizes de transição entre pontos ordinários exatos (somas de Taylor com
restos majorados), casamento com a base de Frobenius num ponto singular,
coordenadas de f na origem e envoltória de f sobre quadrados.

Coordenadas num ponto ordinário z são sempre as de Taylor,
F_m = f^(m)(z)/m! para m < q; a base ordinária y_j = δ^j + O(δ^q) tem
exatamente essas coordenadas.
"""
import cmath
import logging
import math
from math import comb, factorial
from typing import List, Literal, Optional, Sequence, Tuple, Union

from flint import acb, acb_mat, arb, ctx, fmpq
from pydantic import BaseModel, ConfigDict
from sympy import Matrix

from certasy.config import settings
from certasy.exceptions import MathematicalFailure
from certasy.services.algebraic import AlgebraicNumber, from_rational, to_rational
from certasy.services.ball_arith import disk, log_ball
from certasy.services.dfinite_core import (
    DiffOp,
    InconsistentInitialTerms,
    diffop_to_recurrence,
    falling_factorial_coeffs,
    unroll_recurrence,
)
from certasy.services.local_basis import (
    LocalBasis,
    LogSeriesSolution,
    MajorantFailure,
    combine_solutions,
    exact_table,
    extend_coefficients,
    ordinary_basis,
    series_majorant,
)
from certasy.utils.dyadic import ExactPoint

logger = logging.getLogger(__name__)

GUARD_BITS = 16
ORIGIN_RATIO = fmpq(2, 5)
MAX_BISECTIONS = 6

PointLike = Union[AlgebraicNumber, acb]


class StepTooLarge(MathematicalFailure):
    """Passo de continuação maior que metade da distância ao conjunto singular"""
    pass


class SingularSystem(MathematicalFailure):
    """A matriz de casamento no ponto singular não foi certificada invertível"""
    pass


class Path(BaseModel):
    """Poligonal de pontos diádicos exatos; só as extremidades podem tocar Ξ."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    waypoints: Tuple[ExactPoint, ...]
    endpoint_kind: Literal["ordinary", "singular"] = "ordinary"

    @property
    def steps(self) -> int:
        return len(self.waypoints) - 1


def _balls(points: Sequence[PointLike]) -> List[acb]:
    return [p.enclosure() if isinstance(p, AlgebraicNumber) else p for p in points]


def _approx(z: Union[acb, ExactPoint]) -> complex:
    if isinstance(z, ExactPoint):
        z = z.ball()
    return complex(float(z.real.mid()), float(z.imag.mid()))


def _grid_bits() -> int:
    return max(24, ctx.prec // 2)


def identity_matrix(q: int) -> acb_mat:
    mat = acb_mat(q, q)
    for i in range(q):
        mat[i, i] = acb(1)
    return mat


def apply_matrix(mat: acb_mat, vec: Sequence[acb]) -> List[acb]:
    """mat·vec para um vetor de bolas."""
    out = []
    for i in range(mat.nrows()):
        total = acb(0)
        for j in range(mat.ncols()):
            total += mat[i, j] * vec[j]
        out.append(total)
    return out


def distance_to(z: acb, points: Sequence[PointLike]) -> Optional[arb]:
    """Cota inferior de min |z − ξ| (None se não há pontos)."""
    best = None
    for p in _balls(points):
        d = abs(z - p).lower()
        if best is None or d < best:
            best = d
    if best is None:
        return None
    return arb(0) if best < 0 else arb(best)


def _detours(a: complex, b: complex, points: List[complex]) -> List[complex]:
    """Vértices dos contornos em torno dos pontos bloqueados, pelo lado oposto ao ponto."""
    length = abs(b - a)
    if length == 0:
        return []
    u = (b - a) / length
    blocked = []
    for i, xi in enumerate(points):
        rel = (xi - a) * u.conjugate()
        if rel.real <= 0 or rel.real >= length:
            continue
        others = [abs(xi - p) for j, p in enumerate(points) if j != i]
        radius = min(others + [abs(xi - a), abs(xi - b)]) / 2
        if abs(rel.imag) > radius / 2:
            continue
        side = -1 if rel.imag > 0 else 1
        blocked.append((rel.real, xi, radius, side))
    corners = []
    for _, xi, radius, side in sorted(blocked, key=lambda item: item[0]):
        for k in range(5):
            corners.append(xi + radius * cmath.exp(1j * side * math.pi * (1 - k / 4)) * u)
    return corners


def _subdivide(current: ExactPoint, target: ExactPoint, points: List[complex], bits: int) -> List[ExactPoint]:
    out = []
    for _ in range(settings.MAX_PATH_STEPS):
        if current == target:
            return out
        c, t = _approx(current), _approx(target)
        remaining = abs(t - c)
        reach = settings.STEP_RATIO * min(abs(c - p) for p in points) if points else remaining
        if remaining <= reach:
            nxt = target
        else:
            z = c + (t - c) * (reach / remaining)
            nxt = ExactPoint.from_ball(acb(z.real, z.imag), bits)
            if nxt == current:
                break
        out.append(nxt)
        current = nxt
    raise StepTooLarge(f"Caminho até {target} excede {settings.MAX_PATH_STEPS} passos")


def plan_path(start: ExactPoint, end: ExactPoint, singular: Sequence[PointLike]) -> Path:
    """
    Caminho de start a end no plano cortado.

    Segue o segmento reto; um ponto singular intermediário a menos de r/2 do
    segmento é contornado pelo lado oposto a ele (pela esquerda quando está
    sobre o segmento) num semicírculo poligonal de raio r,
    metade da distância dele ao ponto mais próximo de Ξ ou das extremidades.
    Cada segmento é subdividido em passos de no máximo STEP_RATIO vezes a
    distância a Ξ.
    """
    points = [_approx(p) for p in _balls(singular)]
    a, b = _approx(start), _approx(end)
    bits = _grid_bits()
    corners = [ExactPoint.from_ball(acb(c.real, c.imag), bits) for c in _detours(a, b, points)]
    waypoints = [start]
    for target in corners + [end]:
        waypoints.extend(_subdivide(waypoints[-1], target, points, bits))
    logger.debug(f"Caminho {start} → {end}: {len(waypoints) - 1} passos, {len(corners) // 5} desvios")
    return Path(waypoints=tuple(waypoints))


def _majorant_radius(reach: arb, r_conv: Optional[arb]) -> arb:
    """Raio do majorante: 5/4 do alcance, limitado ao ponto médio até r_conv."""
    if r_conv is None:
        return 2 * reach
    near = reach * 5 / 4
    middle = (reach + r_conv) / 2
    return near if near < middle else middle


def _truncation(x: arb, n_star: int, q: int) -> int:
    """Ordem de truncamento N ≥ N* com x^N abaixo da precisão e razão de cauda < 1."""
    xf = float(x.upper())
    if xf >= 1:
        raise MajorantFailure(f"Razão geométrica {xf} não é menor que 1")
    count = max(n_star + 1, q + 1)
    if xf > 0:
        count = max(count, math.ceil((ctx.prec + GUARD_BITS) * math.log(2) / -math.log(xf)) + q)
        while xf * (count + 1) / (count + 1 - q) >= 1:
            count += q
    if count > settings.MAX_TAIL_TERMS:
        raise MajorantFailure(f"Truncamento {count} excede MAX_TAIL_TERMS")
    return count


def transition_step(op: DiffOp, z0: ExactPoint, z1: ExactPoint, singular: Sequence[PointLike]) -> acb_mat:
    """
    Matriz T com F(z1) = T·F(z0) nas coordenadas de Taylor.

    T[m][j] = Σ_n u_n^(j) C(n, m) δ^(n−m), somada até N termos; a cauda usa o
    majorante |u_n| ≤ C·â^n da base ordinária em z0.

    Raises:
        StepTooLarge: Se |z1 − z0| não for certificadamente ≤ dist(z0, Ξ)/2
    """
    q = op.order
    if z0 == z1:
        return identity_matrix(q)
    center = z0.ball()
    delta = (z1 - z0).ball()
    step = abs(delta)
    dist = distance_to(center, singular)
    if dist is not None and not (step <= dist / 2):
        raise StepTooLarge(f"Passo {z0} → {z1} maior que metade da distância {dist.str(5)} a Ξ")
    radius = _majorant_radius(step, dist)
    basis = ordinary_basis(op, center)
    powers = [acb(1)]
    mat = acb_mat(q, q)
    for j, sol in enumerate(basis.solutions):
        sol, majorant = series_majorant(sol, radius, dist)
        x = majorant.a * step
        count = _truncation(x, majorant.n_star, q)
        sol = extend_coefficients(sol, count)
        while len(powers) < count:
            powers.append(powers[-1] * delta)
        for m in range(q):
            total = acb(0)
            for n in range(m, count):
                c = sol.coeffs[n][0]
                if not c.is_zero():
                    total += c * comb(n, m) * powers[n - m]
            ratio = x * (count + 1) / (count + 1 - m)
            if not ratio < 1:
                raise MajorantFailure("Razão da cauda de Taylor não é menor que 1")
            tail = majorant.C * majorant.a ** count * comb(count, m) * step ** (count - m) / (1 - ratio)
            mat[m, j] = total + disk(tail)
    return mat


def bisected_step(
    op: DiffOp,
    z0: ExactPoint,
    z1: ExactPoint,
    singular: Sequence[PointLike],
    depth: int = MAX_BISECTIONS,
) -> acb_mat:
    """
    transition_step de z0 a z1, dividindo o passo ao meio quando o majorante falha.

    Raises:
        MajorantFailure: Se o passo continua sem majorante após `depth` divisões
    """
    try:
        return transition_step(op, z0, z1, singular)
    except MajorantFailure:
        if depth == 0:
            raise
    middle = z0 + (z1 - z0).scale(fmpq(1, 2))
    logger.debug(f"Majorante falhou em {z0} → {z1}; dividindo no ponto {middle}")
    first = bisected_step(op, z0, middle, singular, depth - 1)
    return bisected_step(op, middle, z1, singular, depth - 1) * first


def propagate(op: DiffOp, path: Path, singular: Sequence[PointLike]) -> acb_mat:
    """Produto das matrizes de transição ao longo do caminho."""
    mat = identity_matrix(op.order)
    for z0, z1 in zip(path.waypoints, path.waypoints[1:]):
        mat = bisected_step(op, z0, z1, singular) * mat
    return mat


def _horner(coeffs: Sequence[acb], x: acb) -> acb:
    total = acb(0)
    for c in reversed(coeffs):
        total = total * x + c
    return total


def _theta_powers(sol: LogSeriesSolution, t: acb, big_l: acb, q: int, count: int) -> List[acb]:
    """S_p = Σ_{n<count} t^n (ν0+n+σ∂)^p U_n(L), sem o fator t^ν0."""
    sigma = sol.operator.sigma
    sums = [acb(0)] * q
    power = acb(1)
    for n in range(count):
        u = list(sol.coeffs[n])
        if any(not c.is_zero() for c in u):
            lam = sol.base + n
            for p in range(q):
                sums[p] += power * _horner(u, big_l)
                u = [lam * u[k] + (sigma * (k + 1) * u[k + 1] if k + 1 < len(u) else 0) for k in range(len(u))]
        power *= t
    return sums


def basis_jets(
    basis: LocalBasis,
    z: ExactPoint,
    r_conv: Optional[arb],
    side: Optional[str] = None,
) -> acb_mat:
    """
    W[m][e] = Y_e^(m)(z)/m! para os elementos da base local.

    Usa Y^(m)/m! = (h t)^(−m)/m! Σ_i s(m,i) θ^i Y, com θ = t·d/dt, e soma
    θ^i Y termo a termo com o resto do majorante geométrico.

    Args:
        basis: Base local (singular ou na origem)
        z: Ponto exato próximo ao centro da base
        r_conv: Raio de convergência na variável t (None se infinito)
        side: Lado do corte para log t quando t encosta em ℝ≤0
    """
    q = len(basis.solutions)
    t = (z.ball() - basis.center) / basis.h
    log_t = log_ball(t, side)
    big_l = log_t if basis.sigma == 1 else -log_t
    abs_t = abs(t)
    abs_l = abs(big_l)
    radius = _majorant_radius(abs_t, r_conv)
    mat = acb_mat(q, q)
    for e, sol in enumerate(basis.solutions):
        sol, majorant = series_majorant(sol, radius, r_conv)
        x = majorant.a * abs_t
        count = _truncation(x, majorant.n_star, q)
        sol = extend_coefficients(sol, count)
        sums = _theta_powers(sol, t, big_l, q, count)
        t_nu = (sol.base * log_t).exp()
        kappa = sol.kappa
        lmax = arb(abs_l.abs_upper())
        lfac = (lmax if lmax > 1 else arb(1)) ** kappa
        growth_base = abs(sol.base) + kappa + count
        for p in range(q):
            ratio = x * (1 + 1 / growth_base) ** p
            if not ratio < 1:
                raise MajorantFailure("Razão da cauda de Frobenius não é menor que 1")
            tail = abs(t_nu) * (kappa + 1) * lfac * majorant.C * growth_base ** p * x ** count / (1 - ratio)
            sums[p] = t_nu * sums[p] + disk(tail)
        scale = acb(1)
        for m in range(q):
            total = acb(0)
            for i, s in enumerate(falling_factorial_coeffs(m)):
                if s:
                    total += s * sums[i]
            mat[m, e] = total / (scale * factorial(m))
            scale *= basis.h * t
    return mat


def origin_transfer(
    basis0: LocalBasis,
    toward: ExactPoint,
    others: Sequence[PointLike],
) -> Tuple[ExactPoint, acb_mat]:
    """
    Ponto de partida z_a e matriz E₀ das coordenadas na base da origem para Taylor em z_a.

    Em origem ordinária, z_a = 0 e E₀ = I. Em origem singular, z_a fica na
    direção de `toward` com |z_a| ≤ 0.4·dist(0, Ξ∖{0}).
    """
    q = len(basis0.solutions)
    if basis0.kind == "ordinary":
        return ExactPoint(0), identity_matrix(q)
    dist0 = distance_to(acb(0), others)
    anchor = toward
    if dist0 is not None:
        limit = dist0 * ORIGIN_RATIO
        while not (abs(anchor.ball()) <= limit):
            anchor = anchor.scale(fmpq(1, 2))
    side = "above" if anchor.is_real() and anchor.re < 0 else None
    logger.debug(f"Origem singular: ponto de partida {anchor}")
    return anchor, basis_jets(basis0, anchor, dist0, side)


def coords_at_origin(op: DiffOp, initial: Sequence, basis0: LocalBasis) -> List[acb]:
    """
    Coordenadas c₀ de f na base local da origem, como bolas racionais exatas.

    Em origem ordinária são f_0..f_{q−1}. Em origem singular só as classes
    de expoente inteiro recebem coordenadas, obtidas resolvendo exatamente a
    igualdade dos coeficientes até o último deslocamento da classe.

    Raises:
        InsufficientInitialTerms: Se os termos dados não determinam f
        InconsistentInitialTerms: Se f não é combinação da base da origem
    """
    q = len(basis0.solutions)
    rec = diffop_to_recurrence(op)
    if basis0.kind == "ordinary":
        values = unroll_recurrence(rec, initial, q - 1)
        return [acb(arb(v)) for v in values[:q]]
    coords = [acb(0)] * q
    lop = basis0.local
    for index, cls in enumerate(basis0.classes):
        if not cls.base.is_rational() or cls.base.rational_value().q != 1:
            continue
        nu0 = int(cls.base.rational_value())
        members = [(i, s) for i, s in enumerate(basis0.solutions) if s.class_index == index]
        upto = cls.max_offset + 1
        tables = [exact_table(lop, cls, s.start, s.log_start, upto) for _, s in members]
        width = max(len(table[0]) for table in tables)
        last = nu0 + cls.max_offset
        values = unroll_recurrence(rec, initial, last) if last >= 0 else []
        rows, rhs = [], []
        for n in range(upto):
            for k in range(width):
                rows.append([to_rational(table[n][k].rational()) if k < len(table[n]) else 0 for table in tables])
                idx = nu0 + n
                rhs.append(to_rational(values[idx]) if k == 0 and idx >= 0 else 0)
        try:
            solution, params = Matrix(rows).gauss_jordan_solve(Matrix(rhs))
        except ValueError:
            raise InconsistentInitialTerms("Os termos iniciais não definem uma solução do operador na origem")
        if params.shape[0]:
            raise InconsistentInitialTerms("Coordenadas na origem não determinadas pelos termos iniciais")
        for (i, _), value in zip(members, solution):
            coords[i] = acb(arb(from_rational(value)))
    return coords


def matching_point(point: AlgebraicNumber, r_match: arb) -> ExactPoint:
    """Ponto diádico z1 ≈ ρ − (r_match/2)·ρ/|ρ| no segmento 0 → ρ."""
    rho = point.enclosure()
    z = rho - rho * (r_match / (2 * abs(rho)))
    return ExactPoint.from_ball(z, _grid_bits())


def connection_to_singularity(
    op: DiffOp,
    basis: LocalBasis,
    start: ExactPoint,
    origin_matrix: acb_mat,
    singular: Sequence[AlgebraicNumber],
    r_match: arb,
) -> acb_mat:
    """
    C_{0→ρ} = W_ρ(z1)^(−1)·T_caminho·E₀.

    Args:
        op: Operador
        basis: Base de Frobenius em ρ
        start: Ponto de partida z_a (0 em origem ordinária)
        origin_matrix: E₀ de origin_transfer
        singular: Conjunto singular completo
        r_match: R₁; o casamento é feito a distância R₁/2 de ρ

    Raises:
        SingularSystem: Se a matriz de casamento não for certificada invertível
    """
    point = basis.point
    z1 = matching_point(point, r_match)
    path = plan_path(start, z1, singular)
    transfer = propagate(op, path, singular)
    others = [p for p in singular if not p.same_as(point)]
    dist = distance_to(basis.center, others)
    r_conv = None if dist is None else dist / abs(basis.h)
    jets = basis_jets(basis, z1, r_conv)
    try:
        result = jets.solve(transfer * origin_matrix)
    except ZeroDivisionError:
        raise SingularSystem(f"Matriz de casamento em {point.describe()} não invertível a {ctx.prec} bits")
    logger.debug(f"Conexão 0 → {point.describe()}: {path.steps} passos")
    return result


def enclose_f_on_square(
    op: DiffOp,
    coords: Sequence[acb],
    center: ExactPoint,
    half_side: arb,
    singular: Sequence[PointLike],
) -> acb:
    """
    Envoltória de f sobre o quadrado de centro `center` e meio-lado `half_side`.

    Soma parcial de Taylor avaliada na caixa mais a cauda do majorante no
    disco de raio igual à meia diagonal.

    Raises:
        StepTooLarge: Se o disco circunscrito não ficar longe de Ξ
    """
    ball = center.ball()
    basis = ordinary_basis(op, ball)
    combined = combine_solutions(basis.solutions, coords)
    dist = distance_to(ball, singular)
    reach = half_side * arb(2).sqrt()
    if dist is not None and not (reach < dist):
        raise StepTooLarge(f"Quadrado em {center} encosta no conjunto singular")
    combined, majorant = series_majorant(combined, reach, dist)
    x = majorant.a * reach
    count = _truncation(x, majorant.n_star, 1)
    combined = extend_coefficients(combined, count)
    value = _horner([u[0] for u in combined.coeffs[:count]], disk(half_side))
    tail = majorant.C * x ** count / (1 - x)
    return value + disk(tail)


def bound_f_on_square(
    op: DiffOp,
    coords: Sequence[acb],
    center: ExactPoint,
    half_side: arb,
    singular: Sequence[PointLike],
) -> arb:
    """Cota superior de sup |f| sobre o quadrado."""
    return arb(abs(enclose_f_on_square(op, coords, center, half_side, singular)).abs_upper())
