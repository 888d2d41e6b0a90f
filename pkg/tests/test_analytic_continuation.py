"""
Testes para a continuação analítica: caminhos, matrizes de transição e conexão
"""
from unittest.mock import patch

import mpmath
import pytest
from flint import acb, arb, fmpq

from certasy.services.algebraic import AlgebraicNumber
from certasy.services.analytic_continuation import (
    StepTooLarge,
    apply_matrix,
    basis_jets,
    bisected_step,
    bound_f_on_square,
    connection_to_singularity,
    coords_at_origin,
    distance_to,
    enclose_f_on_square,
    identity_matrix,
    matching_point,
    origin_transfer,
    plan_path,
    propagate,
    transition_step,
)
from certasy.services.dfinite_core import DiffOp, singular_points
from certasy.services.local_basis import MajorantFailure, local_basis_structure
from certasy.utils.dyadic import ExactPoint

from tests.oracles import mp_ball

GEOMETRIC = [[-1], [1, -1]]
CENTRAL_BINOMIAL = [[-2], [1, -4]]
HARMONIC = [[1], [0], [1]]


def point_abs(w: ExactPoint) -> float:
    return float(abs(w.ball()).mid())


@pytest.fixture
def geometric():
    """Operador de 1/(1 − z) e seu conjunto singular {1}"""
    op = DiffOp.from_rationals(GEOMETRIC)
    return op, singular_points(op).points


class TestPath:
    """Testes do planejamento de caminhos"""

    def test_straight_path_steps(self, geometric):
        """Testa passos limitados pela distância ao ponto 1"""
        _, singular = geometric
        start, end = ExactPoint(0), ExactPoint(fmpq(9, 10))
        path = plan_path(start, end, singular)
        assert path.waypoints[0] == start
        assert path.waypoints[-1] == end
        assert path.steps > 1
        for z0, z1 in zip(path.waypoints, path.waypoints[1:]):
            assert abs((z1 - z0).ball()) <= distance_to(z0.ball(), singular) / 2
        assert all(w.is_real() for w in path.waypoints)

    def test_detour_left_of_travel(self):
        """Testa o contorno de 0 pela esquerda no caminho −1 → 1"""
        zero = [AlgebraicNumber.rational(fmpq(0))]
        path = plan_path(ExactPoint(-1), ExactPoint(1), zero)
        assert path.waypoints[-1] == ExactPoint(1)
        assert any(float(w.ball().imag.mid()) > 0.4 for w in path.waypoints)
        assert all(float(w.ball().imag.mid()) >= 0 for w in path.waypoints)
        assert min(point_abs(w) for w in path.waypoints) > 0.45

    def test_detour_away_from_point(self):
        """Testa o contorno pela direita de um ponto ligeiramente à esquerda do segmento −1 → 1"""
        near = [acb(0, fmpq(1, 8))]
        path = plan_path(ExactPoint(-1), ExactPoint(1), near)
        assert path.waypoints[-1] == ExactPoint(1)
        assert any(float(w.ball().imag.mid()) < -0.2 for w in path.waypoints)
        middle = [w for w in path.waypoints if abs(float(w.ball().real.mid())) < 0.3]
        assert middle and all(float(w.ball().imag.mid()) < 0 for w in middle)

    def test_no_singular_points(self):
        """Testa caminho de passo único sem pontos singulares"""
        path = plan_path(ExactPoint(0), ExactPoint(3, 4), [])
        assert path.steps == 1


class TestTransition:
    """Testes das matrizes de transição"""

    def test_identity_for_null_step(self, geometric):
        """Testa T = I quando z0 = z1"""
        op, singular = geometric
        mat = transition_step(op, ExactPoint(0), ExactPoint(0), singular)
        assert mat[0, 0] == acb(1)

    def test_step_too_large(self, geometric):
        """Testa recusa de passo maior que metade da distância a Ξ"""
        op, singular = geometric
        with pytest.raises(StepTooLarge):
            transition_step(op, ExactPoint(0), ExactPoint(fmpq(3, 5)), singular)

    def test_geometric_value(self, geometric):
        """Testa f(1/2) = 2 para f = 1/(1 − z)"""
        op, singular = geometric
        path = plan_path(ExactPoint(0), ExactPoint(fmpq(1, 2)), singular)
        (value,) = apply_matrix(propagate(op, path, singular), [acb(1)])
        assert value.contains(acb(2))
        assert value.real.rad() < 1e-20

    def test_complex_endpoint(self, geometric):
        """Testa f(i/2) = 1/(1 − i/2)"""
        op, singular = geometric
        path = plan_path(ExactPoint(0), ExactPoint(0, fmpq(1, 2)), singular)
        (value,) = apply_matrix(propagate(op, path, singular), [acb(1)])
        assert value.overlaps(mp_ball(1 / (1 - mpmath.mpc(0, 0.5))))

    def test_harmonic_oscillator(self):
        """Testa (cos, −sin) em z = 1 a partir de (1, 0) para f'' + f = 0"""
        op = DiffOp.from_rationals(HARMONIC)
        path = plan_path(ExactPoint(0), ExactPoint(1), [])
        f, df = apply_matrix(propagate(op, path, []), [acb(1), acb(0)])
        assert f.overlaps(mp_ball(mpmath.cos(1)))
        assert df.overlaps(mp_ball(-mpmath.sin(1)))

    def test_lattice_round_trip(self, load_problem):
        """Testa ida e volta 1/8 → 7/32 → 1/8 perto de 1/4 no reticulado: produto contém I"""
        op = load_problem("lattice").diffop()
        singular = singular_points(op).points
        a, b = ExactPoint(fmpq(1, 8)), ExactPoint(fmpq(7, 32))
        there = propagate(op, plan_path(a, b, singular), singular)
        back = propagate(op, plan_path(b, a, singular), singular)
        product = back * there
        for i in range(3):
            for j in range(3):
                assert product[i, j].contains(acb(1 if i == j else 0)), (i, j)


@patch("certasy.services.analytic_continuation.settings")
def test_bisected_step(mock_settings, geometric):
    """Testa f(1/2) = 2 com o passo 0 → 1/2 dividido quando a cauda excede MAX_TAIL_TERMS"""
    mock_settings.MAX_TAIL_TERMS = 120
    op, singular = geometric
    with pytest.raises(MajorantFailure):
        transition_step(op, ExactPoint(0), ExactPoint(fmpq(1, 2)), singular)
    with pytest.raises(MajorantFailure):
        bisected_step(op, ExactPoint(0), ExactPoint(fmpq(1, 2)), singular, depth=0)
    mat = bisected_step(op, ExactPoint(0), ExactPoint(fmpq(1, 2)), singular)
    assert mat[0, 0].contains(acb(2))


class TestOrigin:
    """Testes das coordenadas na origem"""

    def test_ordinary_origin(self):
        """Testa coordenadas f_0..f_{q−1} e E₀ = I em origem ordinária"""
        op = DiffOp.from_rationals(CENTRAL_BINOMIAL)
        basis0 = local_basis_structure(op, AlgebraicNumber.rational(fmpq(0)))
        assert coords_at_origin(op, [1], basis0) == [acb(1)]
        start, matrix = origin_transfer(basis0, ExactPoint(fmpq(1, 8)), singular_points(op).points)
        assert start == ExactPoint(0)
        assert matrix[0, 0] == identity_matrix(1)[0, 0]

    def test_singular_origin_coordinates(self, load_problem):
        """Testa que f é o elemento de deslocamento 2 da base na origem do reticulado"""
        op = load_problem("lattice").diffop()
        basis0 = local_basis_structure(op, AlgebraicNumber.rational(fmpq(0)))
        coords = coords_at_origin(op, [1, 2, 6], basis0)
        expected = [1 if s.start == 2 else 0 for s in basis0.solutions]
        assert [c.contains(acb(e)) and c.is_exact() for c, e in zip(coords, expected)] == [True] * 3

    def test_singular_origin_anchor(self, load_problem):
        """Testa z_a afastado da origem singular por no máximo 0.4·dist(0, Ξ∖{0})"""
        op = load_problem("lattice").diffop()
        points = singular_points(op).points
        basis0 = local_basis_structure(op, AlgebraicNumber.rational(fmpq(0)))
        others = [p for p in points if not p.is_zero()]
        start, matrix = origin_transfer(basis0, ExactPoint(fmpq(1, 8)), others)
        assert abs(start.ball()) <= arb(fmpq(1, 10))
        assert matrix.nrows() == 3


class TestConnection:
    """Testes da conexão com a base singular"""

    def test_basis_jets_algebraic(self):
        """Testa Y(1/8) = (1 − 4/8)^(−1/2) = √2"""
        op = DiffOp.from_rationals(CENTRAL_BINOMIAL)
        basis = local_basis_structure(op, AlgebraicNumber.rational(fmpq(1, 4)))
        jets = basis_jets(basis, ExactPoint(fmpq(1, 8)), None)
        assert jets[0, 0].overlaps(mp_ball(mpmath.sqrt(2)))

    def test_connection_coefficient_is_one(self):
        """Testa C = 1 para f = (1 − 4z)^(−1/2) na base t^(−1/2)"""
        op = DiffOp.from_rationals(CENTRAL_BINOMIAL)
        singular = singular_points(op).points
        rho = AlgebraicNumber.rational(fmpq(1, 4))
        basis = local_basis_structure(op, rho)
        conn = connection_to_singularity(op, basis, ExactPoint(0), identity_matrix(1), singular, arb(fmpq(1, 8)))
        (coeff,) = apply_matrix(conn, [acb(1)])
        assert coeff.contains(acb(1))
        assert coeff.real.rad() < 1e-20

    def test_matching_point(self):
        """Testa z1 = ρ − R₁/2 no segmento 0 → ρ"""
        rho = AlgebraicNumber.rational(fmpq(1, 4))
        z1 = matching_point(rho, arb(fmpq(1, 8)))
        assert z1.ball().real.overlaps(arb(fmpq(3, 16)))
        assert z1.is_real()


class TestSquare:
    """Testes da envoltória de f sobre quadrados"""

    def test_enclosure_contains_values(self, geometric):
        """Testa que a envoltória no quadrado de meio-lado 1/4 contém f(0) e f(1/4)"""
        op, singular = geometric
        value = enclose_f_on_square(op, [acb(1)], ExactPoint(0), arb(fmpq(1, 4)), singular)
        assert value.contains(acb(1))
        assert value.contains(acb(arb(fmpq(4, 3))))
        bound = bound_f_on_square(op, [acb(1)], ExactPoint(0), arb(fmpq(1, 4)), singular)
        assert bound >= arb(fmpq(4, 3))

    def test_square_near_singularity(self, geometric):
        """Testa recusa de quadrado cujo disco circunscrito alcança 1"""
        op, singular = geometric
        with pytest.raises(StepTooLarge):
            enclose_f_on_square(op, [acb(1)], ExactPoint(fmpq(7, 8)), arb(fmpq(1, 4)), singular)
