"""
Testes para a renderização do limitante em texto e JSON
"""
import json

import pytest
import sympy
from flint import acb, arb, fmpq

from certasy.schemas.result import BallJSON, ResultJSON
from certasy.services.algebraic import AlgebraicNumber
from certasy.services.assembler import AsymptoticBound, AsymptoticTerm, ErrorTerm, PositivityCertificate
from certasy.services.renderer import Evaluation, exponent_text, render_output

ONE = AlgebraicNumber.rational(1)
MINUS_ONE = AlgebraicNumber.rational(-1)


def term(rho: AlgebraicNumber, base, shift: int = 0, coeff=1) -> AsymptoticTerm:
    base = base if isinstance(base, fmpq) else fmpq(base)
    sigma = -base - 1 - shift
    return AsymptoticTerm(
        rho=rho,
        sigma=acb(arb(sigma)),
        k=0,
        coeff=acb(coeff),
        base=AlgebraicNumber.rational(base),
        shift=shift,
    )


def make_bound(terms, dominant=(ONE,), A=None) -> AsymptoticBound:
    error = ErrorTerm(
        A=A if A is not None else arb(fmpq(1, 3)),
        M_modulus=arb(1),
        re_gamma=arb(0),
        r0=2,
        kappa=0,
        N0=9,
    )
    return AsymptoticBound(
        terms=tuple(terms),
        error=error,
        dominant=tuple(dominant),
        singularities=tuple(dominant),
        n0=0,
        precision=128,
        error_bits=64,
        R0=fmpq(2),
        big_circle=arb(1),
    )


@pytest.fixture
def geometric_bound():
    """Limitante sintético 1 + B(A·n^(−2)) para f = 1/(1 − z)"""
    return make_bound([term(ONE, -1)])


class TestExponentText:
    """Testes da escrita exata dos expoentes"""

    def test_rational_base(self):
        """Testa σ = −ν0 − 1 − deslocamento = −3/2 para ν0 = −1/2"""
        assert exponent_text(term(ONE, fmpq(-1, 2), shift=1)) == "-3/2"
        assert exponent_text(term(ONE, -1)) == "0"

    def test_quadratic_base(self):
        """Testa ν0 = i dando σ = −1 − i"""
        (i,) = [r for r in AlgebraicNumber.roots_of(sympy.Poly([1, 0, 1], sympy.Symbol("x"))) if r.ball.imag > 0]
        t = AsymptoticTerm(rho=ONE, sigma=acb(-1, -1), k=0, coeff=acb(1), base=i)
        assert exponent_text(t) == "-1 - I"

    def test_unknown_base_prints_ball(self):
        """Testa σ sem expoente base exibido como bola"""
        t = AsymptoticTerm(rho=ONE, sigma=acb(arb(fmpq(1, 3))), k=0, coeff=acb(1))
        assert "0.33333" in exponent_text(t)


class TestText:
    """Testes da saída em texto"""

    def test_layout(self, geometric_bound):
        """Testa o grupo de ρ = 1, o erro e o piso de validade"""
        text = render_output(geometric_bound, "text")
        lines = text.splitlines()
        assert lines[0] == "1^(-n) * ("
        assert lines[2] == ")"
        assert "(1)^(-n) * n^(-2)" in lines[3]
        assert lines[3].startswith("+ B(")
        assert lines[4] == "valid for n >= 9"
        assert text.endswith("\n")

    def test_deterministic(self, geometric_bound):
        """Testa saída idêntica byte a byte em duas chamadas"""
        assert render_output(geometric_bound) == render_output(geometric_bound)

    def test_error_only(self):
        """Testa grupo com corpo 0 quando todos os termos foram absorvidos"""
        lines = render_output(make_bound([])).splitlines()
        assert lines[1].strip() == "0"

    def test_real_pair_uses_sign(self):
        """Testa ±1 dominantes escritos como um grupo com (−1)^n"""
        bound = make_bound([term(ONE, -1), term(MINUS_ONE, -1)], dominant=(ONE, MINUS_ONE))
        text = render_output(bound)
        assert text.count("^(-n) * (") == 1
        assert "(-1)^n*" in text

    def test_certificate_and_evaluations(self, geometric_bound):
        """Testa as linhas de positividade e de avaliação"""
        certificate = PositivityCertificate(mode="positive", crossover=12, checked_prefix=True)
        text = render_output(geometric_bound, "text", certificate, [Evaluation(10, acb(1), fmpq(1))])
        assert "positivity: f_n > 0 for all n >= 0 (crossover 12)" in text
        assert text.splitlines()[-1].startswith("f_10 in ")
        assert text.splitlines()[-1].endswith(" = 1")

    def test_nonconclusive_reason(self, geometric_bound):
        """Testa o motivo na certificação inconclusiva"""
        certificate = PositivityCertificate(mode="nonconclusive", reason="complex-dominant")
        assert "positivity: nonconclusive (complex-dominant)" in render_output(geometric_bound, "text", certificate)


class TestJson:
    """Testes da saída JSON v1"""

    def test_document(self, geometric_bound):
        """Testa versão, metadados e alias from"""
        doc = json.loads(render_output(geometric_bound, "json"))
        assert doc["version"] == "v1"
        assert doc["metadata"]["from"] == 0
        assert doc["metadata"]["N0"] == 9
        assert doc["error"]["log_power"] == 0
        assert doc["terms"][0]["rho"] == "1"
        assert "evaluations" in doc["metadata"]

    def test_balls_round_trip_exactly(self, geometric_bound):
        """Testa que A volta do JSON com ponto médio e raio idênticos"""
        result = ResultJSON.model_validate_json(render_output(geometric_bound, "json"))
        restored = result.error.A.to_arb()
        A = geometric_bound.error.A
        assert restored.mid() == A.mid()
        assert restored.rad() == A.rad()
        assert result.terms[0].coefficient.to_acb().real.mid() == arb(1)

    def test_unknown_format(self, geometric_bound):
        """Testa formato desconhecido rejeitado"""
        with pytest.raises(ValueError):
            render_output(geometric_bound, "xml")


@pytest.mark.parametrize(
    "ball",
    [arb(fmpq(5, 8)), arb(1).exp(), arb(fmpq(-7, 3)) / 2 ** 40, arb(fmpq(1, 2), fmpq(1, 1024)), arb(0, 1)],
    ids=["exact", "e", "small", "power-of-two-rad", "unit-disk"],
)
def test_ball_json_is_bit_exact(ball):
    """Testa que BallJSON reproduz ponto médio e raio exatamente"""
    restored = BallJSON.model_validate_json(BallJSON.from_arb(ball).model_dump_json()).to_arb()
    assert restored.mid() == ball.mid()
    assert restored.rad() == ball.rad()
