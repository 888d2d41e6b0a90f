"""
Testes para a interface de linha de comando
"""
import json
from unittest.mock import patch

import pytest

from certasy.main import (
    EXIT_INPUT,
    EXIT_MATH,
    EXIT_NONCONCLUSIVE,
    EXIT_OK,
    apply_flags,
    build_parser,
    extended_initial_terms,
    main,
    run,
)
from certasy.schemas.problem import parse_problem
from certasy.services.dfinite_core import diffop_to_recurrence
from certasy.utils.parsing import ParseError, ProblemValidationError

GEOMETRIC = {"operator": [[-1], [1, -1]], "initial": [1], "options": {"order": 2}}


@pytest.fixture
def write_problem(tmp_path):
    """Grava um problema em JSON num arquivo temporário e devolve o caminho"""

    def _write(problem, name: str = "problem.json") -> str:
        path = tmp_path / name
        text = problem if isinstance(problem, str) else json.dumps(problem)
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write


def parse_args(*argv):
    return build_parser().parse_args(["problem.json", *argv])


class TestApplyFlags:
    """Testes da precedência das opções da linha de comando"""

    def test_flags_override_file(self):
        """Testa --order, --from, --positivity e --eval sobre o arquivo"""
        spec = parse_problem(json.dumps(GEOMETRIC))
        updated = apply_flags(spec, parse_args("--order", "4", "--from", "7", "--positivity", "--eval", "10, 20"))
        assert updated.options.order == 4
        assert updated.options.start == 7
        assert updated.options.positivity
        assert updated.options.eval_at == [10, 20]

    def test_no_flags_keeps_spec(self):
        """Testa que sem opções o problema volta inalterado"""
        spec = parse_problem(json.dumps(GEOMETRIC))
        assert apply_flags(spec, parse_args()) is spec

    def test_assume_analytic_list(self):
        """Testa a separação da lista de pontos por vírgula"""
        spec = parse_problem(json.dumps(GEOMETRIC))
        updated = apply_flags(spec, parse_args("--assume-analytic", "1, -1/2"))
        assert updated.options.assume_analytic == ["1", "-1/2"]

    def test_invalid_index(self):
        """Testa --eval com índice não numérico"""
        spec = parse_problem(json.dumps(GEOMETRIC))
        with pytest.raises(ParseError):
            apply_flags(spec, parse_args("--eval", "1,x"))

    def test_invalid_order(self):
        """Testa --order 0 rejeitado pela validação"""
        spec = parse_problem(json.dumps(GEOMETRIC))
        with pytest.raises(ProblemValidationError):
            apply_flags(spec, parse_args("--order", "0"))


def test_extended_initial_terms():
    """Testa a extensão dos termos iniciais até o exigido pela recorrência"""
    spec = parse_problem(json.dumps(GEOMETRIC))
    rec = diffop_to_recurrence(spec.diffop())
    assert extended_initial_terms(rec, [1, 1, 1]) == [1, 1, 1]


class TestExitCodes:
    """Testes dos códigos de saída"""

    def test_missing_file(self, tmp_path):
        """Testa arquivo inexistente com código 2"""
        assert main([str(tmp_path / "nao_existe.json"), "--quiet"]) == EXIT_INPUT

    def test_invalid_json(self, write_problem, capsys):
        """Testa JSON inválido com código 2 e stdout vazio"""
        assert main([write_problem("{operator: ["), "--quiet"]) == EXIT_INPUT
        assert capsys.readouterr().out == ""

    def test_inconsistent_initial_terms(self, write_problem):
        """Testa termos iniciais que contradizem a recorrência"""
        problem = {**GEOMETRIC, "initial": [1, 2]}
        assert main([write_problem(problem), "--quiet"]) == EXIT_INPUT

    def test_irregular_dominant_singularity(self, write_problem):
        """Testa (1 − z)²f' − f = 0 com f_0 = f_1 = 1: falha matemática com código 3"""
        problem = {"operator": [[-1], [1, -2, 1]], "initial": [1, 1]}
        assert main([write_problem(problem), "--quiet"]) == EXIT_MATH

    @pytest.mark.slow
    def test_success(self, write_problem, capsys):
        """Testa 1/(1 − z) com código 0 e saída em texto"""
        assert main([write_problem(GEOMETRIC), "--quiet"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("1^(-n) * (")
        assert "valid for n >= " in out

    @pytest.mark.slow
    def test_json_format(self, write_problem, capsys):
        """Testa --format json"""
        assert main([write_problem(GEOMETRIC), "--format", "json", "--quiet"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["version"] == "v1"

    @pytest.mark.slow
    def test_nonconclusive_positivity(self, write_problem):
        """Testa (−1)^n com --positivity e código 4"""
        problem = {"operator": [[1], [1, 1]], "initial": [1]}
        assert main([write_problem(problem), "--positivity", "--quiet"]) == EXIT_NONCONCLUSIVE


@pytest.mark.slow
@patch("certasy.main.settings")
def test_eval_without_exact_prefix(mock_settings):
    """Testa avaliação sem valor exato quando o índice passa do prefixo permitido"""
    mock_settings.POSITIVITY_MAX_PREFIX = 5
    spec = parse_problem(json.dumps({**GEOMETRIC, "options": {"order": 2, "eval_at": [40, 50]}}))
    output, code = run(spec, "text")
    assert code == EXIT_OK
    lines = output.splitlines()
    assert lines[-2].startswith("f_40 in ")
    assert " = " not in lines[-2]
