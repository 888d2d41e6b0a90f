"""
Fixtures compartilhadas pelos testes
"""
from pathlib import Path

import mpmath
import pytest
from flint import ctx

from certasy.schemas.problem import ProblemSpec, parse_problem

PROBLEMS_DIR = Path(__file__).resolve().parent.parent / "problems"


@pytest.fixture(autouse=True)
def working_precision():
    """Fixa a precisão do flint em 128 bits e restaura ao final"""
    old = ctx.prec
    ctx.prec = 128
    yield
    ctx.prec = old


@pytest.fixture(autouse=True)
def mp_precision():
    """Precisão do mpmath usada como oráculo (60 dígitos)"""
    with mpmath.workdps(60):
        yield


@pytest.fixture
def load_problem():
    """Carrega um problema do diretório problems/ pelo nome"""

    def _load(name: str) -> ProblemSpec:
        return parse_problem((PROBLEMS_DIR / f"{name}.json").read_text(encoding="utf-8"))

    return _load
