"""
Schemas Pydantic para arquivos de problema
"""
import json
from typing import List, Optional, Union

from flint import fmpq, fmpq_poly
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from certasy.config import settings
from certasy.services.algebraic import AlgebraicNumber
from certasy.services.dfinite_core import DiffOp, Recurrence, recurrence_to_diffop
from certasy.utils.parsing import ParseError, ProblemValidationError, parse_point, parse_rational

RationalText = Union[int, str]


class ProblemOptions(BaseModel):
    order: int = Field(default_factory=lambda: settings.DEFAULT_ORDER, ge=1, description="Ordem r₀ da expansão")
    start: int = Field(default_factory=lambda: settings.DEFAULT_FROM, ge=0, alias="from", description="Índice mínimo n₀")
    precision: int = Field(default_factory=lambda: settings.PRECISION_BITS, ge=24, description="Precisão de trabalho (bits)")
    assume_analytic: List[str] = Field(default_factory=list, description="Pontos em que f é analítica (confiados)")
    positivity: bool = False
    eval_at: List[int] = Field(default_factory=list)

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    @field_validator("eval_at")
    @classmethod
    def validate_eval_at(cls, v: List[int]) -> List[int]:
        if any(n < 0 for n in v):
            raise ValueError("eval_at só aceita índices ≥ 0")
        return v


class ProblemSpec(BaseModel):
    operator: Optional[List[List[RationalText]]] = Field(None, description="p_0..p_q em potências crescentes de z")
    recurrence: Optional[List[List[RationalText]]] = Field(None, description="c_0..c_r em potências crescentes de n")
    convert: bool = False
    initial: List[RationalText] = Field(..., min_length=1)
    options: ProblemOptions = Field(default_factory=ProblemOptions)

    model_config = ConfigDict(extra="forbid")

    @field_validator("operator", "recurrence")
    @classmethod
    def validate_rows(cls, v, info):
        if v is None:
            return v
        if not v:
            raise ValueError(f"{info.field_name} não pode ser vazio")
        for j, row in enumerate(v):
            for i, c in enumerate(row):
                parse_rational(c, f"{info.field_name}[{j}][{i}]")
        return v

    @field_validator("initial")
    @classmethod
    def validate_initial(cls, v):
        for i, c in enumerate(v):
            parse_rational(c, f"initial[{i}]")
        return v

    @model_validator(mode="after")
    def check_operator(self):
        if (self.operator is None) == (self.recurrence is None):
            raise ValueError("Informe exatamente um entre operator e recurrence")
        if self.recurrence is not None and not self.convert:
            raise ValueError("recurrence exige convert = true")
        rows = self.operator if self.operator is not None else self.recurrence
        if len(rows) < 2:
            raise ValueError("São necessários ao menos dois coeficientes (ordem ≥ 1)")
        if all(parse_rational(c) == 0 for c in rows[-1]):
            raise ValueError("O coeficiente líder não pode ser o polinômio nulo")
        return self

    def _polys(self, rows: List[List[RationalText]]) -> tuple:
        return tuple(fmpq_poly([parse_rational(c) for c in row]) for row in rows)

    def diffop(self) -> DiffOp:
        """Operador do problema, convertendo a recorrência quando for o caso."""
        if self.operator is not None:
            return DiffOp(coeffs=self._polys(self.operator))
        return recurrence_to_diffop(self.recurrence_form())

    def recurrence_form(self) -> Optional[Recurrence]:
        if self.recurrence is None:
            return None
        return Recurrence(coeffs=self._polys(self.recurrence))

    def initial_values(self) -> List[fmpq]:
        return [parse_rational(c) for c in self.initial]

    def analytic_points(self) -> List[AlgebraicNumber]:
        return [parse_point(p, f"options.assume_analytic[{i}]") for i, p in enumerate(self.options.assume_analytic)]


def _field_path(error: dict) -> str:
    return ".".join(str(p) for p in error["loc"]) or "problem"


def parse_problem(text: str) -> ProblemSpec:
    """
    Lê um problema em JSON.

    Raises:
        ParseError: JSON inválido ou campo com formato inválido
        ProblemValidationError: Problema bem formado mas inconsistente
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"JSON inválido na linha {e.lineno}, coluna {e.colno}: {e.msg}")
    if not isinstance(data, dict):
        raise ParseError("O problema deve ser um objeto JSON")
    try:
        return ProblemSpec.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ProblemValidationError(f"{_field_path(first)}: {first['msg']}")
