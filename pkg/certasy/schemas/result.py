"""
Schemas Pydantic para o resultado em JSON (versão v1)
"""
from typing import List, Literal, Optional

from flint import acb, arb, ctx, fmpq
from pydantic import BaseModel, ConfigDict, Field

from certasy.services.ball_arith import workprec
from certasy.utils.dyadic import decimal_to_fmpq, exact_decimal

RADIUS_SHAVE_BITS = 31


class BallJSON(BaseModel):
    mid: str
    rad: str

    @classmethod
    def from_arb(cls, x: arb) -> "BallJSON":
        return cls(mid=exact_decimal(x.mid()), rad=exact_decimal(x.rad()))

    def to_arb(self) -> arb:
        """Bola com ponto médio e raio reproduzidos bit a bit."""
        mid = decimal_to_fmpq(self.mid)
        rad = decimal_to_fmpq(self.rad)
        bits = max(ctx.prec, int(mid.p).bit_length(), int(rad.p).bit_length()) + RADIUS_SHAVE_BITS
        with workprec(bits):
            center = arb(mid)
            exact = arb(rad)
            # o raio de uma bola é arredondado para cima na conversão; um raio
            # um pouco menor cai de volta exatamente no valor serializado
            balls = [arb(center, arb(rad * (1 - shave))) for shave in (fmpq(0), fmpq(1, 2 ** RADIUS_SHAVE_BITS))]
        return next((b for b in balls if b.rad() == exact), balls[0])


class ComplexJSON(BaseModel):
    re: BallJSON
    im: BallJSON

    @classmethod
    def from_acb(cls, z: acb) -> "ComplexJSON":
        return cls(re=BallJSON.from_arb(z.real), im=BallJSON.from_arb(z.imag))

    def to_acb(self) -> acb:
        return acb(self.re.to_arb(), self.im.to_arb())


class TermJSON(BaseModel):
    rho: str
    exponent: ComplexJSON
    log_power: int
    coefficient: ComplexJSON


class ErrorJSON(BaseModel):
    A: BallJSON
    M: BallJSON
    exponent: BallJSON
    log_power: int
    N0: int


class EvaluationJSON(BaseModel):
    n: int
    value: ComplexJSON
    exact: Optional[str] = None


class PositivityJSON(BaseModel):
    mode: Literal["positive", "nonconclusive"]
    crossover: Optional[int] = None
    checked_prefix: bool = False
    reason: Optional[str] = None


class MetadataJSON(BaseModel):
    order: int
    start: int = Field(..., alias="from")
    precision: int
    error_bits: int
    assume_analytic: List[str] = Field(default_factory=list)
    singularities: List[str] = Field(default_factory=list)
    N0: int
    positivity: Optional[PositivityJSON] = None
    evaluations: Optional[List[EvaluationJSON]] = None

    model_config = ConfigDict(populate_by_name=True)


class ResultJSON(BaseModel):
    version: Literal["v1"] = "v1"
    terms: List[TermJSON] = Field(default_factory=list)
    error: ErrorJSON
    metadata: MetadataJSON
