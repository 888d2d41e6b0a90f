"""
Interface de linha de comando do certasy

Lê um problema em JSON, calcula a expansão assintótica certificada de f_n
e imprime o resultado em texto ou JSON.

Códigos de saída: 0 sucesso, 2 entrada inválida, 3 falha matemática,
4 positividade não conclusiva (com --positivity).
"""
import argparse
import logging
import sys
from typing import List, Optional, Tuple

from pydantic import ValidationError

from certasy import __version__
from certasy.config import settings
from certasy.exceptions import InputError, MathematicalFailure
from certasy.schemas.problem import ProblemOptions, ProblemSpec, parse_problem
from certasy.services.assembler import certify_positivity, evaluate_bound_at, run_pipeline
from certasy.services.ball_arith import Precision
from certasy.services.dfinite_core import Recurrence, diffop_to_recurrence, unroll_recurrence
from certasy.services.renderer import Evaluation, render_output
from certasy.utils.parsing import ParseError, ProblemValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MATH = 3
EXIT_NONCONCLUSIVE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="certasy",
        description="Expansão assintótica com limitante de erro explícito para sequências P-recursivas",
    )
    parser.add_argument("problem", help="Arquivo JSON do problema ('-' para stdin)")
    parser.add_argument("--order", type=int, help="Ordem r₀ da expansão")
    parser.add_argument("--from", dest="start", type=int, help="Índice mínimo n₀ de validade")
    parser.add_argument("--precision", type=int, help="Precisão de trabalho em bits")
    parser.add_argument(
        "--assume-analytic",
        help="Pontos singulares em que f é analítica, separados por vírgula (ex.: '1,-1/2+3/2i')",
    )
    parser.add_argument("--positivity", action="store_true", help="Certifica f_n > 0 para todo n")
    parser.add_argument("--eval", dest="eval_at", help="Índices n separados por vírgula")
    parser.add_argument("--format", choices=["text", "json"], default="text")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Logs de depuração")
    verbosity.add_argument("--quiet", action="store_true", help="Somente avisos e erros")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = settings.LOG_LEVEL
    if verbose:
        level = "DEBUG"
    elif quiet:
        level = "WARNING"
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )


def _parse_indices(text: str) -> List[int]:
    indices = []
    for item in text.split(","):
        item = item.strip()
        if not item.isdigit():
            raise ParseError(f"'{item}' não é um índice n ≥ 0", "--eval")
        indices.append(int(item))
    return indices


def apply_flags(spec: ProblemSpec, args: argparse.Namespace) -> ProblemSpec:
    """Opções da linha de comando têm prioridade sobre as do arquivo."""
    updates = {}
    if args.order is not None:
        updates["order"] = args.order
    if args.start is not None:
        updates["start"] = args.start
    if args.precision is not None:
        updates["precision"] = args.precision
    if args.assume_analytic:
        updates["assume_analytic"] = [p.strip() for p in args.assume_analytic.split(",") if p.strip()]
    if args.positivity:
        updates["positivity"] = True
    if args.eval_at:
        updates["eval_at"] = _parse_indices(args.eval_at)
    if not updates:
        return spec
    try:
        options = ProblemOptions.model_validate({**spec.options.model_dump(), **updates})
    except ValidationError as e:
        first = e.errors()[0]
        raise ProblemValidationError(f"{first['loc'][0]}: {first['msg']}")
    return spec.model_copy(update={"options": options})


def extended_initial_terms(rec: Recurrence, initial: list) -> list:
    """
    Desenrola os termos dados até a quantidade que a recorrência exige,
    verificando a consistência dos termos extras fornecidos.
    """
    count = max(len(initial), rec.required_terms())
    values = unroll_recurrence(rec, initial, count - 1)
    if len(values) > len(initial):
        logger.debug(f"Termos iniciais estendidos de {len(initial)} para {len(values)}")
    return values


def run(spec: ProblemSpec, output_format: str = "text") -> Tuple[str, int]:
    """
    Executa o problema e devolve (saída renderizada, código de saída).

    Raises:
        InputError: Problema inválido
        MathematicalFailure: Falha no cálculo do limitante
    """
    options = spec.options
    op = spec.diffop()
    rec = spec.recurrence_form() or diffop_to_recurrence(op)
    initial = extended_initial_terms(rec, spec.initial_values())
    precision = Precision(bits=options.precision)
    logger.info(f"Operador {op}; r₀ = {options.order}, n₀ = {options.start}, {precision.bits} bits")
    bound = run_pipeline(op, initial, options.order, options.start, spec.analytic_points(), precision)

    certificate = None
    if options.positivity:
        certificate = certify_positivity(bound, rec, initial)

    evaluations = []
    if options.eval_at:
        exact_upto = [n for n in options.eval_at if n <= settings.POSITIVITY_MAX_PREFIX]
        exact = unroll_recurrence(rec, initial, max(exact_upto)) if exact_upto else []
        for n in options.eval_at:
            value = evaluate_bound_at(bound, n)
            evaluations.append(Evaluation(n, value, exact[n] if n < len(exact) else None))

    output = render_output(bound, output_format, certificate, evaluations)
    code = EXIT_NONCONCLUSIVE if certificate is not None and certificate.mode != "positive" else EXIT_OK
    return output, code


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        if args.problem == "-":
            text = sys.stdin.read()
        else:
            with open(args.problem, encoding="utf-8") as handle:
                text = handle.read()
    except OSError as e:
        logger.error(f"Não foi possível ler {args.problem}: {e}")
        return EXIT_INPUT
    try:
        spec = apply_flags(parse_problem(text), args)
        output, code = run(spec, args.format)
    except InputError as e:
        logger.error(f"Entrada inválida: {e}")
        return EXIT_INPUT
    except MathematicalFailure as e:
        logger.error(f"Falha matemática: {e}")
        return EXIT_MATH
    sys.stdout.write(output)
    return code


if __name__ == "__main__":
    sys.exit(main())
