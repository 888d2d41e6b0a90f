"""
Categorias de erro compartilhadas pelos serviços.

Cada serviço declara suas próprias exceções herdando de uma destas duas
categorias; a CLI converte a categoria no código de saída.
"""


class InputError(Exception):
    """Entrada inválida: problema mal formado ou inconsistente (saída 2)"""
    pass


class MathematicalFailure(Exception):
    """Falha matemática durante o cálculo do limitante (saída 3)"""
    pass
