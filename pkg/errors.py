"""
Errores del toolkit de sensado comprimido
Jerarquía común para que el CLI pueda traducirlos a códigos de salida
"""

from typing import Optional


class CompressedSensingError(Exception):
    """Error base del toolkit"""


class ContractViolationError(CompressedSensingError):
    """Dimensiones o precondiciones incompatibles"""


class DegenerateColumnError(CompressedSensingError):
    """Columna de norma cero donde se necesita normalizar"""

    def __init__(self, column: int, message: Optional[str] = None):
        self.column = column
        super().__init__(message or f"Column {column} has zero norm")


class DegenerateInputError(CompressedSensingError):
    """Entrada sin rango útil (por ejemplo Ψ̂ de rango cero)"""


class ParameterError(CompressedSensingError):
    """Parámetro escalar fuera de su rango válido"""


class EmptyBatchError(CompressedSensingError):
    """Lote sin columnas"""


class InfeasibleGroupError(CompressedSensingError):
    """Especificación de grupos con probabilidades fuera de [0, 1]"""


class UnknownKindError(CompressedSensingError):
    """Algoritmo o caso desconocido"""


class ConfigError(CompressedSensingError):
    """Configuración de experimento inválida o infactible"""


class UsageError(CompressedSensingError):
    """Combinación de flags inválida en el CLI"""


class MatrixParseError(CompressedSensingError):
    """Archivo de matriz mal formado"""

    def __init__(self, message: str, row: Optional[int] = None, token: Optional[str] = None):
        self.row = row
        self.token = token
        super().__init__(message)


class MatrixIOError(CompressedSensingError):
    """Fallo de lectura/escritura asociado a una ruta"""

    def __init__(self, path: str, error: str):
        self.path = path
        super().__init__(f"{path}: {error}")
