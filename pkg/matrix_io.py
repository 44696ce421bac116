"""
Persistencia de matrices
Formato de texto: cabecera `# rows=<r> cols=<c>` y una fila por línea,
valores separados por comas en su forma decimal más corta
"""

import json
import re
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import structlog

from errors import MatrixIOError, MatrixParseError

logger = structlog.get_logger()

PathLike = Union[str, Path]

_HEADER = re.compile(r"^#\s*rows=(\d+)\s+cols=(\d+)\s*$")


def format_float(value: float) -> str:
    """Decimal más corto que reproduce el float exactamente"""
    return repr(float(value))


def store_matrix(matrix: np.ndarray, path: PathLike) -> None:
    """Guardar una matriz (o un vector como columna)"""
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, np.newaxis]
    if arr.ndim != 2:
        raise MatrixIOError(str(path), f"cannot store array with shape {arr.shape}")
    if 0 in arr.shape:
        raise MatrixIOError(str(path), f"cannot store empty matrix with shape {arr.shape}")

    lines = [f"# rows={arr.shape[0]} cols={arr.shape[1]}"]
    lines.extend(",".join(format_float(v) for v in row) for row in arr)
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        logger.error("Matrix write failed", path=str(path), error=str(e))
        raise MatrixIOError(str(path), str(e)) from e
    logger.debug("Matrix stored", path=str(path), rows=arr.shape[0], cols=arr.shape[1])


def parse_matrix(text: str) -> np.ndarray:
    """Parsear el contenido textual de un archivo de matriz"""
    lines = text.splitlines()
    if not lines:
        raise MatrixParseError("empty matrix file", row=0)

    header = _HEADER.match(lines[0].strip())
    if not header:
        raise MatrixParseError(f"bad header {lines[0]!r}", row=0)
    rows, cols = int(header.group(1)), int(header.group(2))

    body = [line for line in lines[1:] if line.strip()]
    if len(body) != rows:
        raise MatrixParseError(f"header declares {rows} rows, found {len(body)}", row=len(body))

    out = np.empty((rows, cols), dtype=float)
    for i, line in enumerate(body, start=1):
        tokens = line.split(",")
        if len(tokens) != cols:
            raise MatrixParseError(f"row {i} has {len(tokens)} values, expected {cols}", row=i)
        for j, token in enumerate(tokens):
            try:
                out[i - 1, j] = float(token)
            except ValueError:
                raise MatrixParseError(f"non-numeric token {token.strip()!r} in row {i}", row=i, token=token.strip())
    return out


def load_matrix(path: PathLike) -> np.ndarray:
    """Leer una matriz en el formato de texto del toolkit"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        logger.error("Matrix read failed", path=str(path), error=str(e))
        raise MatrixIOError(str(path), str(e)) from e
    except UnicodeDecodeError as e:
        logger.error("Matrix is not UTF-8 text", path=str(path), error=str(e))
        raise MatrixParseError(f"{path}: not UTF-8 text ({e.reason})", row=0) from e
    matrix = parse_matrix(text)
    logger.debug("Matrix loaded", path=str(path), rows=matrix.shape[0], cols=matrix.shape[1])
    return matrix


def store_vector(vector: np.ndarray, path: PathLike) -> None:
    """Vectores (prior ξ, p) como matriz de una columna"""
    store_matrix(np.asarray(vector, dtype=float).reshape(-1), path)


def load_vector(path: PathLike) -> np.ndarray:
    matrix = load_matrix(path)
    if matrix.ndim != 2 or min(matrix.shape) > 1:
        raise MatrixParseError(f"expected a single-column matrix, got {matrix.shape}")
    return matrix.reshape(-1)


def store_report(report: Dict[str, Any], path: PathLike) -> None:
    """Guardar un reporte JSON (sidecar de diseño, métricas)"""
    try:
        Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        logger.error("Report write failed", path=str(path), error=str(e))
        raise MatrixIOError(str(path), str(e)) from e


def load_json(path: PathLike) -> Dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise MatrixIOError(str(path), str(e)) from e
    except UnicodeDecodeError as e:
        raise MatrixParseError(f"{path}: not UTF-8 text ({e.reason})") from e
    except json.JSONDecodeError as e:
        raise MatrixParseError(f"{path}: invalid JSON ({e})") from e
