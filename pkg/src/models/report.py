import csv
import json
import math
from fractions import Fraction
from typing import IO, Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field


def encode(value: Any) -> Any:
    """
    JSON-ready form of a numerical value.

    Complex numbers become [re, im], arrays become row-major nested lists,
    Fractions become "p/q" strings. Non-finite floats become strings so the
    output stays strict JSON.
    """
    if isinstance(value, dict):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return encode(value.tolist())
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [_encode_float(value.real), _encode_float(value.imag)]
    if isinstance(value, (float, np.floating)):
        return _encode_float(value)
    return value


def _encode_float(x) -> Any:
    x = float(x)
    return x if math.isfinite(x) else str(x)


def decode_array(nested: Sequence) -> np.ndarray:
    """Inverse of encode for a complex vector or matrix: trailing [re, im] pairs → complex."""
    arr = np.asarray(nested, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError(f"Expected trailing [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


class RunReport(BaseModel):
    """Result of one CLI command: inputs, outputs, residuals and output provenance."""
    command: str
    inputs: Dict[str, Any] = {}
    outputs: Dict[str, Any] = {}
    residuals: Dict[str, float] = {}
    tolerances: Dict[str, float] = {}
    provenance: Dict[str, str] = {}
    verdict: Optional[str] = None
    exit_code: int = Field(default=0, ge=0, le=4)

    def to_payload(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "inputs": encode(self.inputs),
            "outputs": encode(self.outputs),
            "residuals": encode(self.residuals),
            "tolerances": encode(self.tolerances),
            "provenance": dict(self.provenance),
            "verdict": self.verdict,
            "exit_code": self.exit_code,
        }

    def to_json(self, compact: bool = False) -> str:
        if compact:
            return json.dumps(self.to_payload(), separators=(",", ":"))
        return json.dumps(self.to_payload(), indent=2)

    def summary_lines(self) -> List[str]:
        """Plain-text rendering used when neither --json nor --csv is requested."""
        lines = [f"{self.command}: {self.verdict or 'ok'}"]
        for key, value in self.outputs.items():
            if isinstance(value, np.ndarray) and value.ndim > 1:
                lines.append(f"  {key} =")
                lines.extend(f"    {row}" for row in np.array2string(value, precision=10).splitlines())
            else:
                lines.append(f"  {key} = {value}")
        for key, value in self.residuals.items():
            lines.append(f"  residual[{key}] = {value:.3e}")
        return lines


def split_complex_columns(header: Sequence[str], rows: Iterable[Sequence[Any]]):
    """
    Expand complex-valued columns into `<name>_re` / `<name>_im` pairs.

    A column counts as complex when any row holds a complex value in it.
    """
    rows = [list(r) for r in rows]
    is_complex = [
        any(isinstance(r[i], (complex, np.complexfloating)) for r in rows) for i in range(len(header))
    ]
    out_header: List[str] = []
    for name, cplx in zip(header, is_complex):
        out_header.extend([f"{name}_re", f"{name}_im"] if cplx else [name])
    out_rows = []
    for r in rows:
        out = []
        for value, cplx in zip(r, is_complex):
            if cplx:
                value = complex(value)
                out.extend([repr(value.real), repr(value.imag)])
            elif isinstance(value, (float, np.floating)):
                out.append(repr(float(value)))
            else:
                out.append(value)
        out_rows.append(out)
    return out_header, out_rows


def write_csv(stream: IO[str], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """RFC-4180 CSV with complex columns split into _re/_im."""
    out_header, out_rows = split_complex_columns(header, rows)
    writer = csv.writer(stream, lineterminator="\r\n")
    writer.writerow(out_header)
    writer.writerows(out_rows)


def matrix_rows(name: str, matrix: np.ndarray) -> List[List[Any]]:
    """Long-format rows (name, i, j, value) of a matrix, 1-based indices."""
    matrix = np.atleast_2d(matrix)
    return [
        [name, i + 1, j + 1, matrix[i, j]]
        for i in range(matrix.shape[0])
        for j in range(matrix.shape[1])
    ]
