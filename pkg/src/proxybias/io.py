"""File formats: ModelSpec JSON, headerless matrix CSV, curve CSV."""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path
from typing import Union

import numpy as np

from .model import STOCH_TOL, InvalidModelError, ModelSpec, Violation, validate_model

PathLike = Union[str, Path]


class ParseError(ValueError):
    """Input could not be parsed into the expected structure."""


def dumps_json(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def load_spec(path: PathLike) -> ModelSpec:
    """Read a ModelSpec JSON file.

    Raises ParseError for unreadable or structurally malformed input and
    InvalidModelError when the model violates its invariants.
    """
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read model JSON {path}: {exc}") from exc
    return spec_from_json_obj(data)


def spec_from_json_obj(data) -> ModelSpec:
    if not isinstance(data, dict):
        raise ParseError("model JSON must be an object")
    try:
        spec = ModelSpec.from_dict(data)
    except KeyError as exc:
        raise ParseError(f"model JSON missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidModelError):
            raise
        raise ParseError(f"malformed model JSON: {exc}") from exc
    violations = validate_model(spec)
    if violations:
        raise InvalidModelError(violations)
    return spec


def dump_spec(spec: ModelSpec, path: PathLike) -> None:
    Path(path).write_text(dumps_json(spec.to_dict()))


def parse_matrix_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(_io.StringIO(text)) if r and any(x.strip() for x in r)]
    if not rows:
        raise ParseError("matrix CSV is empty")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ParseError("matrix CSV rows have unequal lengths")
    try:
        mat = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise ParseError(f"non-numeric matrix entry: {exc}") from exc
    if not np.all(np.isfinite(mat)):
        raise ParseError("matrix CSV contains non-finite entries")
    return mat


def read_matrix_csv(path: PathLike) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read matrix CSV {path}: {exc}") from exc
    return parse_matrix_csv(text)


def stochastic_violations(mat: np.ndarray, tol: float = STOCH_TOL) -> list[Violation]:
    """Entry range and column-sum violations of a kernel, 1-based columns."""
    out = []
    for j in range(mat.shape[1]):
        col = mat[:, j]
        if np.any(col < 0) or np.any(col > 1):
            out.append(Violation("entries in [0,1]", j + 1, f"column {j + 1} has entries outside [0, 1]"))
        total = col.sum()
        if abs(total - 1.0) > tol:
            out.append(
                Violation(
                    "column stochastic",
                    j + 1,
                    f"column {j + 1} not stochastic (sums to {total:.12g})",
                )
            )
    return out


def format_matrix_csv(mat: np.ndarray) -> str:
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in np.asarray(mat))


def write_matrix_csv(mat: np.ndarray, path: PathLike) -> None:
    Path(path).write_text(format_matrix_csv(mat))


def read_curve_csv(path: PathLike) -> dict:
    """Read a propensity curve CSV into column arrays keyed by header name."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols: dict = {name: [] for name in reader.fieldnames or []}
        for row in reader:
            for k, v in row.items():
                cols[k].append(float(v))
    return {k: np.array(v) for k, v in cols.items()}
