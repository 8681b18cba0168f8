"""
PresentationDocument JSON: parsing with schema checks and canonical emission.

Matrices are row-major flat arrays. Canonical form: sorted keys, two-space
indent, shortest round-trip floats, trailing newline. emit(parse(x)) is the
canonical form of x.
"""
import json
import logging
import math
from dataclasses import dataclass
from typing import Any, Optional, Union

import numpy as np

from config import SCHEMA_VERSION
from modules.cartan import CartanSplit
from modules.errors import ParseError, SchemaError
from modules.liealg import LieAlgebraPresentation

logger = logging.getLogger(__name__)

_REQUIRED = ("schema_version", "n", "basis", "k_indices", "p_indices")
_OPTIONAL = ("name",)


@dataclass(frozen=True)
class PresentationDocument:
    schema_version: int
    n: int
    basis: tuple[tuple[float, ...], ...]
    k_indices: tuple[int, ...]
    p_indices: tuple[int, ...]
    name: Optional[str] = None

    @property
    def d(self) -> int:
        return len(self.basis)

    def matrices(self) -> list[np.ndarray]:
        return [np.array(b, dtype=float).reshape(self.n, self.n) for b in self.basis]

    def to_presentation(self) -> LieAlgebraPresentation:
        return LieAlgebraPresentation.from_matrices(self.matrices(), name=self.name)

    def to_split(self) -> CartanSplit:
        return CartanSplit(self.to_presentation(), self.k_indices, self.p_indices)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "schema_version": self.schema_version,
            "n": self.n,
            "basis": [list(b) for b in self.basis],
            "k_indices": list(self.k_indices),
            "p_indices": list(self.p_indices),
        }
        if self.name is not None:
            out["name"] = self.name
        return out

    @classmethod
    def from_split(cls, split: CartanSplit) -> "PresentationDocument":
        return cls(
            schema_version=SCHEMA_VERSION,
            n=split.n,
            basis=tuple(tuple(float(v) for v in m.ravel()) for m in split.g.basis),
            k_indices=tuple(split.k_idx),
            p_indices=tuple(split.p_idx),
            name=split.g.name,
        )


# ── Emission ──────────────────────────────────────────────────

def canonical_json(obj: Any) -> str:
    """Byte-stable JSON: sorted keys, indent 2, no NaN/Inf, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def emit_document(doc: PresentationDocument) -> str:
    return canonical_json(doc.to_dict())


# ── Parsing ───────────────────────────────────────────────────

def _reject_constant(token: str):
    raise ParseError(f"non-finite literal {token} is not allowed")


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return (isinstance(value, (int, float)) and not isinstance(value, bool)
            and math.isfinite(value))


def _index_list(data: dict, key: str) -> tuple[int, ...]:
    value = data[key]
    if not isinstance(value, list):
        raise SchemaError(f"/{key}", "expected a list of integers")
    for i, v in enumerate(value):
        if not _is_int(v):
            raise SchemaError(f"/{key}/{i}", f"expected an integer, got {v!r}")
    return tuple(value)


def parse_presentation(text: Union[bytes, str]) -> PresentationDocument:
    """Decode, parse and schema-check a PresentationDocument."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"input is not UTF-8: {e.reason}", position=e.start) from e
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, position=e.pos, line=e.lineno, column=e.colno) from e

    if not isinstance(data, dict):
        raise SchemaError("/", "document must be a JSON object")
    for key in _REQUIRED:
        if key not in data:
            raise SchemaError(f"/{key}", "required field is missing")
    for key in data:
        if key not in _REQUIRED and key not in _OPTIONAL:
            raise SchemaError(f"/{key}", "unknown field")

    version = data["schema_version"]
    if not _is_int(version) or version != SCHEMA_VERSION:
        raise SchemaError("/schema_version", f"unsupported schema version {version!r}, expected {SCHEMA_VERSION}")
    n = data["n"]
    if not _is_int(n) or n < 1:
        raise SchemaError("/n", f"expected a positive integer, got {n!r}")

    basis = data["basis"]
    if not isinstance(basis, list) or not basis:
        raise SchemaError("/basis", "expected a non-empty list of row-major matrices")
    rows = []
    for i, entry in enumerate(basis):
        if not isinstance(entry, list):
            raise SchemaError(f"/basis/{i}", "expected a flat list of numbers")
        if len(entry) != n * n:
            raise SchemaError(f"/basis/{i}", f"expected {n * n} entries for n={n}, got {len(entry)}")
        for j, v in enumerate(entry):
            if not _is_number(v):
                raise SchemaError(f"/basis/{i}/{j}", f"expected a finite number, got {v!r}")
        rows.append(tuple(float(v) for v in entry))

    k_indices = _index_list(data, "k_indices")
    p_indices = _index_list(data, "p_indices")
    d = len(rows)
    for key, indices in (("k_indices", k_indices), ("p_indices", p_indices)):
        for i, idx in enumerate(indices):
            if not 0 <= idx < d:
                raise SchemaError(f"/{key}/{i}", f"index {idx} outside 0..{d - 1}")
    if sorted(k_indices + p_indices) != list(range(d)):
        raise SchemaError("/p_indices", f"k_indices and p_indices must partition 0..{d - 1}")

    name = data.get("name")
    if name is not None and not isinstance(name, str):
        raise SchemaError("/name", "expected a string")

    doc = PresentationDocument(SCHEMA_VERSION, n, tuple(rows), k_indices, p_indices, name)
    logger.debug("Parsed presentation %s: n=%d, d=%d", name, n, d)
    return doc
