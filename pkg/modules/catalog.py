"""
Built-in presentations: full sl(2), sl(3) and the standard subalgebras of
sl(3), plus one non-semisimple negative case. Bases are arranged so the
Cartan split is k = antisymmetric members, p = symmetric members.
"""
import logging
from typing import Callable, Optional

import numpy as np
from fuzzywuzzy import fuzz

from config import CATALOG_FUZZY_THRESHOLD, SCHEMA_VERSION
from modules.documents import PresentationDocument
from modules.errors import UnknownCatalogEntryError

logger = logging.getLogger(__name__)


def _e(n: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((n, n))
    m[i, j] = 1.0
    return m


def _document(name: str, mats: list[np.ndarray], k: list[int], p: list[int]) -> PresentationDocument:
    n = mats[0].shape[0]
    return PresentationDocument(
        schema_version=SCHEMA_VERSION,
        n=n,
        basis=tuple(tuple(float(v) for v in m.ravel()) for m in mats),
        k_indices=tuple(k),
        p_indices=tuple(p),
        name=name,
    )


def _split_by_symmetry(mats: list[np.ndarray]) -> tuple[list[int], list[int]]:
    k = [i for i, m in enumerate(mats) if np.allclose(m, -m.T)]
    p = [i for i, m in enumerate(mats) if i not in k]
    return k, p


def _full_sl(n: int) -> PresentationDocument:
    mats = []
    for i in range(n):
        for j in range(i + 1, n):
            mats.append(_e(n, i, j) - _e(n, j, i))
    for i in range(n - 1):
        mats.append(_e(n, i, i) - _e(n, i + 1, i + 1))
    for i in range(n):
        for j in range(i + 1, n):
            mats.append(_e(n, i, j) + _e(n, j, i))
    k, p = _split_by_symmetry(mats)
    return _document(f"sl{n}", mats, k, p)


def _sl2() -> PresentationDocument:
    return _full_sl(2)


def _sl3() -> PresentationDocument:
    return _full_sl(3)


def _sl2_block() -> PresentationDocument:
    mats = [_e(3, 0, 1) - _e(3, 1, 0), _e(3, 0, 0) - _e(3, 1, 1), _e(3, 0, 1) + _e(3, 1, 0)]
    return _document("sl2-block-in-sl3", mats, [0], [1, 2])


def _so21() -> PresentationDocument:
    mats = [_e(3, 0, 1) - _e(3, 1, 0), _e(3, 0, 2) + _e(3, 2, 0), _e(3, 1, 2) + _e(3, 2, 1)]
    return _document("so21-in-sl3", mats, [0], [1, 2])


def _so3() -> PresentationDocument:
    mats = [_e(3, 1, 2) - _e(3, 2, 1), _e(3, 2, 0) - _e(3, 0, 2), _e(3, 0, 1) - _e(3, 1, 0)]
    return _document("so3-in-sl3", mats, [0, 1, 2], [])


def _sl2_irreducible() -> PresentationDocument:
    """Image of the 3-dimensional irreducible representation of sl(2)."""
    e = np.sqrt(2.0) * (_e(3, 0, 1) + _e(3, 1, 2))
    f = e.T
    h = np.diag([2.0, 0.0, -2.0])
    return _document("sl2-irreducible-in-sl3", [e - f, h, e + f], [0], [1, 2])


def _solvable() -> PresentationDocument:
    """Borel subalgebra {H, E} of sl(2): closed but not semisimple."""
    return _document("solvable-in-sl2", [_e(2, 0, 0) - _e(2, 1, 1), _e(2, 0, 1)], [], [0, 1])


_BUILDERS: dict[str, Callable[[], PresentationDocument]] = {
    "sl2": _sl2,
    "sl3": _sl3,
    "sl2-block-in-sl3": _sl2_block,
    "so21-in-sl3": _so21,
    "so3-in-sl3": _so3,
    "sl2-irreducible-in-sl3": _sl2_irreducible,
    "solvable-in-sl2": _solvable,
}

NEGATIVE_ENTRIES = frozenset({"solvable-in-sl2"})


def catalog() -> dict[str, PresentationDocument]:
    """All built-in documents, in a fixed order."""
    return {name: build() for name, build in _BUILDERS.items()}


def semisimple_entries() -> list[str]:
    return [name for name in _BUILDERS if name not in NEGATIVE_ENTRIES]


def suggest_name(name: str) -> Optional[str]:
    """Closest catalog name: substring match first, then fuzzy partial ratio."""
    query = name.lower()
    substring = [n for n in _BUILDERS if query in n or n in query]
    if substring:
        return min(substring, key=lambda n: abs(len(n) - len(query)))
    best_score, best = 0, None
    for candidate in _BUILDERS:
        score = fuzz.partial_ratio(query, candidate)
        if score > best_score:
            best_score, best = score, candidate
    return best if best_score >= CATALOG_FUZZY_THRESHOLD else None


def get_entry(name: str) -> PresentationDocument:
    builder = _BUILDERS.get(name.lower())
    if builder is None:
        suggestion = suggest_name(name)
        logger.info("Unknown catalog entry '%s' (suggestion: %s)", name, suggestion)
        raise UnknownCatalogEntryError(name, suggestion)
    return builder()
