"""Shared test fixtures for the orbitcert test suite."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def _e(n, i, j):
    m = np.zeros((n, n))
    m[i, j] = 1.0
    return m


@pytest.fixture
def rng():
    """Seeded generator; every test gets the same stream."""
    return np.random.default_rng(12345)


@pytest.fixture
def unit():
    """Matrix unit e_ij (0-indexed) of size n."""
    return _e


@pytest.fixture
def catalog_split():
    """Factory: catalog entry name -> CartanSplit."""
    from modules.catalog import get_entry

    def build(name):
        return get_entry(name).to_split()

    return build


@pytest.fixture
def sl2_hef():
    """sl(2) in the basis H, E, F (Killing matrix [[8,0,0],[0,0,4],[0,4,0]])."""
    from modules.liealg import LieAlgebraPresentation

    h = np.array([[1.0, 0.0], [0.0, -1.0]])
    e = np.array([[0.0, 1.0], [0.0, 0.0]])
    f = np.array([[0.0, 0.0], [1.0, 0.0]])
    return LieAlgebraPresentation.from_matrices([h, e, f], name="sl2-hef")


@pytest.fixture
def run_cli(capsys):
    """Run the CLI in-process; returns (exit_code, stdout, stderr)."""
    from main import run

    def invoke(*argv):
        code = run(list(argv))
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return invoke


@pytest.fixture
def catalog_file(tmp_path):
    """Write a catalog entry to a file and return its path."""
    from modules.catalog import get_entry
    from modules.documents import emit_document

    def write(name):
        path = tmp_path / f"{name}.json"
        path.write_text(emit_document(get_entry(name)), encoding="utf-8")
        return str(path)

    return write
