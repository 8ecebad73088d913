import numpy as np
import pytest

from sparsecov import SymMatrix, eigenvalues


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    """Compile the JIT eigensolver once so timed tests measure math, not numba."""
    eigenvalues(SymMatrix(np.eye(3)))
