from functools import lru_cache

import pytest

from hardycorner.model import CornerParams, hardy_constant
from hardycorner.radial import RadialGrid, assemble


def all_triples():
    """(N, k) in {2,3,4} x {0,1,2} with lambda in {0, lambda_Nk/2, lambda_Nk}, duplicates removed."""
    out = []
    for N in (2, 3, 4):
        for k in (0, 1, 2):
            hc = hardy_constant(N, k)
            for lam in sorted({0.0, hc / 2, hc}):
                out.append(CornerParams(N, k, lam))
    return out


TRIPLES = all_triples()


@lru_cache(maxsize=None)
def default_operator(p: CornerParams, scheme: str = "regular"):
    return assemble(p, RadialGrid.default(), scheme)


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(20261018)
