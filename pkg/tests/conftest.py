import pytest

from apvar.arith import build_arith_tables
from apvar.forms import build_hecke_table


@pytest.fixture(scope="session")
def tables_small():
    """Arithmetic tables covering n <= 10^4 (fast to build, shared)."""
    return build_arith_tables(10_000)


@pytest.fixture(scope="session")
def hecke_small():
    """Exact Delta coefficients for n <= 6000."""
    return build_hecke_table(6_000)


@pytest.fixture(scope="session")
def tables_mid():
    """Arithmetic tables covering n <= 10^5 (decomposition-scale runs)."""
    return build_arith_tables(100_000)
