import numpy as np
import pytest

from qubitbath import FormFactor, RegisterParams
from qubitbath.errors import AmbiguousGroupingError
from qubitbath.register import build_spectral_table

FORM1 = FormFactor(p=-0.5, prefactor=1.0, cutoff_scale=2.0)
FORM2 = FormFactor(p=0.5, prefactor=1.0, cutoff_scale=3.0)

ACCEPTANCE_LINES: list[str] = []


def make_params(b, beta=1.0, lambda1=0.01, lambda2=0.01, j=None):
    b = np.asarray(b, dtype=float)
    n = b.size
    return RegisterParams(
        j_matrix=np.zeros((n, n)) if j is None else j,
        b_fields=b,
        beta=beta,
        lambda1=lambda1,
        lambda2=lambda2,
        form1=FORM1,
        form2=FORM2,
    )


def generic_fields(rng, n, low=0.5, high=1.5):
    """Draw fields until the non-interacting register is generic."""
    while True:
        b = rng.uniform(low, high, n)
        try:
            table = build_spectral_table(make_params(b))
        except AmbiguousGroupingError:
            continue
        if table.generic and table.gap > 1e-6:
            return b


def record(name: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
