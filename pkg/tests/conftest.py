import numpy as np
import pytest

from umbilic import surfaces

# Expressions used for round-trip and AD-vs-finite-difference checks.  Every
# entry is smooth on [-1, 1]^2 so it can also be differentiated there.
CORPUS = [
    "u", "v", "2", "0.5", "1e-3", "2.5e2", "u+v", "u-v", "u*v", "u/(2+v)",
    "-u", "--u", "-u^2", "(-u)^2", "u^3", "u^2-v^2+3", "2*u*v", "4/(1+u^2+v^2)^2",
    "sin(u)", "cos(v)", "sinh(u)*cosh(v)", "cosh(v)*cos(u)", "exp(u+v)", "ln(2+u)",
    "sqrt(3+u*v)", "exp(-u^2)", "u-u^3/3+u*v^2", "v-v^3/3+v*u^2", "(u+v)^2",
    "u*(v*(u+1))", "u-(v-u)", "u/(v/3+2)", "u/(v+3)*2", "(u/(v+3))/2", "1+2*u+3*v^2",
    "sin(cos(u))", "sqrt(exp(u))", "ln(cosh(v))", "-(u+v)", "-sin(u)*-cos(v)",
    "2*-u", "u*-v^2", "(1+u)^4/(2+v)^3", "exp(sin(u)*v)", "cosh(u)^2-sinh(u)^2",
    "3*u^3-2*v^3+u*v", "((u))", "1/(2+sin(u+v))", "sqrt(u^2+v^2+1)", "u^0+v^1",
]
assert len(CORPUS) == 50


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def catalog_expressions():
    out = []
    for name in surfaces.CATALOG_NAMES:
        d = surfaces.catalog(name)
        for ast, src in zip(d.exprs, d.sources):
            out.append((name, src, ast, d.domain))
    return out


# One line per acceptance criterion, printed after the run.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
