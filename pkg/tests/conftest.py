from __future__ import annotations

import numpy as np
import pytest

from goiqc.corpus import corpus
from goiqc.cpm import QCRegister, mix
from goiqc.derivation import infer

# criterion number -> (passed, detail); filled by the acceptance tests
ACCEPTANCE: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (passed, detail)


@pytest.fixture(scope="session")
def term_corpus():
    """(entry, derivation) pairs for the generated corpus plus the closed examples."""
    return [(e, infer(e.term)) for e in corpus(200)]


@pytest.fixture(scope="session")
def empty_state():
    return mix(QCRegister.make([], np.ones(1), {}))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'} - {detail}")
