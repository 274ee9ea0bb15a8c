"""Acceptance suite: one check per criterion at the chosen budget tier.

The tier comes from PSSMP_PROFILE (smoke, desk or deep; default desk).  Each
criterion's pass/fail line is printed as it finishes and again in the
terminal summary.  Set PSSMP_ACCEPTANCE_OUT to also write the JSON/CSV
artefacts there.
"""
import os

import pytest

from pssmp import acceptance

PROFILE = os.environ.get("PSSMP_PROFILE", "desk")
SEED = int(os.environ.get("PSSMP_SEED", "20240601"))
LINES = []
_RESULTS = []


@pytest.mark.acceptance
@pytest.mark.parametrize("number", sorted(acceptance.RUNNERS))
def test_criterion(number):
    res = acceptance.run_criterion(number, PROFILE, SEED)
    line = f"{res.line()}  [{PROFILE}, {res.seconds:.1f}s]"
    LINES.append(line)
    _RESULTS.append(res)
    print(line)
    out = os.environ.get("PSSMP_ACCEPTANCE_OUT")
    if out and len(_RESULTS) == len(acceptance.RUNNERS):
        acceptance.write_results(_RESULTS, out, PROFILE, SEED, 1)
    assert res.passed, line
