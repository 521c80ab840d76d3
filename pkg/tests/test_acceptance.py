"""The ten acceptance criteria at their stated tolerances, one pass/fail line each."""
import pytest

from randmaps.reproduce import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda k: f"criterion_{k:02d}")
def test_criterion(number, capsys):
    result = CRITERIA[number](seed=0, threads=1)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.details
