import pytest

from hardtraps import validation as V


@pytest.mark.parametrize("chk", V.REGISTRY, ids=lambda c: c.qualname)
def test_registered_check(chk):
    (result,) = V.run_checks([chk], seed=0)
    assert result.passed, result.detail


def test_select_by_module():
    names = [c.qualname for c in V.select("spectral")]
    assert names and all(n.startswith("spectral.") for n in names)
    assert len(V.select(None)) == len(V.REGISTRY)


def test_runner_captures_errors():
    def boom(seed):
        raise ZeroDivisionError("x")

    (result,) = V.run_checks([V.Check("demo", "boom", boom)], seed=0)
    assert not result.passed and "ZeroDivisionError" in result.detail
