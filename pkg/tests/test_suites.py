import numpy as np
import pytest

from pqctwistor import suites
from pqctwistor.suites import SuiteConfig


def test_group_streams_are_independent():
    a = suites.group_rng(7, "Z.nijenhuis").normal(size=5)
    b = suites.group_rng(7, "R.nijenhuis").normal(size=5)
    c = suites.group_rng(7, "Z.nijenhuis").normal(size=5)
    assert not np.allclose(a, b)
    assert np.array_equal(a, c)


def test_registry_ids_unique_and_cover_suites():
    ids = [g.group_id for g in suites.REGISTRY]
    assert len(ids) == len(set(ids))
    for name in suites.SUITES[:-1]:
        assert suites.selected(SuiteConfig(suite=name))
    assert len(suites.selected(SuiteConfig(suite="all"))) == len(ids)


def test_sample_scaling():
    cfg = SuiteConfig(samples=10)
    assert cfg.count(100) == 10 and cfg.count(5) == 1


def test_threshold_overrides():
    cfg = SuiteConfig(tol=1e-3, tolerances=(("x.y", 5.0),))
    assert cfg.threshold("x.y", 1e-9, "upper") == 5.0
    assert cfg.threshold("x.z", 1e-9, "upper") == 1e-3
    assert cfg.threshold("x.z", 1e-9, "lower") == 1e-9
    assert cfg.threshold("x.z", suites.EXACT, "upper") == suites.EXACT


@pytest.mark.parametrize("kw", [{"suite": "x"}, {"n": 0}, {"samples": 0}, {"seed": 2**64}, {"tol": -1.0},
                                {"f": "poly:"}])
def test_invalid_config(kw):
    with pytest.raises(ValueError):
        SuiteConfig(**kw)


def test_crashing_group_becomes_failed_check(monkeypatch):
    def boom(ctx):
        raise RuntimeError("broken")

    monkeypatch.setattr(suites, "REGISTRY", [suites.Group("x.boom", ("algebra",), boom)])
    rep = suites.run_suite(SuiteConfig(suite="algebra"), workers=1)
    assert not rep.overall_pass
    assert rep.checks[0].check_id == "x.boom.error"


def test_adding_a_group_does_not_change_others(monkeypatch):
    cfg = SuiteConfig(suite="algebra", samples=10, seed=3)
    before = suites.run_suite(cfg, workers=1).to_json()
    extra = suites.Group("algebra.extra", ("algebra",), lambda ctx: ctx.upper("algebra.extra", "x", [ctx.rng.normal()], 9.0))
    monkeypatch.setattr(suites, "REGISTRY", [extra] + suites.REGISTRY)
    after = suites.run_suite(cfg, workers=1)
    after.checks = [c for c in after.checks if c.check_id != "algebra.extra"]
    assert after.to_json() == before


def test_model_suite_small_n2():
    rep = suites.run_suite(SuiteConfig(suite="model", n=2, samples=3), workers=1)
    assert rep.overall_pass, rep.to_text()
