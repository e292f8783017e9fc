import random

import pytest

from helpers import oracle_valid, oracle_variants, random_feature_model
from splmut.feature_model import (
    ChildSlot,
    Configuration,
    CrossTreeConstraint,
    DomainMismatch,
    Feature,
    FeatureModel,
    LimitExceeded,
    Unsatisfiable,
    complete_partial,
    enumerate_configurations,
    is_satisfiable,
    is_valid_configuration,
    validate_model,
)
from splmut.fixtures import load_fixture


def small_model() -> FeatureModel:
    # Root with mandatory A, optional B, alternative {C, D} under A, B requires C
    return FeatureModel("R", (
        Feature("R", "", (ChildSlot("mandatory", ("A",)), ChildSlot("optional", ("B",)))),
        Feature("A", "", (ChildSlot("alternative", ("C", "D")),)),
        Feature("B"), Feature("C"), Feature("D"),
    ), (CrossTreeConstraint("requires", "B", "C"),))


def test_small_model_variants():
    fm = small_model()
    assert validate_model(fm) == []
    got = [c.selected for c in enumerate_configurations(fm)]
    assert sorted(got) == sorted([("A", "C", "R"), ("A", "D", "R"), ("A", "B", "C", "R")])


@pytest.mark.parametrize("name,count", [("eshop", 20), ("ticketmach", 8), ("alarmsys", 42)])
def test_fixture_variant_counts_match_brute_force(name, count):
    fm = load_fixture(name).spec.feature_model
    got = [c.selected for c in enumerate_configurations(fm)]
    assert len(got) == count
    assert got == oracle_variants(fm)


def test_enumeration_matches_oracle_on_random_models():
    rng = random.Random(11)
    for _ in range(300):
        fm = random_feature_model(rng, rng.randint(1, 9))
        assert validate_model(fm) == []
        assert [c.selected for c in enumerate_configurations(fm)] == oracle_variants(fm)


def test_validity_matches_oracle_on_random_valuations():
    rng = random.Random(12)
    for _ in range(300):
        fm = random_feature_model(rng, rng.randint(1, 16))
        for _ in range(20):
            v = {f: rng.random() < 0.5 for f in fm.ids}
            assert is_valid_configuration(fm, Configuration.of(v)) == oracle_valid(fm, v)


def test_limit_exceeded():
    fm = FeatureModel("R", (Feature("R", "", tuple(ChildSlot("optional", (f"O{i}",)) for i in range(6))),)
                      + tuple(Feature(f"O{i}") for i in range(6)))
    assert len(enumerate_configurations(fm)) == 64
    with pytest.raises(LimitExceeded):
        enumerate_configurations(fm, limit=10)


def test_complete_partial_prefers_fewest_then_lexicographic():
    fm = small_model()
    assert complete_partial(fm).selected == ("A", "C", "R")
    assert complete_partial(fm, forbidden={"C"}).selected == ("A", "D", "R")
    assert complete_partial(fm, required={"B"}).selected == ("A", "B", "C", "R")
    with pytest.raises(Unsatisfiable):
        complete_partial(fm, required={"B", "D"})
    with pytest.raises(Unsatisfiable):
        complete_partial(fm, required={"B"}, forbidden={"B"})
    with pytest.raises(Unsatisfiable):
        complete_partial(fm, required={"Nope"})


def test_is_satisfiable():
    fm = small_model()
    assert is_satisfiable(fm, [("B", True), ("C", True)])
    assert not is_satisfiable(fm, [("B", True), ("D", True)])
    assert not is_satisfiable(fm, [("R", False)])


def test_domain_mismatch():
    with pytest.raises(DomainMismatch):
        is_valid_configuration(small_model(), Configuration.of({"R": True}))


def test_configuration_helpers():
    fm = small_model()
    cfg = Configuration.from_selected(fm, ["R", "A", "C"])
    assert cfg["C"] and not cfg["B"]
    assert cfg.satisfies({"A"}, {"B"})
    assert not cfg.satisfies({"B"})
    assert str(cfg) == "{A, C, R}"


@pytest.mark.parametrize("model,code", [
    (FeatureModel("R", (Feature("R", "", (ChildSlot("or", ("A",)),)), Feature("A"))), "group-size"),
    (FeatureModel("R", (Feature("R", "", (ChildSlot("optional", ("A",)),)),)), "reference"),
    (FeatureModel("R", (Feature("R"), Feature("A"))), "tree"),
    (FeatureModel("R", (Feature("R", "", (ChildSlot("optional", ("A",)),)), Feature("A")),
                  (CrossTreeConstraint("requires", "A", "A"),)), "constraint"),
    (FeatureModel("R", (Feature("R", "", (ChildSlot("many", ("A",)),)), Feature("A"))), "tree"),
])
def test_validate_model_diagnostics(model, code):
    assert code in {d.code for d in validate_model(model)}
