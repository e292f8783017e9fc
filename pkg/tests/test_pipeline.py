import pytest

from helpers import SAFETY
from splmut.bundle import loads_bundle
from splmut.fixtures import load_all, load_fixture
from splmut.mapping import materialize
from splmut.mutation_ops import MAPPING_OPERATORS, generate
from splmut.pipeline import (
    COUNT_AS_KILLED,
    EQUIVALENT,
    EXCLUDE,
    INVALID,
    RunConfig,
    run,
    select_products,
)
from splmut.report import report_json
from splmut.testing import execute, generate_plc



def test_dmp_filtering_matches_mapping_literal():
    for b in load_all().values():
        report = run(b.spec, b.tests, RunConfig(operators=("DMP",)))
        by_id = {m.id: m for m in b.spec.mappings}
        checked = 0
        for link in report.links:
            deleted = by_id[link.locus[0]]
            for pm in (p for p in report.product_mutants if p.parent == link.spl_mutant):
                if pm.configuration[deleted.feature] == deleted.value:
                    assert pm.status == EQUIVALENT, pm.id
                    checked += 1
        assert checked > 0


def test_filtered_mutants_behave_like_originals():
    for b in load_all().values():
        report = run(b.spec, b.tests, RunConfig(operators=MAPPING_OPERATORS))
        assignment = select_products(b.tests, b.spec.feature_model)
        mutants = {link.spl_mutant: link for link in report.links}
        spl = {m.id: m for m in generate(b.spec, MAPPING_OPERATORS)[0]}
        for pm in report.product_mutants:
            if pm.status != EQUIVALENT:
                continue
            assert pm.parent in mutants
            original = materialize(b.spec, pm.configuration)
            mutated = materialize(spl[pm.parent].spec, pm.configuration, check=False)
            for t in b.tests:
                if assignment.get(t.id) == pm.configuration:
                    assert execute(t, mutated) == execute(t, original)


def _safety():
    b = loads_bundle(SAFETY)
    tests = generate_plc(b.spec).tests
    return b, tests


def test_guard_deletion_livelock_and_nondeterminism_are_invalid():
    b, tests = _safety()
    report = run(b.spec, tests, RunConfig(operators=("DGD",)))
    faults = {pm.parent: (pm.status, pm.fault) for pm in report.product_mutants}
    loci = {link.spl_mutant: link.locus[0] for link in report.links}
    by_locus = {loci[k]: v for k, v in faults.items()}
    assert by_locus["t4"] == (INVALID, "livelock")
    assert by_locus["t2"] == (INVALID, "non-determinism")
    row = report.rows["DGD"]
    assert row.invalid == 2 and row.participating == row.generated - 2


def test_invalid_policy_count_as_killed():
    b, tests = _safety()
    ex = run(b.spec, tests, RunConfig(operators=("DGD",), policy=EXCLUDE)).rows["DGD"]
    ck = run(b.spec, tests, RunConfig(operators=("DGD",), policy=COUNT_AS_KILLED)).rows["DGD"]
    assert ck.participating == ex.participating + 2
    assert ck.killed == ex.killed + 2


def test_livelock_respects_step_budget():
    b, tests = _safety()
    report = run(b.spec, tests, RunConfig(operators=("DGD",), step_budget=5))
    assert any(pm.fault == "livelock" for pm in report.product_mutants)


def test_no_tests_means_every_mutant_survives():
    b = load_fixture("eshop")
    report = run(b.spec, [], RunConfig(operators=MAPPING_OPERATORS))
    acc = report.layer(None)
    assert acc.killed == 0 and acc.score == 0.0
    assert report.products == ()


@pytest.mark.parametrize("workers", [2, 8])
def test_reports_identical_across_worker_counts(workers):
    b = load_fixture("ticketmach")
    base = report_json([run(b.spec, b.tests, RunConfig(workers=1), b.name)])
    other = report_json([run(b.spec, b.tests, RunConfig(workers=workers), b.name)])
    assert base == other


def test_additive_errors_are_invisible():
    for b in load_all().values():
        report = run(b.spec, b.tests, RunConfig(operators=("DMP", "DME")))
        assert report.rows["DMP"].score == 0.0
        assert report.rows["DME"].score == 0.0


def test_select_products_covers_every_test_with_few_products():
    b = load_fixture("eshop")
    assignment = select_products(b.tests, b.spec.feature_model)
    assert set(assignment) == {t.id for t in b.tests}
    for t in b.tests:
        assert assignment[t.id].satisfies(t.required, t.forbidden)
    assert len(set(assignment.values())) == 4


def test_unsatisfiable_test_is_excluded():
    b = load_fixture("eshop")
    bad = type(b.tests[0])("BAD", b.tests[0].steps, frozenset({"CreditCard"}), frozenset({"High"}))
    report = run(b.spec, list(b.tests) + [bad], RunConfig(operators=("CFV",)))
    assert report.excluded_tests == ("BAD",)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(workers=0)
    with pytest.raises(ValueError):
        RunConfig(policy="ignore")
    with pytest.raises(ValueError):
        RunConfig(operators=("XYZ",))


def test_row_bookkeeping():
    b = load_fixture("ticketmach")
    report = run(b.spec, b.tests)
    for row in report.rows.values():
        assert row.generated == row.participating + row.equivalent + row.invalid
        assert row.product_mutants == row.generated * len(report.products)
        assert row.killed <= row.participating
    links = {link.spl_mutant for link in report.links}
    assert {pm.parent for pm in report.product_mutants} == links
