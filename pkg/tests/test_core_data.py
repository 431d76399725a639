from datetime import date, timedelta

import numpy as np
import pytest

from spellforge.core.history import (
    OUTCOME_WINDOW,
    ObservationWindow,
    coverage_mask,
    covered_days,
    day_count,
    outcome_proportion,
)
from spellforge.core.io import load_cohort, load_histories, read_parent_links, read_spells
from spellforge.core.taxonomy import (
    ANY_IS,
    ANY_PAYMENT,
    UNEMPLOYMENT,
    PaymentFilter,
    Subfamily,
    classify_payment,
)
from spellforge.errors import ConfigError, DataError, SchemaError, UnknownPaymentCodeError


class TestTaxonomy:
    @pytest.mark.parametrize(
        "code, subfamily",
        [
            ("Disability Support Pension", Subfamily.DISABILITY),
            ("Newstart Allowance", Subfamily.UNEMPLOYMENT),
            ("Parenting Payment Single", Subfamily.PARENTING),
            ("Special Benefit", Subfamily.CRISIS),
            ("Austudy", Subfamily.OTHER_IS),
        ],
    )
    def test_income_support_codes(self, code, subfamily):
        category = classify_payment(code)
        assert category.is_income_support
        assert category.subfamily is subfamily

    def test_family_payment_is_not_income_support(self):
        category = classify_payment("Family Tax Benefit A")
        assert not category.is_income_support
        assert category.subfamily is Subfamily.NON_IS

    def test_unknown_code_is_an_error(self):
        with pytest.raises(UnknownPaymentCodeError) as exc:
            classify_payment("Lottery Win")
        assert exc.value.code == "Lottery Win"
        assert exc.value.exit_code == 2

    def test_filters(self):
        dsp = classify_payment("Disability Support Pension")
        carer = classify_payment("Carer Payment")
        ftb = classify_payment("Family Tax Benefit A")
        disability = PaymentFilter.parse(["disability"])
        assert disability.accepts(dsp) and not disability.accepts(carer)
        assert ANY_IS.accepts(carer) and not ANY_IS.accepts(ftb)
        assert ANY_PAYMENT.accepts(ftb)
        assert PaymentFilter.parse("any-is") is ANY_IS
        assert PaymentFilter.parse(["Carer Payment"]).accepts(carer)

    def test_unknown_filter_name(self):
        with pytest.raises(ConfigError):
            PaymentFilter.parse(["not-a-family"])


class TestObservationWindow:
    def test_outcome_window_spans_four_years(self):
        assert OUTCOME_WINDOW.days == 1461
        assert OUTCOME_WINDOW.first_day == date(2015, 1, 1)
        assert OUTCOME_WINDOW.last_day == date(2018, 12, 31)

    def test_parse_and_label(self):
        w = ObservationWindow.parse("2011-2014")
        assert w.first_day == date(2011, 1, 1)
        assert w.last_day == date(2014, 12, 31)
        assert w.label() == "2011_2014"
        assert ObservationWindow.parse("2014").label() == "2014"

    def test_day_count(self):
        assert day_count(ObservationWindow.year(2016)) == 366
        assert day_count(ObservationWindow(date(2014, 3, 1), date(2014, 3, 1))) == 1

    def test_clip_is_inclusive(self):
        w = ObservationWindow.year(2014)
        assert w.clip(date(2013, 6, 1), date(2014, 1, 1)) == (0, 0)
        assert w.clip(date(2015, 1, 1), date(2015, 2, 1)) is None

    @pytest.mark.parametrize("text", ["abc", "2011-2012-2013"])
    def test_bad_window_text(self, text):
        with pytest.raises(DataError):
            ObservationWindow.parse(text)

    def test_reversed_window(self):
        with pytest.raises(DataError):
            ObservationWindow(date(2015, 1, 1), date(2014, 1, 1))


class TestOutcomeProportion:
    def test_full_coverage(self, spell, history):
        h = history(spells=[spell("P1", "Disability Support Pension", "2010-01-01", "2019-06-30")])
        assert outcome_proportion(h) == 1.0

    def test_one_calendar_year(self, spell, history):
        h = history(spells=[spell("P1", "Newstart Allowance", "2015-01-01", "2015-12-31")])
        assert outcome_proportion(h) == pytest.approx(365 / 1461)

    def test_overlapping_spells_count_each_day_once(self, spell, history):
        h = history(
            spells=[
                spell("P1", "Newstart Allowance", "2015-01-01", "2015-06-30"),
                spell("P1", "Carer Payment", "2015-03-01", "2015-12-31"),
            ]
        )
        assert outcome_proportion(h) == pytest.approx(365 / 1461)

    def test_single_day_spell(self, spell, history):
        h = history(spells=[spell("P1", "Newstart Allowance", "2016-02-29", "2016-02-29")])
        assert covered_days(h, OUTCOME_WINDOW) == 1

    def test_filters_select_spells(self, spell, history):
        h = history(
            spells=[
                spell("P1", "Family Tax Benefit A", "2015-01-01", "2018-12-31"),
                spell("P1", "Newstart Allowance", "2017-01-01", "2017-12-31"),
                spell("P1", "Disability Support Pension", "2018-01-01", "2018-12-31"),
            ]
        )
        assert outcome_proportion(h, spell_filter=ANY_IS) == pytest.approx(730 / 1461)
        assert outcome_proportion(h, spell_filter=UNEMPLOYMENT) == pytest.approx(365 / 1461)

    def test_no_spells(self, history):
        assert outcome_proportion(history()) == 0.0

    @staticmethod
    def random_spells(spell, rng, count):
        out = []
        for _ in range(count):
            start = date(2014, 6, 1) + timedelta(days=int(rng.integers(0, 1600)))
            end = start + timedelta(days=int(rng.integers(0, 300)))
            out.append(spell("P1", "Newstart Allowance", start.isoformat(), end.isoformat()))
        return out

    def test_adding_spells_never_lowers_the_share(self, spell, history):
        for seed in range(25):
            rng = np.random.default_rng(seed)
            spells = self.random_spells(spell, rng, 6)
            shares = [outcome_proportion(history(spells=spells[:i])) for i in range(len(spells) + 1)]
            assert all(b >= a for a, b in zip(shares, shares[1:]))
            assert 0.0 <= shares[-1] <= 1.0

    def test_splitting_a_spell_changes_nothing(self, spell, history):
        whole = history(spells=[spell("P1", "Newstart Allowance", "2015-03-10", "2017-08-20")])
        pieces = history(
            spells=[
                spell("P1", "Newstart Allowance", "2015-03-10", "2015-12-31"),
                spell("P1", "Newstart Allowance", "2016-01-01", "2016-01-01"),
                spell("P1", "Newstart Allowance", "2016-01-02", "2017-08-20"),
            ]
        )
        assert outcome_proportion(pieces) == outcome_proportion(whole)

    def test_repeated_spells_are_counted_once(self, spell, history):
        for seed in range(10):
            spells = self.random_spells(spell, np.random.default_rng(seed), 4)
            once = coverage_mask(spells, OUTCOME_WINDOW)
            np.testing.assert_array_equal(coverage_mask(spells + spells, OUTCOME_WINDOW), once)
            assert covered_days(history(spells=spells + spells[:2]), OUTCOME_WINDOW) == once.sum()


class TestPersonHistory:
    def test_age_on_reference_date(self, history):
        h = history(birth_date="1990-06-15")
        assert h.age_on(date(2014, 1, 1)) == 23
        assert h.age_on(date(2014, 6, 15)) == 24

    def test_missing_birth_date(self, history):
        assert history().age_on(date(2014, 1, 1)) is None

    def test_bad_birth_date(self, history):
        with pytest.raises(DataError):
            history(birth_date="15/06/1990").birth_date()

    def test_end_before_start(self, spell):
        with pytest.raises(DataError):
            spell("P1", "Newstart Allowance", "2015-02-01", "2015-01-31")

    def test_records_must_belong_to_the_person(self, spell, history):
        with pytest.raises(DataError):
            history("P1", spells=[spell("P2", "Newstart Allowance", "2015-01-01", "2015-01-31")])


class TestReaders:
    def test_bad_date_reports_row_and_column(self, write_csv):
        path = write_csv(
            "spells.csv",
            ("person_id", "payment_code", "start_date", "end_date", "amount"),
            ("P1", "Newstart Allowance", "2015-01-01", "2015-02-01", ""),
            ("P1", "Newstart Allowance", "01/03/2015", "2015-04-01", ""),
        )
        with pytest.raises(SchemaError) as exc:
            read_spells(path)
        assert exc.value.row == 3
        assert exc.value.column == "start_date"

    def test_unknown_code_reports_column(self, write_csv):
        path = write_csv(
            "spells.csv",
            ("person_id", "payment_code", "start_date", "end_date", "amount"),
            ("P1", "Lottery Win", "2015-01-01", "2015-02-01", ""),
        )
        with pytest.raises(SchemaError) as exc:
            read_spells(path)
        assert exc.value.column == "payment_code"

    def test_missing_column(self, write_csv):
        path = write_csv("spells.csv", ("person_id", "payment_code"), ("P1", "Newstart Allowance"))
        with pytest.raises(SchemaError) as exc:
            read_spells(path)
        assert exc.value.column == "start_date"

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            read_spells(tmp_path / "absent.csv")

    def test_bad_parent_role(self, write_csv):
        path = write_csv("parent_links.csv", ("child_id", "parent_id", "role"), ("P1", "X1", "uncle"))
        with pytest.raises(SchemaError) as exc:
            read_parent_links(path)
        assert exc.value.column == "role"


class TestLoadCohort:
    def test_person_order_and_members(self, cohort_files):
        cohort = load_cohort(
            cohort_files["spells"], cohort_files["persons"], parent_links_path=cohort_files["parent_links"]
        )
        assert [p.person_id for p in cohort.persons] == ["P1", "P2", "P3"]
        assert set(cohort.others) == {"M3"}
        p1 = cohort.persons[0]
        assert p1.attribute("sex") == "F"
        assert [s.start for s in p1.spells] == sorted(s.start for s in p1.spells)
        assert cohort.persons[2].spells == ()

    def test_parent_lookup(self, cohort_files):
        cohort = load_cohort(
            cohort_files["spells"], cohort_files["persons"], parent_links_path=cohort_files["parent_links"]
        )
        mothers = cohort.parents_of("P3", "mother")
        assert [m.person_id for m in mothers] == ["M3"]
        assert mothers[0].spells[0].category.subfamily is Subfamily.PARENTING
        assert cohort.parents_of("P3", "father") is None
        assert cohort.parents_of("P1") is None

    def test_outcome_from_files(self, cohort_files):
        cohort = load_cohort(cohort_files["spells"], cohort_files["persons"])
        p1, p2, _ = cohort.persons
        assert outcome_proportion(p1) == 1.0
        assert outcome_proportion(p2) == 0.0

    def test_load_histories(self, cohort_files):
        histories = load_histories(cohort_files["spells"], cohort_files["persons"])
        assert [h.person_id for h in histories] == ["P1", "P2", "P3"]
