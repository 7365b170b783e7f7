"""Tests for panel models and CSV ingestion."""

import io

import pandas as pd
import pytest

from conftest import make_panel, write_csv
from matchfn.errors import DuplicateObservationError, EmptyInputError, SchemaError
from matchfn.ingest import ColumnSchema, ingest_panel, read_panel_text, serialize_panel
from matchfn.models import PanelObservation, to_month


class TestToMonth:
    def test_parses_iso_month(self):
        assert to_month("2019-12") == pd.Period("2019-12", freq="M")

    def test_passes_periods_through(self):
        period = pd.Period("2020-03", freq="M")
        assert to_month(period) == period

    @pytest.mark.parametrize("text", ["2019-13", "2019/12", "19-12", "2019-12-01", ""])
    def test_rejects_bad_months(self, text):
        with pytest.raises(ValueError):
            to_month(text)


class TestPanelObservation:
    def test_rejects_negative_counts(self):
        with pytest.raises(ValueError, match="users"):
            PanelObservation(period=to_month("2020-01"), users=-1.0, vacancies=1.0, hires=1.0)

    def test_hires_may_exceed_users(self):
        obs = PanelObservation(period=to_month("2020-01"), users=10.0, vacancies=50.0, hires=30.0)
        assert obs.hires > obs.users

    def test_dict_round_trip(self):
        obs = PanelObservation(to_month("2020-01"), 10.0, 5.0, 3.0, region="Tokyo")
        assert PanelObservation.from_dict(obs.to_dict()) == obs


class TestIngest:
    def test_sorts_by_region_then_period(self, simple_csv):
        panel = ingest_panel(simple_csv)

        keys = [(obs.region, str(obs.period)) for obs in panel]
        assert keys == [
            ("Osaka", "2019-12"),
            ("Osaka", "2020-02"),
            ("Tokyo", "2019-12"),
            ("Tokyo", "2020-01"),
        ]

    def test_records_gaps_without_filling(self, simple_csv):
        panel = ingest_panel(simple_csv)

        assert len(panel) == 4
        assert [(str(gap.period), gap.region) for gap in panel.gaps] == [("2020-01", "Osaka")]

    def test_region_column_is_optional(self, tmp_path):
        path = write_csv(tmp_path / "p.csv", "period,users,vacancies,hires\n2020-01,1,2,3\n2020-02,4,5,6\n")
        panel = ingest_panel(path)

        assert panel.regions == [None]
        assert panel.observations[0].users == 1.0

    def test_rejects_bad_rows_but_keeps_the_rest(self, tmp_path):
        path = write_csv(
            tmp_path / "p.csv",
            "period,users,vacancies,hires\n"
            "2020-01,10,5,3\n"
            "2020-02,-1,5,3\n"
            "2020-03,abc,5,3\n"
            "2020-04,10,5,3\n",
        )
        panel = ingest_panel(path)

        assert len(panel) == 2
        assert [error.line for error in panel.rejected] == [3, 4]

    def test_duplicates_abort_with_offenders(self, tmp_path):
        path = write_csv(
            tmp_path / "p.csv",
            "period,region,users,vacancies,hires\n"
            "2020-01,A,1,1,1\n"
            "2020-01,A,2,2,2\n"
            "2020-02,A,1,1,1\n",
        )
        with pytest.raises(DuplicateObservationError) as info:
            ingest_panel(path)

        assert info.value.offenders == [(to_month("2020-01"), "A")]
        assert "2020-01/A" in str(info.value)

    def test_missing_column_names_the_column(self, tmp_path):
        path = write_csv(tmp_path / "p.csv", "period,users,hires\n2020-01,1,1\n")
        with pytest.raises(SchemaError, match="vacancies"):
            ingest_panel(path)

    def test_header_only_is_empty(self, tmp_path):
        path = write_csv(tmp_path / "p.csv", "period,users,vacancies,hires\n")
        with pytest.raises(EmptyInputError):
            ingest_panel(path)

    def test_empty_file_is_empty(self, tmp_path):
        with pytest.raises(EmptyInputError):
            ingest_panel(write_csv(tmp_path / "p.csv", ""))

    def test_custom_column_names(self):
        text = "month,seekers,jobs,matches\n2020-01,\"1,200\",300,150\n"
        schema = ColumnSchema(period="month", users="seekers", vacancies="jobs", hires="matches")
        panel = read_panel_text(text, schema)

        assert panel.observations[0].users == 1200.0

    def test_error_messages_are_module_qualified(self, tmp_path):
        path = write_csv(tmp_path / "p.csv", "period,users\n2020-01,1\n")
        with pytest.raises(SchemaError) as info:
            ingest_panel(path)

        assert str(info.value).startswith("[panel-core]")


class TestSerialize:
    def test_round_trip_preserves_panel(self):
        panel = make_panel([
            ("2020-01", 100.5, 50.25, 40.125, "Tokyo"),
            ("2020-02", 1e6 / 3, 2.0, 0.0, "Tokyo"),
            ("2020-01", 7.0, 8.0, 9.0),
        ])

        again = ingest_panel(io.StringIO(serialize_panel(panel)))

        assert again.observations == panel.observations

    def test_region_left_empty_when_absent(self):
        panel = make_panel([("2020-01", 1.0, 2.0, 3.0)])
        lines = serialize_panel(panel).splitlines()

        assert lines[0] == "period,region,users,vacancies,hires"
        assert lines[1] == "2020-01,,1.0,2.0,3.0"
