"""End-to-end pipeline runs against the in-process archive fixture."""

import json
import re
from pathlib import Path

import pytest

from archive_fixture import ArchiveFixture, write_inputs
from consent_audit.cli import main
from consent_audit.fileio import read_csv, read_jsonl


@pytest.fixture(scope="module")
def archive():
    fixture = ArchiveFixture()
    yield fixture
    fixture.close()


def run_pipeline(run_dir: Path, archive: ArchiveFixture, monkeypatch) -> Path:
    run_dir.mkdir(parents=True, exist_ok=True)
    write_inputs(run_dir, archive.base_url)
    monkeypatch.chdir(run_dir)
    for command in ("fetch", "classify", "metrics", "forecast", "report"):
        assert main(["--config", "audit.cfg", command]) == 0, command
    return run_dir / "out"


@pytest.fixture(scope="module")
def pipeline_out(tmp_path_factory, archive):
    # Module-scoped single run; chdir handled manually to outlive monkeypatch.
    import os

    run_dir = tmp_path_factory.mktemp("pipeline")
    write_inputs(run_dir, archive.base_url)
    old = os.getcwd()
    os.chdir(run_dir)
    try:
        for command in ("fetch", "classify", "metrics", "forecast", "report"):
            assert main(["--config", "audit.cfg", command]) == 0, command
    finally:
        os.chdir(old)
    return run_dir / "out"


class TestPipeline:
    def test_fetch_summary_counts(self, pipeline_out):
        summary = json.loads((pipeline_out / "fetch_summary.json").read_text())
        # robots: 45 archived months + 3 early shop gaps; terms: 36 + 12 forum gaps.
        assert summary == {"hit": 81, "no_capture": 15, "fetch_error": 0}

    def test_classify_cardinality(self, pipeline_out):
        lines = read_jsonl(pipeline_out / "robots_verdicts.jsonl", "robots-verdicts")
        # every (domain, month, org) combination gets a verdict
        assert len(lines) == 4 * 12 * 9

    def test_series_steps_match_fixture_design(self, pipeline_out):
        _, rows = read_csv(
            pipeline_out / "series_robots_c4_forward_fill.csv", "series"
        )
        values = {month: float(v) for month, v, _ in rows}
        assert values["2023-05"] == 0.0
        assert values["2023-06"] == pytest.approx(0.5)
        assert values["2023-09"] == pytest.approx(0.5)
        assert values["2023-10"] == pytest.approx(2 / 3)
        assert values["2023-12"] == pytest.approx(2 / 3)

    def test_tos_series_reflects_terms_change(self, pipeline_out):
        _, rows = read_csv(pipeline_out / "series_tos_c4_raw.csv", "series")
        values = {month: float(v) for month, v, _ in rows}
        assert values["2023-08"] == 0.0
        assert values["2023-09"] == pytest.approx(0.5)  # news turns anti-crawl

    def test_conditional_matrix_row(self, pipeline_out):
        header, rows = read_csv(pipeline_out / "conditional_matrix.csv",
                                "conditional-matrix")
        matrix = {row[0]: dict(zip(header[1:], row[1:])) for row in rows}
        # In 2023-12 news blocks GPTBot and forum blocks CCBot.
        assert matrix["OpenAI"]["Common Crawl"] == "0.0"
        assert matrix["Common Crawl"]["Anthropic"] == "1.0"
        assert matrix["Meta"]["OpenAI"] == "NA"

    def test_cross_tab_cells_sum_to_one(self, pipeline_out):
        _, rows = read_csv(pipeline_out / "cross_tab_c4.csv", "cross-tab")
        total = sum(float(cell) for row in rows for cell in row[1:])
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_forecast_outputs(self, pipeline_out):
        header, rows = read_csv(pipeline_out / "forecast_robots_c4.csv", "forecast")
        assert header == ["step", "mean", "lower", "upper", "clamped"]
        assert len(rows) == 12
        for _, mean, lower, upper, clamped in rows:
            assert 0.0 <= float(lower) <= float(mean) <= float(upper) <= 1.0
            assert clamped in ("true", "false")
        report = json.loads((pipeline_out / "fit_report_c4.json").read_text())
        assert {"coefficients", "order", "aic", "loglik", "converged"} <= set(report)
        assert all({"coef", "std_err", "z", "p_value"} <= set(r)
                   for r in report["coefficients"])

    def test_manifest_lists_artifacts(self, pipeline_out):
        manifest = json.loads((pipeline_out / "manifest.json").read_text())
        assert len(manifest["artifacts"]) >= 6
        names = {a["path"] for a in manifest["artifacts"]}
        assert "robots_verdicts.jsonl" in names
        assert "forecast_robots_c4.csv" in names
        for artifact in manifest["artifacts"]:
            assert re.fullmatch(r"[0-9a-f]{64}", artifact["sha256"])


class TestRerunsAndErrors:
    def test_refetch_is_offline(self, pipeline_out, capsys, monkeypatch):
        monkeypatch.chdir(pipeline_out.parent)
        assert main(["--config", "audit.cfg", "fetch"]) == 0
        out = capsys.readouterr().out
        assert "(0 requests)" in out

    def test_empty_domain_list_is_config_error(self, tmp_path, archive, monkeypatch, capsys):
        write_inputs(tmp_path, archive.base_url)
        (tmp_path / "domains.txt").write_text("")
        monkeypatch.chdir(tmp_path)
        assert main(["--config", "audit.cfg", "fetch"]) == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["exit_code"] == 2

    def test_missing_config_is_config_error(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        assert main(["--config", "nope.cfg", "fetch"]) == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "ConfigError"

    def test_unknown_config_key_rejected(self, tmp_path, archive, monkeypatch, capsys):
        write_inputs(tmp_path, archive.base_url)
        with (tmp_path / "audit.cfg").open("a") as fh:
            fh.write("mystery_knob = 7\n")
        monkeypatch.chdir(tmp_path)
        assert main(["--config", "audit.cfg", "fetch"]) == 2

    def test_report_without_upstream_is_data_error(self, tmp_path, archive,
                                                   monkeypatch, capsys):
        write_inputs(tmp_path, archive.base_url)
        monkeypatch.chdir(tmp_path)
        assert main(["--config", "audit.cfg", "report"]) == 4
        err = json.loads(capsys.readouterr().err.strip())
        assert err["exit_code"] == 4

    def test_metrics_before_classify_is_data_error(self, tmp_path, archive, monkeypatch):
        write_inputs(tmp_path, archive.base_url)
        monkeypatch.chdir(tmp_path)
        assert main(["--config", "audit.cfg", "metrics"]) == 4

    def test_corrupt_cache_body_warns_and_continues(self, tmp_path, archive,
                                                    monkeypatch, capsys):
        write_inputs(tmp_path, archive.base_url)
        monkeypatch.chdir(tmp_path)
        assert main(["--config", "audit.cfg", "fetch"]) == 0
        body = tmp_path / "cache" / "news.example" / "robots" / "2023-03"
        body.unlink()
        assert main(["--config", "audit.cfg", "classify"]) == 0
        captured = capsys.readouterr()
        assert "unreadable cache body" in captured.err
        lines = read_jsonl(tmp_path / "out" / "robots_verdicts.jsonl", "robots-verdicts")
        assert len(lines) == (4 * 12 - 1) * 9

    def test_network_exhaustion_exit_code(self, tmp_path, monkeypatch, capsys):
        write_inputs(tmp_path, "http://127.0.0.1:9")  # nothing listens here
        config = (tmp_path / "audit.cfg").read_text().replace(
            "months = 2023-01..2023-12", "months = 2023-01..2023-01"
        )
        (tmp_path / "audit.cfg").write_text(config)
        monkeypatch.chdir(tmp_path)
        # CDX failures degrade to fetch_error cache entries, not a crash.
        assert main(["--config", "audit.cfg", "fetch"]) == 0
        summary = json.loads((tmp_path / "out" / "fetch_summary.json").read_text())
        assert summary["fetch_error"] == 8


class TestSampleFilter:
    def test_head_only_filter_halves_series_denominator(self, pipeline_out,
                                                        monkeypatch):
        # Label news+blog as head, forum+shop as random; head tokens = 900.
        from consent_audit.fileio import write_jsonl
        from consent_audit.metrics import DomainRecord, Sample, record_to_json

        run_dir = pipeline_out.parent
        monkeypatch.chdir(run_dir)
        records = [
            DomainRecord("news.example", {"c4": 600}, Sample.HEAD),
            DomainRecord("blog.example", {"c4": 300}, Sample.HEAD),
            DomainRecord("forum.example", {"c4": 200}, Sample.RANDOM),
            DomainRecord("shop.example", {"c4": 100}, Sample.RANDOM),
        ]
        write_jsonl(run_dir / "records.jsonl", "domain-records",
                    [record_to_json(r) for r in records])
        with (run_dir / "audit.cfg").open("a") as fh:
            fh.write("domain_records = records.jsonl\nsample_filter = head\n")
        assert main(["--config", "audit.cfg", "metrics"]) == 0
        _, rows = read_csv(run_dir / "out" / "series_robots_c4_raw.csv", "series")
        denominators = {month: int(d) for month, _, d in rows}
        assert denominators["2023-12"] == 900
        values = {month: float(v) for month, v, _ in rows}
        assert values["2023-12"] == pytest.approx(600 / 900)

    def test_bad_sample_filter_is_config_error(self, pipeline_out, monkeypatch):
        run_dir = pipeline_out.parent
        monkeypatch.chdir(run_dir)
        config = (run_dir / "audit.cfg").read_text()
        patched = run_dir / "bad.cfg"
        patched.write_text(config + "sample_filter = sideways\n")
        assert main(["--config", "bad.cfg", "metrics"]) == 2


class TestLiveMode:
    def test_live_fetch_writes_current_robots(self, tmp_path, archive, monkeypatch):
        from consent_audit import wayback as wb

        write_inputs(tmp_path, archive.base_url)
        monkeypatch.chdir(tmp_path)
        monkeypatch.setattr(
            wb.WaybackClient, "fetch_live",
            lambda self, domain, resource=wb.ROBOTS: f"live for {domain}\n".encode(),
        )
        assert main(["--config", "audit.cfg", "--live", "fetch"]) == 0
        saved = tmp_path / "out" / "live" / "news.example.robots.txt"
        assert saved.read_bytes() == b"live for news.example\n"


class TestRegistryCommand:
    def test_print_default(self, capsys):
        assert main(["registry", "print"]) == 0
        out = capsys.readouterr().out
        assert "GPTBot" in out and "anthropic-ai" in out

    def test_validate_good_file(self, tmp_path, capsys):
        path = tmp_path / "extra.tsv"
        path.write_text("Amazon\tAmazonbot\ttrue\ttraining\t-\n")
        assert main(["registry", "validate", str(path)]) == 0
        assert "ok: " in capsys.readouterr().out

    def test_validate_bad_file(self, tmp_path, capsys):
        path = tmp_path / "bad.tsv"
        path.write_text("EvilCorp\tGPTBot\ttrue\ttraining\t-\n")
        assert main(["registry", "validate", str(path)]) == 4
