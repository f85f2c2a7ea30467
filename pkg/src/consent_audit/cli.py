"""Pipeline orchestration: fetch, classify, metrics, forecast, report.

Stages are composable over the on-disk snapshot cache so month-scale audits
can resume. Every stage is deterministic given the same config, cache, and
seeds: reruns reproduce artifacts byte for byte.

Exit codes: 0 ok, 2 config error, 3 network exhaustion, 4 data error.
Failures print one machine-readable JSON record to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__, agents, fileio, metrics, rep, restrictions, tos, wayback
from .errors import ConfigError, ConsentAuditError, DataError, NetworkExhausted
from .sarima import (
    FitError,
    SarimaSpec,
    coefficient_table,
    default_grid,
    forecast,
    grid_search,
)

CONFIG_SCHEMA_VERSION = "1"

DEFAULT_WATCHLIST = (
    "OpenAI", "Google", "Anthropic", "Cohere", "Meta",
    "Common Crawl", "Internet Archive",
)


@dataclass
class AuditConfig:
    domain_list: str = "domains.txt"
    token_table: str = "tokens.csv"
    domain_records: str = ""
    sample_filter: str = "both"
    months: str = ""
    watchlist: tuple[str, ...] = DEFAULT_WATCHLIST
    pool: tuple[str, ...] = ()
    cache_dir: str = "cache"
    output_dir: str = "out"
    api_base: str = wayback.DEFAULT_API_BASE
    replay_base: str = wayback.DEFAULT_REPLAY_BASE
    rate_limit: float = 1.0
    max_retries: int = 5
    backoff_base: float = 0.5
    parallelism: int = 4
    seed: int = 42
    tos_path: str = "/terms"
    registry_file: str = ""
    forecast_grid: str = ""
    horizon: int = 12
    forecast_level: float = 0.95
    raw_text: str = ""

    def month_list(self) -> list[str]:
        if ".." not in self.months:
            raise ConfigError(f"months must look like 2016-01..2024-04, got {self.months!r}")
        first, last = self.months.split("..", 1)
        months = wayback.month_range(first.strip(), last.strip())
        if months[0] < "2016-01":
            raise ConfigError(f"month range starts before 2016-01: {self.months!r}")
        return months

    def out(self) -> Path:
        return Path(self.output_dir)

    def config_hash(self) -> str:
        return hashlib.sha256(self.raw_text.encode("utf-8")).hexdigest()


_INT_KEYS = {"max_retries", "parallelism", "seed", "horizon"}
_FLOAT_KEYS = {"rate_limit", "forecast_level", "backoff_base"}
_LIST_KEYS = {"watchlist", "pool"}
_CONFIG_KEYS = {f.name for f in dataclasses.fields(AuditConfig)} - {"raw_text"}


def load_config(path: str | None, overrides: dict | None = None) -> AuditConfig:
    """Parse a key = value config file; flags override file values."""
    cfg = AuditConfig()
    raw = ""
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        raw = p.read_text(encoding="utf-8")
        seen_version = False
        for lineno, line in enumerate(raw.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "schema_version":
                if value != CONFIG_SCHEMA_VERSION:
                    raise ConfigError(
                        f"{path}:{lineno}: unsupported schema_version {value!r}"
                    )
                seen_version = True
                continue
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                if key in _INT_KEYS:
                    setattr(cfg, key, int(value))
                elif key in _FLOAT_KEYS:
                    setattr(cfg, key, float(value))
                elif key in _LIST_KEYS:
                    setattr(cfg, key, tuple(v.strip() for v in value.split(",") if v.strip()))
                else:
                    setattr(cfg, key, value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}")
        if not seen_version:
            raise ConfigError(f"{path}: missing schema_version key")
    cfg.raw_text = raw
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def _policy_sets(cfg: AuditConfig) -> list[agents.OrganizationPolicySet]:
    if cfg.registry_file:
        entries = agents.load_registry(cfg.registry_file)
        return agents.policy_sets_for(entries)
    return agents.default_policy_sets()


def _check_watchlist(cfg: AuditConfig, policy_sets) -> None:
    known = {ps.organization for ps in policy_sets}
    unknown = [org for org in cfg.watchlist if org not in known]
    if unknown:
        raise ConfigError(f"watchlist organizations not in registry: {unknown}")


def _read_domains(cfg: AuditConfig) -> list[str]:
    path = Path(cfg.domain_list)
    if not path.exists():
        raise ConfigError(f"domain list not found: {cfg.domain_list}")
    domains = [
        line.strip() for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
    if not domains:
        raise ConfigError(f"domain list is empty: {cfg.domain_list}")
    return domains


def _resources(cfg: AuditConfig) -> list[wayback.Resource]:
    resources = [wayback.ROBOTS]
    if cfg.tos_path:
        resources.append(wayback.tos_page(cfg.tos_path))
    return resources


def _make_client(cfg: AuditConfig) -> wayback.WaybackClient:
    cache = wayback.SnapshotCache(wayback.resolve_cache_dir(cfg.cache_dir))
    return wayback.WaybackClient(
        cache,
        api_base=cfg.api_base,
        replay_base=cfg.replay_base,
        rate_limit=cfg.rate_limit or None,
        max_retries=cfg.max_retries,
        backoff_base=cfg.backoff_base,
        parallelism=cfg.parallelism,
        jitter_seed=cfg.seed,
    )


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def cmd_fetch(cfg: AuditConfig, live: bool = False) -> int:
    domains = _read_domains(cfg)
    months = cfg.month_list()
    cfg.out().mkdir(parents=True, exist_ok=True)
    with _make_client(cfg) as client:
        if live:
            for domain in domains:
                body = client.fetch_live(domain)
                path = cfg.out() / "live" / f"{domain}.robots.txt"
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(body)
            print(f"fetched live robots.txt for {len(domains)} domains")
            return 0
        summary = client.fetch_grid(domains, _resources(cfg), months)
        requests = client.requests_made
    (cfg.out() / "fetch_summary.json").write_text(
        json.dumps(summary, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"cache grid complete: {summary['hit']} hit, {summary['no_capture']} no-capture, "
        f"{summary['fetch_error']} fetch-error ({requests} requests)"
    )
    return 0


def cmd_classify(cfg: AuditConfig) -> int:
    domains = _read_domains(cfg)
    months = cfg.month_list()
    policy_sets = _policy_sets(cfg)
    _check_watchlist(cfg, policy_sets)
    cache = wayback.SnapshotCache(wayback.resolve_cache_dir(cfg.cache_dir))
    cfg.out().mkdir(parents=True, exist_ok=True)

    robots_lines: list[str] = []
    tos_lines: list[str] = []
    summary_lines: list[str] = []
    for domain in domains:
        for month in months:
            entry = cache.get(domain, "robots", month)
            if entry is None or entry.outcome == "fetch_error":
                continue
            doc = None
            if entry.outcome == "hit":
                try:
                    doc = rep.parse_robots(cache.read_body(entry))
                except OSError as exc:
                    print(
                        json.dumps({"warning": f"unreadable cache body for "
                                    f"{domain}/robots/{month}: {exc}"}),
                        file=sys.stderr,
                    )
                    continue
            for verdict in restrictions.classify_all(doc, policy_sets, domain, month):
                robots_lines.append(restrictions.verdict_to_json(verdict))

            if not cfg.tos_path:
                continue
            tentry = cache.get(domain, "tos", month)
            if tentry is None or tentry.outcome == "fetch_error":
                continue
            text = ""
            if tentry.outcome == "hit":
                try:
                    text = tos.strip_html(cache.read_body(tentry).decode("utf-8", "replace"))
                except OSError as exc:
                    print(
                        json.dumps({"warning": f"unreadable cache body for "
                                    f"{domain}/tos/{month}: {exc}"}),
                        file=sys.stderr,
                    )
                    continue
            if not text:
                summary_lines.append(
                    tos.summary_to_json(tos.summarize(domain, month, None))
                )
                continue
            doc_t = tos.TosDocument(domain, (f"{domain}{cfg.tos_path}",), text, month)
            verdicts = {
                taxonomy: classifier(doc_t)
                for taxonomy, classifier in tos.HEURISTIC_CLASSIFIERS.items()
            }
            for v in verdicts.values():
                tos_lines.append(tos.verdict_to_json(v))
            summary_lines.append(
                tos.summary_to_json(tos.summarize(domain, month, verdicts))
            )

    if not robots_lines:
        raise DataError("no cache entries classified; run fetch first")
    fileio.write_jsonl(cfg.out() / "robots_verdicts.jsonl", "robots-verdicts", robots_lines)
    fileio.write_jsonl(cfg.out() / "tos_verdicts.jsonl", "tos-verdicts", tos_lines)
    fileio.write_jsonl(cfg.out() / "tos_summaries.jsonl", "tos-summaries", summary_lines)
    print(
        f"classified {len(robots_lines)} robots verdicts, "
        f"{len(summary_lines)} tos summaries"
    )
    return 0


def _load_records(cfg: AuditConfig) -> list[metrics.DomainRecord]:
    if cfg.domain_records:
        records = metrics.load_records(cfg.domain_records)
    else:
        records = metrics.records_from_token_table(
            metrics.load_token_table(cfg.token_table)
        )
    if cfg.sample_filter != "both":
        try:
            wanted = metrics.Sample(cfg.sample_filter)
        except ValueError:
            raise ConfigError(
                f"sample_filter must be head/random/both, got {cfg.sample_filter!r}"
            )
        records = [r for r in records if r.in_sample(wanted)]
        if not records:
            raise DataError(f"sample filter {cfg.sample_filter!r} matched no records")
    return records


def _load_stage_inputs(cfg: AuditConfig):
    records = _load_records(cfg)
    verdicts = [
        restrictions.verdict_from_json(line)
        for line in fileio.read_jsonl(cfg.out() / "robots_verdicts.jsonl", "robots-verdicts")
    ]
    summaries = [
        tos.summary_from_json(line)
        for line in fileio.read_jsonl(cfg.out() / "tos_summaries.jsonl", "tos-summaries")
    ]
    if not verdicts:
        raise DataError("robots verdict file is empty")
    return records, verdicts, summaries


def _series_rows(series: metrics.MonthlySeries) -> list[list]:
    return [
        [m, v, d]
        for m, v, d in zip(series.months, series.values, series.denominators)
    ]


def cmd_metrics(cfg: AuditConfig) -> int:
    months = cfg.month_list()
    records, verdicts, summaries = _load_stage_inputs(cfg)
    corpora = sorted({c for r in records for c in r.tokens})
    watchlist = set(cfg.watchlist)
    out = cfg.out()
    out.mkdir(parents=True, exist_ok=True)

    written = []
    for corpus in corpora:
        for fill in (metrics.FillPolicy.RAW, metrics.FillPolicy.FORWARD_FILL):
            series = metrics.build_series(
                records, corpus, months, fill, verdicts=verdicts, watchlist=watchlist
            )
            name = f"series_robots_{corpus}_{fill.value}.csv"
            fileio.write_csv(out / name, "series", ["month", "value", "denominator"],
                             _series_rows(series))
            written.append(name)
            if summaries:
                tos_series = metrics.build_series(
                    records, corpus, months, fill, summaries=summaries
                )
                name = f"series_tos_{corpus}_{fill.value}.csv"
                fileio.write_csv(out / name, "series", ["month", "value", "denominator"],
                                 _series_rows(tos_series))
                written.append(name)

    last_month = max(v.month for v in verdicts)
    last = [v for v in verdicts if v.month == last_month]
    orgs = sorted({v.organization for v in last})
    matrix = metrics.conditional_matrix(last, orgs)
    fileio.write_csv(
        out / "conditional_matrix.csv", "conditional-matrix",
        ["org_a", *orgs],
        [[a, *[matrix[a][b] for b in orgs]] for a in orgs],
    )
    written.append("conditional_matrix.csv")

    pool = list(cfg.pool) if cfg.pool else orgs
    given_any = metrics.restricted_given_any(last, pool)
    fileio.write_csv(
        out / "restricted_given_any.csv", "restricted-given-any",
        ["org", "fraction"],
        [[org, given_any[org]] for org in pool],
    )
    written.append("restricted_given_any.csv")

    if summaries:
        for corpus in corpora:
            table = metrics.cross_tabulate(
                summaries, verdicts, records, corpus, watchlist, last_month
            )
            rows = [
                [bucket, *[table[bucket][col] for col in metrics.ROBOTS_BUCKETS]]
                for bucket in (b.name.lower() for b in tos.SummaryBucket)
            ]
            name = f"cross_tab_{corpus}.csv"
            fileio.write_csv(out / name, "cross-tab",
                             ["tos_bucket", *metrics.ROBOTS_BUCKETS], rows)
            written.append(name)

    print(f"metrics written: {', '.join(written)}")
    return 0


def _parse_grid(text: str) -> list[SarimaSpec]:
    specs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [int(v) for v in chunk.split(",")]
        if len(parts) == 3:
            specs.append(SarimaSpec(*parts))
        elif len(parts) == 7:
            specs.append(SarimaSpec(*parts))
        else:
            raise ConfigError(
                f"forecast_grid entries need 3 (p,d,q) or 7 (p,d,q,P,D,Q,s) "
                f"integers: {chunk!r}"
            )
    if not specs:
        raise ConfigError("forecast_grid parsed to an empty grid")
    return specs


def cmd_forecast(cfg: AuditConfig, horizon: int | None = None) -> int:
    horizon = horizon or cfg.horizon
    out = cfg.out()
    records = _load_records(cfg)
    corpora = sorted({c for r in records for c in r.tokens})
    grid = _parse_grid(cfg.forecast_grid) if cfg.forecast_grid else default_grid()

    produced = []
    for corpus in corpora:
        series_path = out / f"series_robots_{corpus}_forward_fill.csv"
        if not series_path.exists():
            raise DataError(f"missing series file {series_path}; run metrics first")
        _, rows = fileio.read_csv(series_path, "series")
        values = [float(row[1]) for row in rows]

        results = grid_search(values, grid)
        best = None
        best_key = None
        for spec, fitted in results:
            if fitted is None or not fitted.converged:
                continue
            key = (fitted.aic, spec.n_arma_params)
            if best_key is None or key < best_key:
                best = (fitted, spec)
                best_key = key
        if best is None:
            raise FitError(
                f"no SARIMA candidate converged for {corpus} "
                f"(series length {len(values)})"
            )
        fitted, spec = best
        fc = forecast(fitted, values, horizon, level=cfg.forecast_level, clamp_unit=True)
        name = f"forecast_robots_{corpus}.csv"
        fileio.write_csv(
            out / name, "forecast",
            ["step", "mean", "lower", "upper", "clamped"],
            [
                [h + 1, fc.mean[h], fc.lower[h], fc.upper[h], str(fc.clamped[h]).lower()]
                for h in range(horizon)
            ],
        )
        report = {
            "corpus": corpus,
            "order": spec.order_label(),
            "coefficients": coefficient_table(fitted, values),
            "loglik": fitted.loglik,
            "aic": fitted.aic,
            "converged": fitted.converged,
            "seed": cfg.seed,
            "level": cfg.forecast_level,
        }
        (out / f"fit_report_{corpus}.json").write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        produced.extend([name, f"fit_report_{corpus}.json"])
    print(f"forecasts written: {', '.join(produced)}")
    return 0


def cmd_report(cfg: AuditConfig) -> int:
    out = cfg.out()
    months = cfg.month_list()
    expected = ["fetch_summary.json", "robots_verdicts.jsonl", "tos_verdicts.jsonl",
                "tos_summaries.jsonl"]
    missing = [name for name in expected if not (out / name).exists()]
    artifacts = sorted(
        p for p in out.rglob("*")
        if p.is_file() and p.name != "manifest.json" and "live" not in p.parts
    )
    series_like = [p for p in artifacts if p.suffix == ".csv"]
    if missing or not series_like:
        raise DataError(
            f"upstream outputs missing: {missing or ['no CSV artifacts']}; "
            "run fetch/classify/metrics first"
        )
    listing = []
    for path in artifacts:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        listing.append(
            {"path": str(path.relative_to(out)), "sha256": digest,
             "bytes": path.stat().st_size}
        )
    manifest = {
        "tool": "consent-audit",
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "months": [months[0], months[-1]],
        "artifacts": listing,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"manifest written with {len(listing)} artifacts")
    return 0


def cmd_registry(cfg: AuditConfig, action: str, path: str | None) -> int:
    if action == "print":
        entries = agents.load_registry(path) if path else agents.default_registry()
        sys.stdout.write(agents.serialize_registry(entries))
        return 0
    if action == "validate":
        if not path:
            raise ConfigError("registry validate needs a file path")
        entries = agents.load_registry(path)
        print(f"ok: {len(entries)} entries")
        return 0
    raise ConfigError(f"unknown registry action {action!r}")


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consent-audit",
        description="Audit web-domain consent signals for AI crawling.",
    )
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--parallelism", type=int, help="override fetch parallelism")
    parser.add_argument("--live", action="store_true",
                        help="fetch the live web instead of the archive")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fetch", help="populate the snapshot cache")
    sub.add_parser("classify", help="classify cached robots.txt and ToS pages")
    sub.add_parser("metrics", help="compute token-weighted metrics")
    fc = sub.add_parser("forecast", help="fit and forecast restriction series")
    fc.add_argument("--horizon", type=int, default=None)
    sub.add_parser("report", help="emit the manifest over all artifacts")
    reg = sub.add_parser("registry", help="print or validate an agent registry")
    reg.add_argument("action", choices=["print", "validate"])
    reg.add_argument("path", nargs="?", default=None)
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "parallelism": args.parallelism}
    cfg = load_config(args.config, overrides)
    if args.command == "fetch":
        return cmd_fetch(cfg, live=args.live)
    if args.command == "classify":
        return cmd_classify(cfg)
    if args.command == "metrics":
        return cmd_metrics(cfg)
    if args.command == "forecast":
        return cmd_forecast(cfg, horizon=args.horizon)
    if args.command == "report":
        return cmd_report(cfg)
    if args.command == "registry":
        return cmd_registry(cfg, args.action, args.path)
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except ConsentAuditError as exc:
        if isinstance(exc, ConfigError):
            code = 2
        elif isinstance(exc, NetworkExhausted):
            code = 3
        else:
            code = 4
        print(
            json.dumps(
                {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
            ),
            file=sys.stderr,
        )
        return code


if __name__ == "__main__":
    sys.exit(main())
