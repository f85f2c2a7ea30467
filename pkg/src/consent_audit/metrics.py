"""Token-weighted restriction metrics over training-corpus domain lists.

Domains contribute to every statistic in proportion to their token count in
the corpus under study. Monthly denominators only ever include domains that
were actually observed (or, with forward fill, observed at least once
before), mirroring how archive gaps are excluded from the audit.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

from .errors import DataError, InputError
from .fileio import read_csv, read_jsonl
from .restrictions import RestrictionLevel, RestrictionVerdict, is_fully_restricted_for_any
from .tos import SummaryBucket, TosRestrictionSummary


class Sample(enum.Enum):
    HEAD = "head"
    RANDOM = "random"
    BOTH = "both"


PURPOSE_OPTIONS = (
    "E-commerce", "Social Media/Forum", "Encyclopedia", "Academic",
    "Government", "Organization site", "News", "Other",
)


@dataclass(frozen=True)
class DomainRecord:
    domain: str
    tokens: dict[str, int]
    sample: Sample = Sample.BOTH
    features: dict | None = None

    def __post_init__(self):
        if not self.tokens:
            raise InputError(f"domain {self.domain!r} has no token counts")
        if self.features and "purpose" in self.features:
            purpose = self.features["purpose"]
            labels = purpose if isinstance(purpose, list) else [purpose]
            bad = [p for p in labels if p not in PURPOSE_OPTIONS]
            if bad:
                raise InputError(
                    f"domain {self.domain!r} has unknown purpose labels {bad}; "
                    f"options are {PURPOSE_OPTIONS}"
                )

    def in_sample(self, wanted: Sample) -> bool:
        return wanted is Sample.BOTH or self.sample in (wanted, Sample.BOTH)


@dataclass(frozen=True)
class MonthlySeries:
    metric: str
    months: tuple[str, ...]
    values: tuple[float, ...]
    denominators: tuple[int, ...]


class UndefinedMonthError(DataError):
    """No snapshot-bearing domain carries tokens for the requested month."""


ROBOTS_BUCKETS = ("no_robots", "none_or_partial", "fully_restricted")


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def record_to_json(r: DomainRecord) -> str:
    payload = {"domain": r.domain, "tokens": r.tokens, "sample": r.sample.value}
    if r.features is not None:
        payload["features"] = r.features
    return json.dumps(payload, sort_keys=True)


def record_from_json(line: str) -> DomainRecord:
    rec = json.loads(line)
    return DomainRecord(
        rec["domain"],
        {k: int(v) for k, v in rec["tokens"].items()},
        Sample(rec.get("sample", "both")),
        rec.get("features"),
    )


def load_records(path) -> list[DomainRecord]:
    return [record_from_json(line) for line in read_jsonl(path, "domain-records")]


def load_token_table(path) -> dict[tuple[str, str], int]:
    """CSV of (domain, corpus, tokens) -> {(domain, corpus): tokens}."""
    header, rows = read_csv(path, "token-table")
    if header != ["domain", "corpus", "tokens"]:
        raise DataError(f"{path}: unexpected token table header {header}")
    table: dict[tuple[str, str], int] = {}
    for row in rows:
        domain, corpus, tokens = row
        key = (domain, corpus)
        table[key] = table.get(key, 0) + int(tokens)
    return table


def records_from_token_table(
    table: dict[tuple[str, str], int],
    samples: dict[str, Sample] | None = None,
) -> list[DomainRecord]:
    tokens_by_domain: dict[str, dict[str, int]] = {}
    for (domain, corpus), count in table.items():
        tokens_by_domain.setdefault(domain, {})[corpus] = count
    samples = samples or {}
    return [
        DomainRecord(d, toks, samples.get(d, Sample.BOTH))
        for d, toks in sorted(tokens_by_domain.items())
    ]


def rank_head(records: list[DomainRecord], corpus: str, k: int = 2000) -> set[str]:
    """Top-k domains by token count; the corpus's most critical sources."""
    ranked = sorted(
        (r for r in records if corpus in r.tokens),
        key=lambda r: (-r.tokens[corpus], r.domain),
    )
    return {r.domain for r in ranked[:k]}


def _tokens_by_domain(records: list[DomainRecord], corpus: str) -> dict[str, int]:
    # Duplicate records for one domain add up, keeping token weighting linear.
    out: dict[str, int] = {}
    for r in records:
        if corpus in r.tokens:
            out[r.domain] = out.get(r.domain, 0) + r.tokens[corpus]
    return out


def _index_verdicts(
    verdicts: list[RestrictionVerdict],
) -> dict[str, dict[str, dict[str, RestrictionVerdict]]]:
    """month -> domain -> org -> verdict."""
    idx: dict[str, dict[str, dict[str, RestrictionVerdict]]] = {}
    for v in verdicts:
        by_domain = idx.setdefault(v.month, {})
        by_org = by_domain.setdefault(v.domain, {})
        if v.organization in by_org:
            raise InputError(
                f"duplicate verdict for ({v.domain}, {v.organization}, {v.month})"
            )
        by_org[v.organization] = v
    return idx


# ---------------------------------------------------------------------------
# Fractions
# ---------------------------------------------------------------------------

def restricted_token_fraction(
    records: list[DomainRecord],
    verdicts: list[RestrictionVerdict],
    watchlist: set[str],
    corpus: str,
    month: str,
) -> float:
    """Token share of domains fully disallowing any watched organization.

    The denominator is every snapshot-bearing domain (one with verdicts for
    the month) that carries tokens in the corpus; each must have a verdict
    for every watched organization.
    """
    tokens = _tokens_by_domain(records, corpus)
    month_verdicts = _index_verdicts(verdicts).get(month, {})
    numer = denom = 0
    for domain, by_org in sorted(month_verdicts.items()):
        t = tokens.get(domain)
        if t is None:
            continue
        denom += t
        if is_fully_restricted_for_any(list(by_org.values()), watchlist):
            numer += t
    if denom == 0:
        raise UndefinedMonthError(f"no snapshot-bearing {corpus} tokens in {month}")
    return numer / denom


def tos_restricted_fraction(
    records: list[DomainRecord],
    summaries: list[TosRestrictionSummary],
    corpus: str,
    month: str,
) -> float:
    """Token share of domains whose terms preclude crawling or AI use."""
    tokens = _tokens_by_domain(records, corpus)
    numer = denom = 0
    seen = set()
    for s in summaries:
        if s.month != month:
            continue
        if s.domain in seen:
            raise InputError(f"duplicate summary for ({s.domain}, {month})")
        seen.add(s.domain)
        t = tokens.get(s.domain)
        if t is None:
            continue
        denom += t
        if s.bucket is SummaryBucket.ANTI_CRAWL_OR_ANTI_AI:
            numer += t
    if denom == 0:
        raise UndefinedMonthError(f"no summarized {corpus} tokens in {month}")
    return numer / denom


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------

def _restricted_domains(
    verdicts: list[RestrictionVerdict], orgs: list[str]
) -> tuple[set[str], dict[str, set[str]]]:
    """All domains plus, per org, the set of domains fully restricting it."""
    domains: set[str] = set()
    restricted: dict[str, set[str]] = {org: set() for org in orgs}
    seen: set[tuple[str, str]] = set()
    for v in verdicts:
        domains.add(v.domain)
        if v.organization in restricted:
            seen.add((v.domain, v.organization))
            if v.level is RestrictionLevel.FULLY_DISALLOWED:
                restricted[v.organization].add(v.domain)
    missing = [
        (d, o) for d in sorted(domains) for o in orgs if (d, o) not in seen
    ]
    if missing:
        raise InputError(f"verdicts do not cover every (domain, org) pair: {missing[:5]}")
    return domains, restricted


def conditional_matrix(
    verdicts: list[RestrictionVerdict], orgs: list[str]
) -> dict[str, dict[str, float | None]]:
    """M[A][B]: share of A-restricting domains that also restrict B.

    Rows for organizations no domain restricts are undefined (None), not 0.
    """
    _, restricted = _restricted_domains(verdicts, orgs)
    matrix: dict[str, dict[str, float | None]] = {}
    for a in orgs:
        base = restricted[a]
        if not base:
            matrix[a] = {b: None for b in orgs}
            continue
        matrix[a] = {b: len(base & restricted[b]) / len(base) for b in orgs}
    return matrix


def restricted_given_any(
    verdicts: list[RestrictionVerdict], pool: list[str]
) -> dict[str, float | None]:
    """For each org: P(restricted | some *other* pool org is restricted)."""
    _, restricted = _restricted_domains(verdicts, pool)
    out: dict[str, float | None] = {}
    for org in pool:
        others: set[str] = set()
        for other in pool:
            if other != org:
                others |= restricted[other]
        out[org] = None if not others else len(restricted[org] & others) / len(others)
    return out


def cross_tabulate(
    summaries: list[TosRestrictionSummary],
    verdicts: list[RestrictionVerdict],
    records: list[DomainRecord],
    corpus: str,
    watchlist: set[str],
    month: str,
) -> dict[str, dict[str, float]]:
    """ToS buckets x robots buckets as fractions of corpus tokens.

    Robots columns: no robots.txt at all, partial or no restrictions, and
    fully restricted for at least one watched organization. Cells sum to 1
    over domains having both signals and corpus tokens that month.
    """
    tokens = _tokens_by_domain(records, corpus)
    month_verdicts = _index_verdicts(verdicts).get(month, {})
    summary_by_domain = {s.domain: s for s in summaries if s.month == month}

    table = {
        bucket.name.lower(): {col: 0 for col in ROBOTS_BUCKETS}
        for bucket in SummaryBucket
    }
    total = 0
    for domain, summary in sorted(summary_by_domain.items()):
        by_org = month_verdicts.get(domain)
        t = tokens.get(domain)
        if by_org is None or t is None:
            continue
        vs = list(by_org.values())
        if all(v.level is RestrictionLevel.NO_ROBOTS for v in vs):
            col = "no_robots"
        elif is_fully_restricted_for_any(vs, watchlist):
            col = "fully_restricted"
        else:
            col = "none_or_partial"
        table[summary.bucket.name.lower()][col] += t
        total += t
    if total == 0:
        raise UndefinedMonthError(f"no cross-tabulable {corpus} tokens in {month}")
    return {
        row: {col: cell / total for col, cell in cols.items()}
        for row, cols in table.items()
    }


# ---------------------------------------------------------------------------
# Time series
# ---------------------------------------------------------------------------

class FillPolicy(enum.Enum):
    RAW = "raw"
    FORWARD_FILL = "forward_fill"


def build_series(
    records: list[DomainRecord],
    corpus: str,
    months: list[str],
    fill: FillPolicy = FillPolicy.RAW,
    verdicts: list[RestrictionVerdict] | None = None,
    summaries: list[TosRestrictionSummary] | None = None,
    watchlist: set[str] | None = None,
    metric: str | None = None,
) -> MonthlySeries:
    """Monthly restricted-token fractions from robots verdicts or ToS summaries.

    RAW drops a domain from any month it was not observed; FORWARD_FILL
    carries its most recent observation across later gaps. Months where no
    domain is observed at all are dropped from the series.
    """
    if (verdicts is None) == (summaries is None):
        raise InputError("provide exactly one of verdicts or summaries")
    tokens = _tokens_by_domain(records, corpus)

    if verdicts is not None:
        if watchlist is None:
            raise InputError("watchlist required for a robots series")
        by_month = _index_verdicts(verdicts)
        observed = {
            m: {
                d: is_fully_restricted_for_any(list(by_org.values()), watchlist)
                for d, by_org in by_month.get(m, {}).items()
            }
            for m in months
        }
        default_metric = f"robots_restricted_tokens_{corpus}"
    else:
        observed = {m: {} for m in months}
        for s in summaries:
            if s.month in observed:
                observed[s.month][s.domain] = (
                    s.bucket is SummaryBucket.ANTI_CRAWL_OR_ANTI_AI
                )
        default_metric = f"tos_restricted_tokens_{corpus}"

    out_months: list[str] = []
    out_values: list[float] = []
    out_denoms: list[int] = []
    carried: dict[str, bool] = {}
    for m in sorted(months):
        current = dict(observed.get(m, {}))
        if fill is FillPolicy.FORWARD_FILL:
            carried.update(current)
            current = dict(carried)
        numer = denom = 0
        for domain, flagged in current.items():
            t = tokens.get(domain)
            if t is None:
                continue
            denom += t
            if flagged:
                numer += t
        if denom == 0:
            continue
        out_months.append(m)
        out_values.append(numer / denom)
        out_denoms.append(denom)
    return MonthlySeries(
        metric or default_metric, tuple(out_months), tuple(out_values), tuple(out_denoms)
    )
