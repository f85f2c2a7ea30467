"""Terms-of-Service classification into three restriction taxonomies.

Two classification routes share one verdict shape:

* a deterministic keyword heuristic (phrase lists are data, tunable per
  audit) that scans prohibition-context sentences and cites the matched
  sentences as evidence, and
* an external-annotator protocol that posts a prompt plus the document to a
  configured completion endpoint and strictly parses a one-line JSON verdict.

Category numbering, per taxonomy:

* crawling_ai: 1 bans crawling and AI use outright, 2 bans crawling only,
  3 bans AI use only, 4 restricts either conditionally, 5 no restriction.
* license: 1 personal/noncommercial/research only, 2 commercial use under
  conditions, 3 open or unrestricted commercial use.
* competing: 1 non-compete clause, 2 no redistribution/reselling, 3 both,
  4 no restriction.
"""

from __future__ import annotations

import enum
import json
import os
import re
from dataclasses import dataclass
from html.parser import HTMLParser

import httpx

from .errors import DataError, InputError, NetworkExhausted, ProtocolError


class Taxonomy(enum.Enum):
    COMPETING_SERVICES = "competing"
    LICENSE_TYPE = "license"
    CRAWLING_AI = "crawling_ai"


CATEGORY_RANGES = {
    Taxonomy.COMPETING_SERVICES: range(1, 5),
    Taxonomy.LICENSE_TYPE: range(1, 4),
    Taxonomy.CRAWLING_AI: range(1, 6),
}

# Category meaning "no restriction found" for each taxonomy.
OPEN_CATEGORY = {
    Taxonomy.COMPETING_SERVICES: 4,
    Taxonomy.LICENSE_TYPE: 3,
    Taxonomy.CRAWLING_AI: 5,
}


class SummaryBucket(enum.IntEnum):
    NO_TERMS = 0
    NO_RESTRICTIONS = 1
    CONDITIONAL_OR_NONCOMMERCIAL = 2
    ANTI_CRAWL_OR_ANTI_AI = 3


@dataclass(frozen=True)
class TosDocument:
    domain: str
    urls: tuple[str, ...]
    text: str
    month: str = ""


@dataclass(frozen=True)
class TosVerdict:
    taxonomy: Taxonomy
    category: int
    evidence: tuple[str, ...]
    annotator: str  # "heuristic" or "external:<name>"
    domain: str = ""
    month: str = ""
    evidence_verbatim: bool = True


@dataclass(frozen=True)
class TosRestrictionSummary:
    domain: str
    month: str
    bucket: SummaryBucket


# ---------------------------------------------------------------------------
# Signal configuration
# ---------------------------------------------------------------------------

# Phrase lists are plain data so an audit can tune them without touching
# code; load_signal_config() merges a JSON file over these defaults.
DEFAULT_SIGNALS: dict[str, list[str]] = {
    "prohibition": ["not", "prohibit", "forbidden", "may not", "shall not"],
    "crawl": ["crawl", "scrape", "spider", "automated means", "robot"],
    "ai": ["artificial intelligence", "machine learning", "train", "model", "AI"],
    "condition": ["except", "open access", "with permission", "unless"],
    "noncommercial": ["personal use only", "non-commercial", "research purposes only"],
    "conditional_license": ["written permission", "subject to approval",
                            "commercial use permitted under"],
    "noncompete": ["competing service", "competitive product", "compete with"],
    "noredistribution": ["redistribute", "resell", "distribute the content",
                         "create ... datasets"],
}


def load_signal_config(path: str) -> dict[str, list[str]]:
    """Overlay phrase lists from a JSON object file onto the defaults."""
    with open(path, encoding="utf-8") as fh:
        overrides = json.load(fh)
    if not isinstance(overrides, dict):
        raise DataError(f"signal config {path!r} must be a JSON object")
    merged = {k: list(v) for k, v in DEFAULT_SIGNALS.items()}
    for key, phrases in overrides.items():
        if key not in merged:
            raise DataError(f"unknown signal set {key!r} in {path!r}")
        merged[key] = [str(p) for p in phrases]
    return merged


def _word_regex(word: str) -> str:
    """One word of a phrase. Short words need exact boundaries ("AI" must
    not fire inside "air"); longer ones match as stems with any suffix, the
    trailing "e" dropped so "scrape" reaches "scraping". Hyphens optional.
    """
    if len(word) <= 3:
        return r"\b" + re.escape(word) + r"\b"
    if word.endswith("e"):
        word = word[:-1]
    return r"\b" + re.escape(word).replace("\\-", "-?") + r"\w*"


def _phrase_pattern(phrase: str) -> re.Pattern:
    """Compile one phrase to a case-insensitive sentence matcher.

    Words match in order across punctuation/whitespace; ``...`` inside a
    phrase allows an arbitrary same-sentence gap.
    """
    parts: list[str] = []
    gap_pending = False
    for word in phrase.lower().split():
        if word == "...":
            gap_pending = True
            continue
        if not parts:
            parts.append(_word_regex(word))
        elif gap_pending:
            parts.append(r".*?" + _word_regex(word))
        else:
            parts.append(r"[\s,;:]+" + _word_regex(word))
        gap_pending = False
    return re.compile("".join(parts), re.IGNORECASE)


class _SignalMatcher:
    def __init__(self, signals: dict[str, list[str]] | None = None):
        signals = signals or DEFAULT_SIGNALS
        self._patterns = {
            key: [_phrase_pattern(p) for p in phrases]
            for key, phrases in signals.items()
        }

    def hits(self, key: str, sentence: str) -> bool:
        return any(p.search(sentence) for p in self._patterns[key])


_DEFAULT_MATCHER = _SignalMatcher()

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+|\n+")


def split_sentences(text: str) -> list[str]:
    """Period/newline-delimited spans, stripped, empties dropped."""
    return [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]


def _require_text(doc: TosDocument) -> None:
    if not doc.text.strip():
        raise InputError(
            f"empty ToS text for {doc.domain!r}; absent terms are summarized upstream"
        )


def _verdict(taxonomy, category, evidence, doc) -> TosVerdict:
    spans = tuple(evidence) if evidence else ("N/A",)
    return TosVerdict(taxonomy, category, spans, "heuristic", doc.domain, doc.month)


def classify_crawling_ai(
    doc: TosDocument, signals: dict[str, list[str]] | None = None
) -> TosVerdict:
    """Stance toward crawling and AI/ML use of the content.

    A sentence counts as prohibiting when it carries a prohibition marker;
    crawl/AI signals inside such a sentence are unconditional unless the
    sentence also carries a condition phrase.
    """
    _require_text(doc)
    m = _SignalMatcher(signals) if signals else _DEFAULT_MATCHER
    uncond_crawl: list[str] = []
    uncond_ai: list[str] = []
    conditioned: list[str] = []
    for sentence in split_sentences(doc.text):
        if not m.hits("prohibition", sentence):
            continue
        crawl = m.hits("crawl", sentence)
        ai = m.hits("ai", sentence)
        if not (crawl or ai):
            continue
        if m.hits("condition", sentence):
            conditioned.append(sentence)
            continue
        if crawl:
            uncond_crawl.append(sentence)
        if ai:
            uncond_ai.append(sentence)
    if uncond_crawl and uncond_ai:
        seen = dict.fromkeys(uncond_crawl + uncond_ai)
        return _verdict(Taxonomy.CRAWLING_AI, 1, list(seen), doc)
    if uncond_crawl:
        return _verdict(Taxonomy.CRAWLING_AI, 2, uncond_crawl, doc)
    if uncond_ai:
        return _verdict(Taxonomy.CRAWLING_AI, 3, uncond_ai, doc)
    if conditioned:
        return _verdict(Taxonomy.CRAWLING_AI, 4, conditioned, doc)
    return _verdict(Taxonomy.CRAWLING_AI, 5, [], doc)


def classify_license(
    doc: TosDocument, signals: dict[str, list[str]] | None = None
) -> TosVerdict:
    """Content license type: restricted, conditional, or open."""
    _require_text(doc)
    m = _SignalMatcher(signals) if signals else _DEFAULT_MATCHER
    noncomm = [s for s in split_sentences(doc.text) if m.hits("noncommercial", s)]
    if noncomm:
        return _verdict(Taxonomy.LICENSE_TYPE, 1, noncomm, doc)
    conditional = [s for s in split_sentences(doc.text) if m.hits("conditional_license", s)]
    if conditional:
        return _verdict(Taxonomy.LICENSE_TYPE, 2, conditional, doc)
    return _verdict(Taxonomy.LICENSE_TYPE, 3, [], doc)


def classify_competing(
    doc: TosDocument, signals: dict[str, list[str]] | None = None
) -> TosVerdict:
    """Non-compete and redistribution clauses."""
    _require_text(doc)
    m = _SignalMatcher(signals) if signals else _DEFAULT_MATCHER
    noncompete = [s for s in split_sentences(doc.text) if m.hits("noncompete", s)]
    noredist = [s for s in split_sentences(doc.text) if m.hits("noredistribution", s)]
    if noncompete and noredist:
        seen = dict.fromkeys(noncompete + noredist)
        return _verdict(Taxonomy.COMPETING_SERVICES, 3, list(seen), doc)
    if noncompete:
        return _verdict(Taxonomy.COMPETING_SERVICES, 1, noncompete, doc)
    if noredist:
        return _verdict(Taxonomy.COMPETING_SERVICES, 2, noredist, doc)
    return _verdict(Taxonomy.COMPETING_SERVICES, 4, [], doc)


HEURISTIC_CLASSIFIERS = {
    Taxonomy.CRAWLING_AI: classify_crawling_ai,
    Taxonomy.LICENSE_TYPE: classify_license,
    Taxonomy.COMPETING_SERVICES: classify_competing,
}


# ---------------------------------------------------------------------------
# External annotator protocol
# ---------------------------------------------------------------------------

_RESPONSE_LINE = (
    'Respond with exactly one line: a JSON dictionary of the form '
    '{"verdict": <category number>, "evidence": "<text quoted from the '
    'document, or N/A>"}. Do not add any other text and do not wrap the '
    'response in a code fence.'
)

PROMPT_TEMPLATES: dict[Taxonomy, str] = {
    Taxonomy.COMPETING_SERVICES: (
        "Read the Terms of Service document below and decide which category "
        "describes its stance on competing services and redistribution of "
        "content.\n"
        "1. Non-compete: a clause forbids using the site's content or data "
        "to build or power a competing service or product.\n"
        "2. No re-distribution: a clause forbids redistributing, reselling, "
        "or repackaging the content (including building datasets from it).\n"
        "3. Both of the above appear.\n"
        "4. Neither restriction appears.\n"
        + _RESPONSE_LINE
    ),
    Taxonomy.LICENSE_TYPE: (
        "Read the Terms of Service document below and decide which category "
        "describes the license it grants over the site's content.\n"
        "1. Personal, noncommercial, or research use only; commercial use "
        "is forbidden.\n"
        "2. Commercial use is possible but gated on conditions such as "
        "written permission, approval, or fees.\n"
        "3. Commercial use is open or not restricted.\n"
        + _RESPONSE_LINE
    ),
    Taxonomy.CRAWLING_AI: (
        "Read the Terms of Service document below and decide which category "
        "describes its policy on scraping/crawling and on AI or machine "
        "learning use of the content.\n"
        "1. Both crawling and AI/ML use are forbidden without exception.\n"
        "2. Crawling (or other automated collection) is forbidden without "
        "exception; AI/ML use is not mentioned.\n"
        "3. AI/ML use is forbidden without exception; crawling is not "
        "mentioned.\n"
        "4. Crawling or AI/ML use is restricted only under conditions or "
        "for parts of the site.\n"
        "5. Neither crawling nor AI/ML use is restricted.\n"
        + _RESPONSE_LINE
    ),
}


ANNOTATOR_URL_ENV = "CONSENT_AUDIT_ANNOTATOR_URL"
ANNOTATOR_TOKEN_ENV = "CONSENT_AUDIT_ANNOTATOR_TOKEN"


@dataclass
class AnnotatorEndpoint:
    """Where external annotations come from; URL/token usually via env."""

    url: str
    name: str = "external"
    auth_token: str | None = None
    timeout: float = 60.0
    max_retries: int = 3

    @classmethod
    def from_env(cls, name: str = "external") -> "AnnotatorEndpoint | None":
        url = os.environ.get(ANNOTATOR_URL_ENV)
        if not url:
            return None
        return cls(url, name=name, auth_token=os.environ.get(ANNOTATOR_TOKEN_ENV))


def parse_annotator_response(
    raw: str, taxonomy: Taxonomy, doc: TosDocument, name: str = "external"
) -> TosVerdict:
    """Strictly parse a one-line ``{"verdict": k, "evidence": "..."}`` reply.

    Anything beyond the single JSON object (prose, fences, trailing chatter)
    is a protocol error. Out-of-range verdicts are validation errors.
    Evidence that is not a verbatim substring of the document text is kept
    but flagged, not rejected.
    """
    stripped = raw.strip()
    try:
        payload = json.loads(stripped)
    except json.JSONDecodeError:
        raise ProtocolError("annotator response is not a single JSON object", raw)
    if not isinstance(payload, dict):
        raise ProtocolError("annotator response is not a JSON object", raw)
    cleaned = {str(k).strip(): v for k, v in payload.items()}
    if set(cleaned) != {"verdict", "evidence"}:
        raise ProtocolError(
            f"annotator response keys must be verdict/evidence, got {sorted(cleaned)}", raw
        )
    verdict = cleaned["verdict"]
    if isinstance(verdict, bool) or not isinstance(verdict, int) \
            or verdict not in CATEGORY_RANGES[taxonomy]:
        raise DataError(
            f"verdict {verdict!r} outside {taxonomy.value} range "
            f"{CATEGORY_RANGES[taxonomy]!r}"
        )
    evidence_raw = str(cleaned["evidence"]).strip()
    if evidence_raw == "N/A":
        spans = ("N/A",)
        verbatim = True
    else:
        spans = tuple(s.strip() for s in evidence_raw.split(";") if s.strip()) or (evidence_raw,)
        verbatim = all(s in doc.text for s in spans)
    return TosVerdict(
        taxonomy, verdict, spans, f"external:{name}", doc.domain, doc.month,
        evidence_verbatim=verbatim,
    )


def annotate_external(
    doc: TosDocument,
    taxonomy: Taxonomy,
    endpoint: AnnotatorEndpoint,
    transport: httpx.BaseTransport | None = None,
) -> TosVerdict:
    """Ask a completion endpoint to classify ``doc`` under ``taxonomy``."""
    _require_text(doc)
    prompt = PROMPT_TEMPLATES[taxonomy]
    headers = {}
    if endpoint.auth_token:
        headers["Authorization"] = f"Bearer {endpoint.auth_token}"
    last_error = None
    with httpx.Client(transport=transport, timeout=endpoint.timeout) as client:
        for attempt in range(1, endpoint.max_retries + 1):
            try:
                resp = client.post(
                    endpoint.url,
                    json={"prompt": prompt, "text": doc.text},
                    headers=headers,
                )
            except httpx.HTTPError as exc:
                last_error = str(exc)
                continue
            if resp.status_code != 200:
                last_error = f"HTTP {resp.status_code}"
                continue
            return parse_annotator_response(resp.text, taxonomy, doc, endpoint.name)
    raise NetworkExhausted(
        f"annotator {endpoint.url} failed after {endpoint.max_retries} attempts "
        f"({last_error})",
        attempts=endpoint.max_retries,
    )


# ---------------------------------------------------------------------------
# Evaluation and summarization
# ---------------------------------------------------------------------------

def evaluate(
    preds: list[TosVerdict], gold: list[TosVerdict]
) -> dict[Taxonomy, dict[str, float]]:
    """Micro-averaged precision/recall of predictions against gold labels.

    Pairs align on (domain, taxonomy). With one label per document,
    micro-averaged precision, recall, and accuracy coincide; values are
    rounded to two decimals.
    """
    pred_map = {(v.domain, v.taxonomy): v.category for v in preds}
    gold_map = {(v.domain, v.taxonomy): v.category for v in gold}
    if not gold_map:
        raise InputError("no gold verdicts to evaluate against")
    missing = sorted(
        (d, t.value) for d, t in set(pred_map) ^ set(gold_map)
    )
    if missing:
        raise InputError(f"misaligned prediction/gold keys: {missing}")
    results: dict[Taxonomy, dict[str, float]] = {}
    for taxonomy in Taxonomy:
        keys = [k for k in gold_map if k[1] is taxonomy]
        if not keys:
            continue
        correct = sum(1 for k in keys if pred_map[k] == gold_map[k])
        score = round(correct / len(keys), 2)
        results[taxonomy] = {"precision": score, "recall": score, "n": len(keys)}
    return results


def summarize(
    domain: str,
    month: str,
    verdicts: dict[Taxonomy, TosVerdict] | None,
) -> TosRestrictionSummary:
    """Collapse the three verdicts into one ordinal restriction bucket.

    None means no terms document existed for the month. Outright crawling/AI
    bans dominate; conditional crawling/AI clauses, restrictive licenses, and
    non-compete/no-redistribution clauses form the middle bucket.
    """
    if verdicts is None:
        return TosRestrictionSummary(domain, month, SummaryBucket.NO_TERMS)
    crawling = verdicts.get(Taxonomy.CRAWLING_AI)
    license_ = verdicts.get(Taxonomy.LICENSE_TYPE)
    competing = verdicts.get(Taxonomy.COMPETING_SERVICES)
    if crawling is not None and crawling.category in (1, 2, 3):
        return TosRestrictionSummary(domain, month, SummaryBucket.ANTI_CRAWL_OR_ANTI_AI)
    if (
        (crawling is not None and crawling.category == 4)
        or (license_ is not None and license_.category in (1, 2))
        or (competing is not None and competing.category in (1, 2, 3))
    ):
        return TosRestrictionSummary(
            domain, month, SummaryBucket.CONDITIONAL_OR_NONCOMMERCIAL
        )
    return TosRestrictionSummary(domain, month, SummaryBucket.NO_RESTRICTIONS)


# ---------------------------------------------------------------------------
# HTML stripping
# ---------------------------------------------------------------------------

class _TextExtractor(HTMLParser):
    _SKIP = {"script", "style", "noscript"}

    def __init__(self):
        super().__init__()
        self.chunks: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in self._SKIP:
            self._skip_depth += 1

    def handle_endtag(self, tag):
        if tag in self._SKIP and self._skip_depth:
            self._skip_depth -= 1

    def handle_data(self, data):
        if not self._skip_depth and data.strip():
            self.chunks.append(data)


def strip_html(html: str) -> str:
    """Plain text from an HTML page: tags gone, script/style dropped,
    whitespace collapsed."""
    parser = _TextExtractor()
    parser.feed(html)
    text = " ".join(parser.chunks)
    return re.sub(r"\s+", " ", text).strip()


def verdict_to_json(v: TosVerdict) -> str:
    return json.dumps(
        {
            "domain": v.domain,
            "month": v.month,
            "taxonomy": v.taxonomy.value,
            "category": v.category,
            "evidence": list(v.evidence),
            "annotator": v.annotator,
            "evidence_verbatim": v.evidence_verbatim,
        },
        sort_keys=True,
    )


def verdict_from_json(line: str) -> TosVerdict:
    rec = json.loads(line)
    return TosVerdict(
        Taxonomy(rec["taxonomy"]),
        rec["category"],
        tuple(rec["evidence"]),
        rec["annotator"],
        rec["domain"],
        rec["month"],
        rec.get("evidence_verbatim", True),
    )


def summary_to_json(s: TosRestrictionSummary) -> str:
    return json.dumps(
        {"domain": s.domain, "month": s.month, "bucket": s.bucket.name.lower()},
        sort_keys=True,
    )


def summary_from_json(line: str) -> TosRestrictionSummary:
    rec = json.loads(line)
    return TosRestrictionSummary(
        rec["domain"], rec["month"], SummaryBucket[rec["bucket"].upper()]
    )
