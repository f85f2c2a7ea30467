"""Catalogue of organizations and the crawler user-agent tokens they answer to.

Ships the audited default set (AI developers, web archives, a search
crawler, and the widely copied unofficial tokens that no company claims)
plus a line-oriented file format so audits can track new crawlers without a
code change.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError


class Purpose(enum.Enum):
    TRAINING = "training"
    RETRIEVAL = "retrieval"
    WEB_SEARCH = "web_search"
    ARCHIVE = "archive"
    RESEARCH = "research"


_PURPOSE_BY_NAME = {p.value: p for p in Purpose}

WILDCARD_ORG = "All Agents"


@dataclass(frozen=True)
class AgentEntry:
    organization: str
    agent_token: str
    official: bool
    purpose: frozenset[Purpose]
    docs_url: str | None = None


@dataclass(frozen=True)
class OrganizationPolicySet:
    """Tokens treated as equivalent when deciding whether an org is restricted.

    An organization can honor more than its own token (opt-outs for one
    crawler may be routed through another), so restriction of any member
    token restricts the organization.
    """

    organization: str
    member_tokens: tuple[str, ...]


class RegistryParseError(DataError):
    def __init__(self, message: str, path: str, line: int):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class RegistryConflictError(DataError):
    def __init__(self, token: str):
        super().__init__(f"duplicate agent token (case-insensitive): {token!r}")
        self.token = token


def _entry(org, token, official, purposes, url=None) -> AgentEntry:
    return AgentEntry(org, token, official, frozenset(purposes), url)


def default_registry() -> list[AgentEntry]:
    """The tracked crawler set: AI developers, archives, search, plus ``*``."""
    t, r, w, a, s = (
        Purpose.TRAINING,
        Purpose.RETRIEVAL,
        Purpose.WEB_SEARCH,
        Purpose.ARCHIVE,
        Purpose.RESEARCH,
    )
    return [
        _entry("OpenAI", "GPTBot", True, {t}, "https://platform.openai.com/docs/gptbot"),
        _entry("OpenAI", "ChatGPT-User", True, {r}, "https://platform.openai.com/docs/plugins/bot"),
        _entry("Google", "Google-Extended", True, {t},
               "https://developers.google.com/search/docs/crawling-indexing/overview-google-crawlers"),
        _entry("Google Search", "Googlebot", True, {w},
               "https://developers.google.com/search/docs/crawling-indexing/googlebot"),
        _entry("Common Crawl", "CCBot", True, {a, s}, "https://commoncrawl.org/ccbot"),
        _entry("Anthropic", "ClaudeBot", True, {t, r}, "https://support.anthropic.com"),
        _entry("False Anthropic", "anthropic-ai", False, {t}),
        _entry("False Anthropic", "Claude-Web", False, {r}),
        _entry("Meta", "FacebookBot", True, {t, r},
               "https://developers.facebook.com/docs/sharing/bot/"),
        _entry("Cohere", "cohere-ai", False, {t, r}),
        _entry("Internet Archive", "ia_archiver", True, {a}),
        _entry(WILDCARD_ORG, "*", True, frozenset()),
    ]


def default_policy_sets() -> list[OrganizationPolicySet]:
    """Per-organization token bindings used for restriction classification.

    Anthropic additionally binds CCBot: its opt-out policy honors Common
    Crawl's agent, so a CCBot restriction restricts Anthropic too.
    """
    return [
        OrganizationPolicySet("OpenAI", ("GPTBot", "ChatGPT-User")),
        OrganizationPolicySet("Google", ("Google-Extended",)),
        OrganizationPolicySet("Google Search", ("Googlebot",)),
        OrganizationPolicySet("Common Crawl", ("CCBot",)),
        OrganizationPolicySet("Anthropic", ("ClaudeBot", "CCBot")),
        OrganizationPolicySet("False Anthropic", ("anthropic-ai", "Claude-Web")),
        OrganizationPolicySet("Meta", ("FacebookBot",)),
        OrganizationPolicySet("Cohere", ("cohere-ai",)),
        OrganizationPolicySet("Internet Archive", ("ia_archiver",)),
    ]


def policy_sets_for(entries: list[AgentEntry]) -> list[OrganizationPolicySet]:
    """Single-token-per-org policy sets derived from registry entries.

    The default Anthropic/CCBot binding is reapplied when both tokens exist.
    """
    by_org: dict[str, list[str]] = {}
    for e in entries:
        if e.organization == WILDCARD_ORG:
            continue
        by_org.setdefault(e.organization, []).append(e.agent_token)
    tokens = {e.agent_token for e in entries}
    if "ClaudeBot" in tokens and "CCBot" in tokens:
        members = by_org.get("Anthropic", [])
        if "CCBot" not in members:
            members.append("CCBot")
    return [OrganizationPolicySet(org, tuple(toks)) for org, toks in by_org.items()]


def serialize_registry(entries: list[AgentEntry]) -> str:
    """Render entries in the tab-separated file format (see load_registry)."""
    lines = ["# org\ttoken\tofficial\tpurposes\turl"]
    for e in entries:
        purposes = ",".join(sorted(p.value for p in e.purpose))
        lines.append(
            "\t".join([e.organization, e.agent_token, str(e.official).lower(),
                       purposes, e.docs_url or "-"])
        )
    return "\n".join(lines) + "\n"


def _parse_line(line: str, path: str, lineno: int) -> AgentEntry:
    parts = line.split("\t")
    if len(parts) not in (4, 5):
        raise RegistryParseError(
            f"expected 4 or 5 tab-separated fields, got {len(parts)}", path, lineno
        )
    org, token, official_s, purposes_s = parts[:4]
    url = parts[4] if len(parts) == 5 else "-"
    if not org or not token:
        raise RegistryParseError("organization and token must be non-empty", path, lineno)
    if official_s not in ("true", "false"):
        raise RegistryParseError(f"official must be true/false, got {official_s!r}", path, lineno)
    purposes = set()
    if purposes_s:
        for name in purposes_s.split(","):
            if name not in _PURPOSE_BY_NAME:
                raise RegistryParseError(f"unknown purpose {name!r}", path, lineno)
            purposes.add(_PURPOSE_BY_NAME[name])
    return _entry(org, token, official_s == "true", purposes, None if url == "-" else url)


def load_registry(path: str | Path, base: list[AgentEntry] | None = None) -> list[AgentEntry]:
    """Load entries from a registry file, merged over ``base``.

    Format: one entry per line, tab-separated (org, token, official,
    comma-joined purposes, url or "-"); ``#`` starts a comment line. A file
    line identical to an existing entry is a harmless restatement; a line
    reusing a known token with different content is a conflict.
    """
    path = Path(path)
    entries: list[AgentEntry] = list(default_registry() if base is None else base)
    by_token = {e.agent_token.lower(): e for e in entries}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").split("\n"), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        entry = _parse_line(line, str(path), lineno)
        existing = by_token.get(entry.agent_token.lower())
        if existing is not None:
            if existing == entry:
                continue
            raise RegistryConflictError(entry.agent_token)
        by_token[entry.agent_token.lower()] = entry
        entries.append(entry)
    return entries


def lookup(entries: list[AgentEntry], token: str) -> AgentEntry | None:
    token_l = token.lower()
    for e in entries:
        if e.agent_token.lower() == token_l:
            return e
    return None
