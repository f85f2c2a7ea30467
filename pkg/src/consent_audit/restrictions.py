"""Ordinal classification of robots.txt restrictions per organization.

Levels ascend from "no robots.txt at all" to "agent fully disallowed".
Classification is per organization policy set: the union of rules applying
to any member token decides the level, and full disallowal requires the
root path to be denied for every member token that has an applicable group.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

from .agents import OrganizationPolicySet
from .errors import InputError
from .rep import Permission, RobotsDocument, RuleKind, is_allowed, select_group


class RestrictionLevel(enum.IntEnum):
    NO_ROBOTS = 1
    NO_RESTRICTIONS = 2
    SITEMAP_ONLY = 3
    SITEMAP_CRAWL_DELAY = 4
    SEARCH_QUERY_RESTRICTED = 5
    DIRECTORY_RESTRICTED = 6
    FULLY_DISALLOWED = 7


class VerdictBasis(enum.Enum):
    ORG_SPECIFIC_GROUP = "org_specific_group"
    WILDCARD_FALLBACK = "wildcard_fallback"
    ABSENT = "absent"


@dataclass(frozen=True)
class RestrictionVerdict:
    domain: str
    organization: str
    month: str  # "YYYY-MM", empty when not applicable
    level: RestrictionLevel
    basis: VerdictBasis
    matched_tokens: tuple[str, ...]


def _has_query_or_search(pattern: str) -> bool:
    if "?" in pattern:
        return True
    return any(seg == "search" for seg in pattern.split("/"))


def classify(
    doc: RobotsDocument | None,
    org: OrganizationPolicySet,
    domain: str = "",
    month: str = "",
) -> RestrictionVerdict:
    """Classify one document for one organization.

    A missing document is level 1. Otherwise the effective rules are the
    union over member tokens of their org-specific groups when any exist,
    else the wildcard group, else nothing. Precedence: full root disallowal
    (7), then search/query patterns (5), then other directory disallows (6),
    then crawl-delay (4), sitemap only (3), nothing (2).
    """
    if not org.member_tokens:
        raise InputError(f"policy set for {org.organization!r} has no member tokens")
    if doc is None:
        return RestrictionVerdict(
            domain, org.organization, month, RestrictionLevel.NO_ROBOTS,
            VerdictBasis.ABSENT, ()
        )

    specific_tokens: list[str] = []
    groups = {}
    for token in org.member_tokens:
        group = select_group(doc, token)
        if group is not None:
            groups[token] = group
            if group.agent_tokens != ("*",):
                specific_tokens.append(token)

    if specific_tokens:
        basis = VerdictBasis.ORG_SPECIFIC_GROUP
        effective = [groups[t] for t in specific_tokens]
        root_tokens = specific_tokens
    else:
        # No member has its own group; everything rides on the wildcard,
        # which may itself be missing.
        basis = VerdictBasis.WILDCARD_FALLBACK
        effective = [groups[t] for t in org.member_tokens if t in groups]
        root_tokens = [t for t in org.member_tokens if t in groups]

    disallows = [
        r.pattern
        for g in effective
        for r in g.rules
        if r.kind is RuleKind.DISALLOW and r.pattern
    ]
    crawl_delay = any(g.crawl_delay is not None for g in effective)

    level = RestrictionLevel.NO_RESTRICTIONS
    if root_tokens and all(
        is_allowed(doc, t, "/") is Permission.DISALLOWED for t in root_tokens
    ):
        level = RestrictionLevel.FULLY_DISALLOWED
    elif any(_has_query_or_search(p) for p in disallows):
        level = RestrictionLevel.SEARCH_QUERY_RESTRICTED
    elif disallows:
        level = RestrictionLevel.DIRECTORY_RESTRICTED
    elif crawl_delay:
        # With or without a sitemap: a delay is the closest ordinal.
        level = RestrictionLevel.SITEMAP_CRAWL_DELAY
    elif doc.sitemaps:
        level = RestrictionLevel.SITEMAP_ONLY

    matched = tuple(specific_tokens) if basis is VerdictBasis.ORG_SPECIFIC_GROUP else ()
    return RestrictionVerdict(domain, org.organization, month, level, basis, matched)


def classify_all(
    doc: RobotsDocument | None,
    registry: list[OrganizationPolicySet],
    domain: str = "",
    month: str = "",
) -> list[RestrictionVerdict]:
    """One verdict per organization, ordered by organization name."""
    if not registry:
        raise InputError("registry must be non-empty")
    verdicts = [classify(doc, org, domain, month) for org in registry]
    verdicts.sort(key=lambda v: v.organization)
    return verdicts


def is_fully_restricted_for_any(
    verdicts: list[RestrictionVerdict], watchlist: set[str]
) -> bool:
    """True iff some watched organization is at level 7."""
    present = {v.organization for v in verdicts}
    missing = watchlist - present
    if missing:
        raise InputError(f"watchlist organizations missing from verdicts: {sorted(missing)}")
    return any(
        v.level is RestrictionLevel.FULLY_DISALLOWED
        for v in verdicts
        if v.organization in watchlist
    )


def verdict_to_json(v: RestrictionVerdict) -> str:
    return json.dumps(
        {
            "domain": v.domain,
            "org": v.organization,
            "month": v.month,
            "level": int(v.level),
            "basis": v.basis.value,
            "matched_tokens": list(v.matched_tokens),
        },
        sort_keys=True,
    )


def verdict_from_json(line: str) -> RestrictionVerdict:
    rec = json.loads(line)
    return RestrictionVerdict(
        rec["domain"],
        rec["org"],
        rec["month"],
        RestrictionLevel(rec["level"]),
        VerdictBasis(rec["basis"]),
        tuple(rec["matched_tokens"]),
    )
