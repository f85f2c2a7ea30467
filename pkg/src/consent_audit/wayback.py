"""Monthly snapshot retrieval from a web-archive CDX API.

Queries the capture index for a domain's robots.txt (or a terms page),
picks one representative capture per month, and replays archived bodies
into an on-disk cache so month-scale audits are restartable. All outbound
traffic funnels through one rate limiter and a retry/backoff policy.

Endpoints are configurable, which is also how the tests point the client at
a local fixture server.
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import httpx

from .errors import DataError, NetworkExhausted, ProtocolError

log = logging.getLogger(__name__)

DEFAULT_API_BASE = "https://web.archive.org"
DEFAULT_REPLAY_BASE = "https://web.archive.org"
DEFAULT_MAX_BODY = 4 * 1024 * 1024
CACHE_ENV_VAR = "CONSENT_AUDIT_CACHE"

TS_FORMAT = "%Y%m%d%H%M%S"


@dataclass(frozen=True)
class Resource:
    """What to snapshot for a domain: its robots.txt or a terms page."""

    kind: str  # "robots" or "tos"
    url_path: str

    def label(self) -> str:
        return self.kind


ROBOTS = Resource("robots", "/robots.txt")


def tos_page(url_path: str) -> Resource:
    if not url_path.startswith("/"):
        url_path = "/" + url_path
    return Resource("tos", url_path)


@dataclass(frozen=True)
class Capture:
    timestamp: datetime
    original_url: str
    status_code: int
    digest: str
    redirect: bool = False
    body: bytes | None = None

    @property
    def timestamp14(self) -> str:
        return self.timestamp.strftime(TS_FORMAT)


@dataclass(frozen=True)
class CacheEntry:
    domain: str
    resource: str
    month: str
    outcome: str  # "hit" | "no_capture" | "fetch_error"
    fetched_at: str
    timestamp14: str = ""
    original_url: str = ""
    status_code: int = 0
    digest: str = ""


def month_range(first: str, last: str) -> list[str]:
    """Inclusive list of YYYY-MM strings from ``first`` to ``last``."""
    try:
        fy, fm = int(first[:4]), int(first[5:7])
        ly, lm = int(last[:4]), int(last[5:7])
    except (ValueError, IndexError):
        raise DataError(f"bad month range {first!r}..{last!r}")
    if (fy, fm) > (ly, lm):
        raise DataError(f"month range is reversed: {first!r}..{last!r}")
    months = []
    y, m = fy, fm
    while (y, m) <= (ly, lm):
        months.append(f"{y:04d}-{m:02d}")
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return months


def select_monthly(captures: list[Capture], month: str) -> Capture | None:
    """Representative capture for a month: nearest its midpoint, inside it.

    The midpoint is the 15th at 00:00 UTC; distance ties go to the earlier
    capture. Months with no capture at all yield None and are excluded
    downstream.
    """
    year, mon = int(month[:4]), int(month[5:7])
    inside = [
        c for c in captures
        if c.timestamp.year == year and c.timestamp.month == mon
    ]
    if not inside:
        return None
    midpoint = datetime(year, mon, 15, tzinfo=timezone.utc)
    return min(inside, key=lambda c: (abs(c.timestamp - midpoint), c.timestamp))


class RateLimiter:
    """Serializes callers onto a fixed request rate. Thread-safe.

    ``rate`` is requests/second; None or 0 disables limiting. The clock and
    sleep functions are injectable so tests can drive a fake timeline.
    """

    def __init__(self, rate: float | None, clock=time.monotonic, sleep=time.sleep):
        self._interval = 1.0 / rate if rate else 0.0
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_ok = None

    def acquire(self) -> None:
        if self._interval <= 0:
            return
        with self._lock:
            now = self._clock()
            if self._next_ok is None or now >= self._next_ok:
                self._next_ok = now + self._interval
                return
            wait = self._next_ok - now
            self._next_ok += self._interval
        self._sleep(wait)


class SnapshotCache:
    """On-disk capture cache: one body file per key plus a JSONL index.

    Layout: ``<root>/<domain>/<resource>/<YYYY-MM>`` for bodies and
    ``<root>/index.jsonl`` recording every key's outcome. Readers may share
    the cache; writes take a per-key lock.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._index_path = self.root / "index.jsonl"
        self._entries: dict[tuple[str, str, str], CacheEntry] = {}
        self._write_lock = threading.Lock()
        self._key_locks: dict[tuple[str, str, str], threading.Lock] = {}
        if self._index_path.exists():
            for line in self._index_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                entry = CacheEntry(**rec)
                self._entries[(entry.domain, entry.resource, entry.month)] = entry

    def key_lock(self, key: tuple[str, str, str]) -> threading.Lock:
        with self._write_lock:
            return self._key_locks.setdefault(key, threading.Lock())

    def get(self, domain: str, resource: str, month: str) -> CacheEntry | None:
        return self._entries.get((domain, resource, month))

    def body_path(self, domain: str, resource: str, month: str) -> Path:
        return self.root / domain / resource / month

    def read_body(self, entry: CacheEntry) -> bytes:
        return self.body_path(entry.domain, entry.resource, entry.month).read_bytes()

    def put(self, entry: CacheEntry, body: bytes | None = None) -> None:
        key = (entry.domain, entry.resource, entry.month)
        with self._write_lock:
            if key in self._entries:
                return  # first write wins; fetches are idempotent
            if body is not None:
                path = self.body_path(*key)
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(body)
            with self._index_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry.__dict__, sort_keys=True) + "\n")
            self._entries[key] = entry

    def entries(self) -> list[CacheEntry]:
        return sorted(
            self._entries.values(), key=lambda e: (e.domain, e.resource, e.month)
        )


def resolve_cache_dir(configured: str | None) -> Path:
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    if configured:
        return Path(configured)
    return Path("cache")


class WaybackClient:
    """CDX queries and archived-body replay with politeness built in."""

    def __init__(
        self,
        cache: SnapshotCache,
        api_base: str = DEFAULT_API_BASE,
        replay_base: str = DEFAULT_REPLAY_BASE,
        rate_limit: float | None = 1.0,
        max_retries: int = 5,
        backoff_base: float = 0.5,
        max_body: int = DEFAULT_MAX_BODY,
        parallelism: int = 4,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
        jitter_seed: int | None = None,
    ):
        self.cache = cache
        self.api_base = api_base.rstrip("/")
        self.replay_base = replay_base.rstrip("/")
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.max_body = max_body
        self.parallelism = parallelism
        self.limiter = RateLimiter(rate_limit, sleep=sleep)
        self._sleep = sleep
        self._rng = random.Random(jitter_seed)
        self._client = httpx.Client(transport=transport, timeout=30.0, follow_redirects=False)
        self.requests_made = 0
        self._counter_lock = threading.Lock()

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- transport ---------------------------------------------------------

    def _get(self, url: str, params: dict | None = None) -> httpx.Response:
        last_status = None
        for attempt in range(1, self.max_retries + 1):
            self.limiter.acquire()
            with self._counter_lock:
                self.requests_made += 1
            try:
                resp = self._client.get(url, params=params)
            except httpx.HTTPError as exc:
                last_status = f"transport error: {exc}"
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_status = f"HTTP {resp.status_code}"
                else:
                    return resp
            if attempt < self.max_retries:
                delay = self.backoff_base * (2 ** (attempt - 1))
                delay *= 1.0 + 0.25 * self._rng.random()
                self._sleep(delay)
        raise NetworkExhausted(
            f"GET {url} failed after {self.max_retries} attempts ({last_status})",
            attempts=self.max_retries,
        )

    # -- CDX ----------------------------------------------------------------

    def list_captures(
        self, domain: str, resource: Resource, first_month: str, last_month: str
    ) -> list[Capture]:
        """Capture metadata for a domain resource over a month span.

        Keeps 200s and 3xx (the latter flagged), sorts ascending, and
        collapses adjacent captures with identical digests.
        """
        params = {
            "url": f"{domain}{resource.url_path}",
            "from": first_month.replace("-", ""),
            "to": last_month.replace("-", ""),
            "output": "json",
            "filter": "statuscode:200|3..",
        }
        resp = self._get(f"{self.api_base}/cdx/search/cdx", params=params)
        if resp.status_code != 200:
            raise ProtocolError(
                f"CDX query for {domain} returned HTTP {resp.status_code}", resp.text[:500]
            )
        text = resp.text.strip()
        if not text:
            return []
        try:
            rows = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"CDX response is not JSON: {exc}", text[:500])
        if not isinstance(rows, list) or (rows and not isinstance(rows[0], list)):
            raise ProtocolError("CDX response is not a JSON array of rows", text[:500])
        if not rows:
            return []
        header = rows[0]
        try:
            i_ts = header.index("timestamp")
            i_url = header.index("original")
            i_status = header.index("statuscode")
            i_digest = header.index("digest")
        except ValueError as exc:
            raise ProtocolError(f"CDX header missing column: {exc}", text[:500])

        captures = []
        for row in rows[1:]:
            try:
                status = int(row[i_status])
            except (ValueError, IndexError):
                continue  # revisit rows carry "-" statuses
            if status != 200 and not 300 <= status < 400:
                continue
            try:
                ts = datetime.strptime(row[i_ts], TS_FORMAT).replace(tzinfo=timezone.utc)
            except ValueError:
                log.warning("skipping capture with bad timestamp %r", row[i_ts])
                continue
            captures.append(
                Capture(ts, row[i_url], status, row[i_digest], redirect=status >= 300)
            )
        captures.sort(key=lambda c: c.timestamp)
        deduped: list[Capture] = []
        for c in captures:
            if deduped and deduped[-1].digest == c.digest:
                continue
            deduped.append(c)
        return deduped

    # -- bodies --------------------------------------------------------------

    def fetch_body(self, capture: Capture) -> bytes:
        """Replay one archived body. Oversized bodies are truncated."""
        url = f"{self.replay_base}/web/{capture.timestamp14}id_/{capture.original_url}"
        resp = self._get(url)
        body = resp.content
        if len(body) > self.max_body:
            log.warning(
                "truncating %s body from %d to %d bytes", capture.original_url,
                len(body), self.max_body,
            )
            body = body[: self.max_body]
        return body

    def fetch_live(self, domain: str, resource: Resource = ROBOTS) -> bytes:
        """Bypass the archive and fetch the current resource over HTTPS."""
        resp = self._get(f"https://{domain}{resource.url_path}")
        return resp.content

    # -- grid ------------------------------------------------------------------

    def fetch_month(
        self, domain: str, resource: Resource, month: str, captures: list[Capture]
    ) -> CacheEntry:
        """Ensure the cache holds exactly one entry for this key."""
        key = (domain, resource.label(), month)
        with self.cache.key_lock(key):
            cached = self.cache.get(*key)
            if cached is not None:
                return cached
            capture = select_monthly(captures, month)
            now = datetime.now(timezone.utc).isoformat()
            if capture is None:
                entry = CacheEntry(domain, resource.label(), month, "no_capture", now)
                self.cache.put(entry)
                return entry
            try:
                body = self.fetch_body(capture)
            except NetworkExhausted:
                entry = CacheEntry(
                    domain, resource.label(), month, "fetch_error", now,
                    timestamp14=capture.timestamp14,
                    original_url=capture.original_url,
                    status_code=capture.status_code,
                    digest=capture.digest,
                )
                self.cache.put(entry)
                return entry
            entry = CacheEntry(
                domain, resource.label(), month, "hit", now,
                timestamp14=capture.timestamp14,
                original_url=capture.original_url,
                status_code=capture.status_code,
                digest=capture.digest,
            )
            self.cache.put(entry, body)
            return entry

    def fetch_grid(
        self, domains: list[str], resources: list[Resource], months: list[str]
    ) -> dict[str, int]:
        """Populate the cache for every (domain, resource, month) key.

        Returns outcome counts. Fully cached domain/resource pairs are
        skipped without any network traffic.
        """
        if not months:
            raise DataError("empty month range")
        tally = {"hit": 0, "no_capture": 0, "fetch_error": 0}
        tally_lock = threading.Lock()

        def run_one(domain: str, resource: Resource) -> None:
            pending = [
                m for m in months
                if self.cache.get(domain, resource.label(), m) is None
            ]
            cached = [m for m in months if m not in pending]
            outcomes = [self.cache.get(domain, resource.label(), m).outcome for m in cached]
            if pending:
                try:
                    captures = self.list_captures(domain, resource, months[0], months[-1])
                except NetworkExhausted:
                    captures = None
                for m in pending:
                    if captures is None:
                        now = datetime.now(timezone.utc).isoformat()
                        entry = CacheEntry(domain, resource.label(), m, "fetch_error", now)
                        with self.cache.key_lock((domain, resource.label(), m)):
                            if self.cache.get(domain, resource.label(), m) is None:
                                self.cache.put(entry)
                        outcomes.append(self.cache.get(domain, resource.label(), m).outcome)
                    else:
                        outcomes.append(self.fetch_month(domain, resource, m, captures).outcome)
            with tally_lock:
                for o in outcomes:
                    tally[o] += 1

        jobs = [(d, r) for d in domains for r in resources]
        if self.parallelism > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
                futures = [pool.submit(run_one, d, r) for d, r in jobs]
                for f in futures:
                    f.result()
        else:
            for d, r in jobs:
                run_one(d, r)
        return tally
