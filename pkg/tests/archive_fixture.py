"""A tiny in-process web archive for end-to-end pipeline tests.

Serves the two endpoints the wayback client speaks: the CDX capture index
and timestamped body replay. Capture data is synthetic: four domains over
2023 whose robots.txt and terms pages evolve month by month.

Token weights are 600/300/200/100 (news/blog/forum/shop, total 1200), so the
restricted-token series steps 0.0 -> 0.5 when news.example blocks GPTBot in
2023-06 and -> 2/3 when forum.example blocks CCBot in 2023-10.
"""

from __future__ import annotations

import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

CDX_HEADER = ["urlkey", "timestamp", "original", "mimetype", "statuscode", "digest", "length"]

MONTHS = [f"2023-{m:02d}" for m in range(1, 13)]

OPEN_ROBOTS = "User-agent: *\nDisallow:\n"
ARCHIVE_DIR_ROBOTS = "User-agent: *\nDisallow: /archive/\n"
GPTBOT_BLOCK = "User-agent: GPTBot\nDisallow: /\n\nUser-agent: *\nDisallow: /archive/\n"
CCBOT_BLOCK = "User-agent: CCBot\nDisallow: /\n\nUser-agent: *\nDisallow:\n"
SEARCH_ROBOTS = "User-agent: *\nDisallow: /cart\nDisallow: /*?*\n"

PLAIN_TERMS = "<html><body><p>Welcome. Content provided for your enjoyment.</p></body></html>"
ANTI_CRAWL_TERMS = (
    "<html><body><p>You may not crawl, scrape, or use automated means to "
    "access this site.</p></body></html>"
)
NONCOMMERCIAL_TERMS = (
    "<html><body><p>Content is for personal, noncommercial use only.</p></body></html>"
)
NOREDIST_TERMS = (
    "<html><body><p>You shall not resell or redistribute any content.</p></body></html>"
)

TOKEN_ROWS = [
    ["blog.example", "c4", 300],
    ["forum.example", "c4", 200],
    ["news.example", "c4", 600],
    ["shop.example", "c4", 100],
]


def _robots_body(domain: str, month: str) -> str | None:
    idx = MONTHS.index(month) + 1
    if domain == "news.example":
        base = GPTBOT_BLOCK if idx >= 6 else ARCHIVE_DIR_ROBOTS
    elif domain == "forum.example":
        base = CCBOT_BLOCK if idx >= 10 else OPEN_ROBOTS
    elif domain == "blog.example":
        base = OPEN_ROBOTS
    elif domain == "shop.example":
        if idx <= 3:
            return None  # not archived those months
        base = SEARCH_ROBOTS
    else:
        return None
    return base + f"# rev {month}\n"


def _terms_body(domain: str, month: str) -> str | None:
    idx = MONTHS.index(month) + 1
    if domain == "news.example":
        base = ANTI_CRAWL_TERMS if idx >= 9 else PLAIN_TERMS
    elif domain == "blog.example":
        base = NONCOMMERCIAL_TERMS
    elif domain == "shop.example":
        base = NOREDIST_TERMS
    else:
        return None  # forum.example has no archived terms
    return base + f"<!-- rev {month} -->"


def build_store() -> dict[str, list[tuple[str, bytes]]]:
    """url -> ascending [(timestamp14, body)] with one capture mid-month."""
    store: dict[str, list[tuple[str, bytes]]] = {}
    domains = ["news.example", "blog.example", "forum.example", "shop.example"]
    for domain in domains:
        for resource, maker in (("/robots.txt", _robots_body), ("/terms", _terms_body)):
            url = f"{domain}{resource}"
            captures = []
            for month in MONTHS:
                body = maker(domain, month)
                if body is None:
                    continue
                ts14 = f"{month.replace('-', '')}15120000"
                captures.append((ts14, body.encode("utf-8")))
            if captures:
                store[url] = captures
    return store


class _Handler(BaseHTTPRequestHandler):
    store: dict[str, list[tuple[str, bytes]]] = {}

    def log_message(self, *args):
        pass

    def _send(self, code: int, body: bytes, content_type: str = "text/plain"):
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        parsed = urlparse(self.path)
        if parsed.path == "/cdx/search/cdx":
            params = parse_qs(parsed.query)
            url = params.get("url", [""])[0]
            frm = params.get("from", ["000000"])[0]
            to = params.get("to", ["999999"])[0]
            rows = [CDX_HEADER]
            for ts14, body in self.store.get(url, []):
                if frm <= ts14[:6] <= to:
                    digest = hashlib.sha1(body).hexdigest()[:16]
                    rows.append([
                        url, ts14, f"http://{url}", "text/plain", "200",
                        digest, str(len(body)),
                    ])
            if len(rows) == 1:
                self._send(200, b"[]", "application/json")
            else:
                self._send(200, json.dumps(rows).encode(), "application/json")
            return
        if parsed.path.startswith("/web/"):
            rest = parsed.path[len("/web/"):]
            ts14, sep, original = rest.partition("id_/")
            if sep and original.startswith("http://"):
                url = original[len("http://"):]
                for cap_ts, body in self.store.get(url, []):
                    if cap_ts == ts14:
                        self._send(200, body)
                        return
            self._send(404, b"no capture")
            return
        self._send(404, b"unknown endpoint")


class ArchiveFixture:
    def __init__(self):
        handler = type("Handler", (_Handler,), {"store": build_store()})
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def base_url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


def write_inputs(directory, base_url: str, forecast_grid: str = "0,1,1;1,1,0") -> str:
    """Drop domains.txt, tokens.csv, and audit.cfg into ``directory``."""
    from consent_audit.fileio import write_csv

    (directory / "domains.txt").write_text(
        "news.example\nblog.example\nforum.example\nshop.example\n"
    )
    write_csv(directory / "tokens.csv", "token-table",
              ["domain", "corpus", "tokens"], TOKEN_ROWS)
    config = "\n".join([
        "schema_version = 1",
        "domain_list = domains.txt",
        "token_table = tokens.csv",
        "months = 2023-01..2023-12",
        "cache_dir = cache",
        "output_dir = out",
        f"api_base = {base_url}",
        f"replay_base = {base_url}",
        "rate_limit = 0",
        "backoff_base = 0.001",
        "parallelism = 2",
        "seed = 42",
        "tos_path = /terms",
        f"forecast_grid = {forecast_grid}",
        "horizon = 12",
    ]) + "\n"
    (directory / "audit.cfg").write_text(config)
    return config
