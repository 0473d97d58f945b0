"""HTTP front end for ChannelStore, following the ThingSpeak URL conventions.

    GET|POST /update?api_key=<write_key>&field1=<v>...   -> entry id as text, "0" on failure
    GET /channels/<id>/feeds.json?api_key=<read_key>&results=<n>
    GET /channels/<id>/feeds.csv?api_key=<read_key>
    POST /channels.json?api_key=<admin_key>&name=..&field1=<label>..&public=true
         (only when the server was started with an admin key)
"""

from __future__ import annotations

import json
import logging
import re
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from ..errors import AuthorizationError, NotFoundError, ValidationError
from .store import ChannelStore, format_timestamp

log = logging.getLogger(__name__)

FEED_RE = re.compile(r"^/channels/(\d+)/feeds\.(json|csv)$")


def _first(params: dict[str, list[str]]) -> dict[str, str]:
    return {k: v[0] for k, v in params.items() if v}


class TelemetryHandler(BaseHTTPRequestHandler):
    server: "TelemetryServer"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _params(self) -> dict[str, str]:
        query = parse_qs(urlsplit(self.path).query, keep_blank_values=True)
        if self.command == "POST":
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length).decode("utf-8") if length else ""
            for k, v in parse_qs(body, keep_blank_values=True).items():
                query.setdefault(k, []).extend(v)
        return _first(query)

    def _send(self, status: int, body: str, content_type: str = "text/plain; charset=utf-8"):
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _send_json(self, status: int, doc):
        self._send(status, json.dumps(doc), "application/json")

    def do_GET(self):
        self._route()

    def do_POST(self):
        self._route()

    def _route(self):
        path = urlsplit(self.path).path
        try:
            params = self._params()
            if path == "/update":
                self._update(params)
            elif path == "/channels.json" and self.command == "POST":
                self._create(params)
            elif (m := FEED_RE.match(path)) and self.command == "GET":
                self._feed(int(m.group(1)), m.group(2), params)
            else:
                self._send(HTTPStatus.NOT_FOUND, "not found\n")
        except Exception:  # keep the server alive; the client gets a 500
            log.exception("request failed: %s %s", self.command, self.path)
            self._send(HTTPStatus.INTERNAL_SERVER_ERROR, "0")

    def _update(self, params):
        key = params.pop("api_key", None) or self.headers.get("X-THINGSPEAKAPIKEY")
        slots = {k: v for k, v in params.items() if k.startswith("field")}
        try:
            entry_id = self.server.store.ingest(key, slots)
        except AuthorizationError:
            self._send(HTTPStatus.UNAUTHORIZED, "0")
            return
        except ValidationError as exc:
            log.info("rejected update: %s", exc)
            self._send(HTTPStatus.BAD_REQUEST, "0")
            return
        self._send(HTTPStatus.OK, str(entry_id))

    def _create(self, params):
        admin = self.server.admin_key
        if admin is None or params.get("api_key") != admin:
            self._send_json(HTTPStatus.UNAUTHORIZED, {"status": "401", "error": "admin key required"})
            return
        field_map = {k: v for k, v in params.items() if k.startswith("field")}
        public = params.get("public", "false").lower() in ("1", "true", "yes")
        try:
            channel = self.server.store.create_channel(params.get("name", ""), field_map, public)
        except ValidationError as exc:
            self._send_json(HTTPStatus.BAD_REQUEST, {"status": "400", "error": str(exc)})
            return
        self._send_json(HTTPStatus.OK, channel.to_dict())

    def _feed(self, channel_id: int, fmt: str, params):
        store = self.server.store
        results = params.get("results")
        try:
            last_n = int(results) if results is not None else None
            if fmt == "csv":
                self._send(HTTPStatus.OK, store.export_feed_csv(channel_id, params.get("api_key")), "text/csv")
                return
            entries = store.read_feed(channel_id, params.get("api_key"), last_n)
        except AuthorizationError:
            self._send_json(HTTPStatus.UNAUTHORIZED, {"status": "401", "error": "read key rejected"})
            return
        except NotFoundError:
            self._send_json(HTTPStatus.NOT_FOUND, {"status": "404", "error": "no such channel"})
            return
        except (ValidationError, ValueError) as exc:
            self._send_json(HTTPStatus.BAD_REQUEST, {"status": "400", "error": str(exc)})
            return
        channel = store.get_channel(channel_id)
        header = {"id": channel.id, "name": channel.name, "last_entry_id": entries[-1].entry_id if entries else None}
        header.update(channel.field_map)
        feeds = []
        for e in entries:
            rec = {"created_at": format_timestamp(e.created_at), "entry_id": e.entry_id}
            rec.update(e.values)
            feeds.append(rec)
        self._send_json(HTTPStatus.OK, {"channel": header, "feeds": feeds})


class TelemetryServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, store: ChannelStore, admin_key: str | None = None):
        self.store = store
        self.admin_key = admin_key
        super().__init__(address, TelemetryHandler)

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, name="telemetry-http", daemon=True)
        thread.start()
        return thread


def make_server(data_dir, host: str = "127.0.0.1", port: int = 8080, admin_key: str | None = None) -> TelemetryServer:
    return TelemetryServer((host, port), ChannelStore(data_dir), admin_key=admin_key)
