"""Keyed telemetry channels with append-only, line-delimited feeds.

On-disk layout under ``data_dir``::

    manifest.json        channel definitions and keys (atomically replaced)
    channel-<id>.jsonl   one {"entry_id", "created_at", "values"} record per line

An entry is fsync'ed before ``ingest`` returns, so an acknowledged write
survives a restart. Writes to one channel are serialized by a per-channel
lock; readers take a snapshot of the in-memory feed under the same lock and
therefore always see a consistent prefix.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import re
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping

from .._io import atomic_write
from ..errors import AuthorizationError, NotFoundError, ValidationError

log = logging.getLogger(__name__)

MAX_SLOTS = 8
SLOT_RE = re.compile(r"^field([1-8])$")
MANIFEST = "manifest.json"


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


@dataclass(frozen=True)
class Channel:
    id: int
    name: str
    write_key: str
    read_key: str
    field_map: dict[str, str]
    public: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "write_key": self.write_key,
            "read_key": self.read_key,
            "field_map": dict(self.field_map),
            "public": self.public,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Channel":
        return cls(
            id=int(doc["id"]),
            name=str(doc["name"]),
            write_key=str(doc["write_key"]),
            read_key=str(doc["read_key"]),
            field_map=dict(doc["field_map"]),
            public=bool(doc.get("public", False)),
        )

    def ordered_slots(self) -> list[str]:
        return sorted(self.field_map, key=lambda s: int(SLOT_RE.match(s).group(1)))


@dataclass(frozen=True)
class FeedEntry:
    entry_id: int
    created_at: datetime
    values: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "created_at": format_timestamp(self.created_at),
            "values": dict(self.values),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeedEntry":
        return cls(
            entry_id=int(doc["entry_id"]),
            created_at=parse_timestamp(doc["created_at"]),
            values={k: float(v) for k, v in doc["values"].items()},
        )


@dataclass
class _ChannelState:
    channel: Channel
    path: Path
    entries: list[FeedEntry] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


def validate_field_map(field_map: Mapping[str, str]) -> dict[str, str]:
    if not field_map:
        raise ValidationError("a channel needs at least one field")
    if len(field_map) > MAX_SLOTS:
        raise ValidationError(f"a channel has at most {MAX_SLOTS} fields, got {len(field_map)}")
    for slot in field_map:
        if not SLOT_RE.match(slot):
            raise ValidationError(f"invalid slot name {slot!r}; expected field1..field8")
    return {str(k): str(v) for k, v in field_map.items()}


class ChannelStore:
    def __init__(self, data_dir, clock: Callable[[], datetime] = _utcnow):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self._lock = threading.Lock()
        self._channels: dict[int, _ChannelState] = {}
        self._write_keys: dict[str, int] = {}
        self._read_keys: dict[str, int] = {}
        self._load()

    # -- persistence -------------------------------------------------------

    def _channel_path(self, channel_id: int) -> Path:
        return self.data_dir / f"channel-{channel_id}.jsonl"

    def _load(self) -> None:
        manifest = self.data_dir / MANIFEST
        if not manifest.exists():
            return
        doc = json.loads(manifest.read_text(encoding="utf-8"))
        for rec in doc.get("channels", []):
            self._register(Channel.from_dict(rec))
        for state in self._channels.values():
            state.entries = self._replay(state.path)

    def _replay(self, path: Path) -> list[FeedEntry]:
        if not path.exists():
            return []
        entries = []
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                entries.append(FeedEntry.from_dict(json.loads(line)))
            except (ValueError, KeyError) as exc:
                # a torn final line is what an interrupted append leaves behind
                if lineno >= len(lines) - 1:
                    log.warning("%s: ignoring incomplete trailing record", path)
                    break
                raise ValidationError(f"{path}:{lineno}: corrupt feed record ({exc})") from exc
        return entries

    def _write_manifest(self) -> None:
        doc = {"channels": [s.channel.to_dict() for s in self._channels.values()]}
        atomic_write(self.data_dir / MANIFEST, json.dumps(doc, indent=2) + "\n")

    def _register(self, channel: Channel) -> None:
        self._channels[channel.id] = _ChannelState(channel, self._channel_path(channel.id))
        self._write_keys[channel.write_key] = channel.id
        self._read_keys[channel.read_key] = channel.id

    # -- operations --------------------------------------------------------

    def _fresh_key(self) -> str:
        while True:
            key = secrets.token_hex(8).upper()
            if key not in self._write_keys and key not in self._read_keys:
                return key

    def create_channel(self, name: str, field_map: Mapping[str, str], public: bool = False) -> Channel:
        fields = validate_field_map(field_map)
        with self._lock:
            channel_id = max(self._channels, default=0) + 1
            write_key = self._fresh_key()
            read_key = self._fresh_key()
            while read_key == write_key:
                read_key = self._fresh_key()
            channel = Channel(channel_id, name, write_key, read_key, fields, public)
            self._register(channel)
            self._channel_path(channel_id).touch()
            self._write_manifest()
        return channel

    def channels(self) -> list[Channel]:
        with self._lock:
            return [s.channel for s in self._channels.values()]

    def _state(self, channel_id: int) -> _ChannelState:
        state = self._channels.get(int(channel_id))
        if state is None:
            raise NotFoundError(f"no channel {channel_id}")
        return state

    def get_channel(self, channel_id: int) -> Channel:
        return self._state(channel_id).channel

    def ingest(self, write_key: str, slot_values: Mapping[str, object]) -> int:
        channel_id = self._write_keys.get(write_key)
        if channel_id is None:
            raise AuthorizationError("unknown write key")
        state = self._channels[channel_id]
        if not slot_values:
            raise ValidationError("an update must set at least one field")
        values = {}
        for slot, raw in slot_values.items():
            if slot not in state.channel.field_map:
                raise ValidationError(f"channel {channel_id} has no slot {slot!r}")
            try:
                value = float(raw)
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{slot}: {raw!r} is not a number") from exc
            if not math.isfinite(value):
                raise ValidationError(f"{slot}: value must be finite")
            values[slot] = value

        with state.lock:
            entry_id = state.entries[-1].entry_id + 1 if state.entries else 1
            entry = FeedEntry(entry_id, self.clock(), values)
            line = json.dumps(entry.to_dict(), separators=(",", ":")) + "\n"
            with open(state.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            state.entries.append(entry)
        return entry_id

    def _authorize_read(self, state: _ChannelState, read_key: str | None) -> None:
        if state.channel.public:
            return
        if read_key != state.channel.read_key:
            raise AuthorizationError(f"read key rejected for channel {state.channel.id}")

    def read_feed(self, channel_id: int, read_key: str | None, last_n: int | None = None) -> list[FeedEntry]:
        """The most recent ``last_n`` entries (all when ``None``), oldest first."""
        state = self._state(channel_id)
        self._authorize_read(state, read_key)
        with state.lock:
            entries = list(state.entries)
        if last_n is None:
            return entries
        if last_n < 0:
            raise ValidationError("last_n must be >= 0")
        return entries[len(entries) - min(last_n, len(entries)):]

    def export_feed_csv(self, channel_id: int, read_key: str | None) -> str:
        entries = self.read_feed(channel_id, read_key)
        return feed_to_csv(self.get_channel(channel_id), entries)


def feed_to_csv(channel: Channel, entries: list[FeedEntry]) -> str:
    slots = channel.ordered_slots()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["entry_id", "created_at"] + [channel.field_map[s] for s in slots])
    for e in entries:
        writer.writerow(
            [e.entry_id, format_timestamp(e.created_at)]
            + [repr(e.values[s]) if s in e.values else "" for s in slots]
        )
    return buf.getvalue()


def parse_feed_csv(text: str) -> list[dict]:
    """Rows of an exported feed as dicts keyed by column label; empty cells become ``None``."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        row: dict = {"entry_id": int(rec.pop("entry_id")), "created_at": parse_timestamp(rec.pop("created_at"))}
        for label, cell in rec.items():
            row[label] = float(cell) if cell not in (None, "") else None
        rows.append(row)
    return rows
