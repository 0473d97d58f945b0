import json
from datetime import datetime, timedelta, timezone
from urllib.error import HTTPError
from urllib.parse import urlencode
from urllib.request import Request, urlopen

import pytest

from soilchar.errors import AuthorizationError, NotFoundError, ValidationError
from soilchar.telemetry import ChannelStore, feed_to_csv, make_server, parse_feed_csv

FIELDS = {"field1": "moisture_pct", "field2": "ph", "field3": "temperature_c"}


class Clock:
    def __init__(self):
        self.now = datetime(2024, 3, 1, 8, 0, tzinfo=timezone.utc)

    def __call__(self):
        self.now += timedelta(seconds=15)
        return self.now


@pytest.fixture
def store(tmp_path):
    return ChannelStore(tmp_path / "data", clock=Clock())


def test_create_channels(store):
    a = store.create_channel("plot-a", FIELDS)
    b = store.create_channel("plot-b", {"field1": "x"})
    assert (a.id, b.id) == (1, 2)
    keys = {a.write_key, a.read_key, b.write_key, b.read_key}
    assert len(keys) == 4


@pytest.mark.parametrize("fields", [{}, {f"field{i}": "x" for i in range(1, 10)}, {"field9": "x"}, {"temp": "x"}])
def test_bad_field_maps(store, fields):
    with pytest.raises(ValidationError):
        store.create_channel("bad", fields)


def test_ingest_and_read(store):
    ch = store.create_channel("plot", FIELDS)
    assert store.ingest(ch.write_key, {"field1": 32.5}) == 1
    assert store.ingest(ch.write_key, {"field1": "33", "field2": "4.2"}) == 2
    feed = store.read_feed(ch.id, ch.read_key)
    assert [e.values for e in feed] == [{"field1": 32.5}, {"field1": 33.0, "field2": 4.2}]
    assert feed[0].created_at < feed[1].created_at


@pytest.mark.parametrize("slots", [{}, {"field4": 1}, {"field1": "wet"}, {"field1": "nan"}])
def test_ingest_validation(store, slots):
    ch = store.create_channel("plot", FIELDS)
    with pytest.raises(ValidationError):
        store.ingest(ch.write_key, slots)
    assert store.read_feed(ch.id, ch.read_key) == []


def test_wrong_keys(store):
    ch = store.create_channel("plot", FIELDS)
    with pytest.raises(AuthorizationError):
        store.ingest(ch.read_key, {"field1": 1})
    with pytest.raises(AuthorizationError):
        store.read_feed(ch.id, ch.write_key)
    with pytest.raises(NotFoundError):
        store.read_feed(99, ch.read_key)


def test_read_last_n(store):
    ch = store.create_channel("plot", FIELDS)
    for i in range(5):
        store.ingest(ch.write_key, {"field1": i})
    ids = lambda n: [e.entry_id for e in store.read_feed(ch.id, ch.read_key, n)]
    assert ids(3) == [3, 4, 5]
    assert ids(0) == []
    assert ids(50) == [1, 2, 3, 4, 5]
    with pytest.raises(ValidationError):
        store.read_feed(ch.id, ch.read_key, -1)


def test_channels_are_isolated(store):
    a = store.create_channel("a", FIELDS)
    b = store.create_channel("b", FIELDS)
    store.ingest(a.write_key, {"field1": 1})
    assert store.ingest(b.write_key, {"field1": 2}) == 1
    with pytest.raises(AuthorizationError):
        store.read_feed(b.id, a.read_key)
    assert [e.values["field1"] for e in store.read_feed(a.id, a.read_key)] == [1.0]


def test_survives_restart(tmp_path):
    first = ChannelStore(tmp_path)
    ch = first.create_channel("plot", FIELDS)
    first.ingest(ch.write_key, {"field1": 10})
    first.ingest(ch.write_key, {"field2": 5.5})
    second = ChannelStore(tmp_path)
    feed = second.read_feed(ch.id, ch.read_key)
    assert [e.entry_id for e in feed] == [1, 2]
    assert second.ingest(ch.write_key, {"field3": 22}) == 3
    assert second.create_channel("next", FIELDS).id == 2


def test_torn_trailing_line_is_ignored(tmp_path):
    first = ChannelStore(tmp_path)
    ch = first.create_channel("plot", FIELDS)
    first.ingest(ch.write_key, {"field1": 10})
    with open(tmp_path / f"channel-{ch.id}.jsonl", "a") as fh:
        fh.write('{"entry_id": 2, "created_')
    feed = ChannelStore(tmp_path).read_feed(ch.id, ch.read_key)
    assert [e.entry_id for e in feed] == [1]


def test_corrupt_middle_line_is_an_error(tmp_path):
    first = ChannelStore(tmp_path)
    ch = first.create_channel("plot", FIELDS)
    path = tmp_path / f"channel-{ch.id}.jsonl"
    first.ingest(ch.write_key, {"field1": 10})
    path.write_text("garbage\n" + path.read_text())
    with pytest.raises(ValidationError):
        ChannelStore(tmp_path)


def test_public_channel(store):
    ch = store.create_channel("open", FIELDS, public=True)
    store.ingest(ch.write_key, {"field1": 1})
    assert len(store.read_feed(ch.id, None)) == 1


def test_csv_export(store):
    ch = store.create_channel("plot", FIELDS)
    assert store.export_feed_csv(ch.id, ch.read_key) == "entry_id,created_at,moisture_pct,ph,temperature_c\n"
    store.ingest(ch.write_key, {"field1": 30.1, "field3": 22.0})
    store.ingest(ch.write_key, {"field1": 29.8, "field2": 4.4, "field3": 22.5})
    text = store.export_feed_csv(ch.id, ch.read_key)
    assert len(text.splitlines()) == 3
    rows = parse_feed_csv(text)
    assert rows[0]["ph"] is None and rows[1]["ph"] == 4.4
    assert rows[1]["entry_id"] == 2
    feed = store.read_feed(ch.id, ch.read_key)
    assert feed_to_csv(ch, feed) == text


# -- HTTP --------------------------------------------------------------------


@pytest.fixture
def server(tmp_path):
    srv = make_server(tmp_path / "http", port=0, admin_key="ADMIN")
    srv.start_background()
    yield srv
    srv.shutdown()
    srv.server_close()


def get(url):
    try:
        with urlopen(url, timeout=5) as resp:
            return resp.status, resp.read().decode()
    except HTTPError as exc:
        return exc.code, exc.read().decode()


def post(url, params):
    req = Request(url, data=urlencode(params).encode(), method="POST")
    try:
        with urlopen(req, timeout=5) as resp:
            return resp.status, resp.read().decode()
    except HTTPError as exc:
        return exc.code, exc.read().decode()


def test_http_update_and_feeds(server):
    ch = server.store.create_channel("plot", FIELDS)
    status, body = get(f"{server.url}/update?api_key={ch.write_key}&field1=31.5&field2=4.3")
    assert (status, body) == (200, "1")
    assert post(f"{server.url}/update", {"api_key": ch.write_key, "field3": "21.9"}) == (200, "2")
    status, body = get(f"{server.url}/channels/{ch.id}/feeds.json?api_key={ch.read_key}&results=1")
    doc = json.loads(body)
    assert status == 200
    assert doc["channel"]["field1"] == "moisture_pct" and doc["channel"]["last_entry_id"] == 2
    assert [f["entry_id"] for f in doc["feeds"]] == [2]
    assert doc["feeds"][0]["field3"] == 21.9
    status, body = get(f"{server.url}/channels/{ch.id}/feeds.csv?api_key={ch.read_key}")
    assert status == 200 and body.startswith("entry_id,created_at,moisture_pct")


def test_http_rejections(server):
    ch = server.store.create_channel("plot", FIELDS)
    assert get(f"{server.url}/update?api_key=WRONG&field1=1") == (401, "0")
    assert get(f"{server.url}/update?api_key={ch.write_key}&field7=1") == (400, "0")
    assert get(f"{server.url}/channels/{ch.id}/feeds.json?api_key=WRONG")[0] == 401
    assert get(f"{server.url}/channels/42/feeds.json")[0] == 404
    assert get(f"{server.url}/channels/{ch.id}/feeds.json?api_key={ch.read_key}&results=x")[0] == 400
    assert get(f"{server.url}/nowhere")[0] == 404


def test_http_header_key(server):
    ch = server.store.create_channel("plot", FIELDS)
    req = Request(f"{server.url}/update?field1=3", headers={"X-THINGSPEAKAPIKEY": ch.write_key})
    with urlopen(req, timeout=5) as resp:
        assert resp.read().decode() == "1"


def test_http_channel_creation(server):
    assert post(f"{server.url}/channels.json", {"api_key": "nope", "field1": "x"})[0] == 401
    status, body = post(f"{server.url}/channels.json", {"api_key": "ADMIN", "name": "p", "field1": "ph", "public": "true"})
    doc = json.loads(body)
    assert status == 200 and doc["public"] is True and doc["field_map"] == {"field1": "ph"}
    assert post(f"{server.url}/channels.json", {"api_key": "ADMIN", "name": "p"})[0] == 400
