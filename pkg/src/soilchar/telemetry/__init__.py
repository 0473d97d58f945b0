from .server import TelemetryServer, make_server
from .store import Channel, ChannelStore, FeedEntry, feed_to_csv, parse_feed_csv

__all__ = [
    "Channel",
    "ChannelStore",
    "FeedEntry",
    "TelemetryServer",
    "feed_to_csv",
    "make_server",
    "parse_feed_csv",
]
