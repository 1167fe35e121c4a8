"""Simulated publish/subscribe mesh with brokers, loss, and failover.

A single-threaded discrete-event engine owns the simulated clock. Clients
publish to slash-delimited topics through their current broker; the broker
fans out to every subscriber whose pattern matches ('+' matches one level).
Links have latency, optional jitter, a loss probability, and partition
windows. AtLeastOnce transfers retry lost transmissions up to max_retries;
AtMostOnce transfers get a single shot.

Liveness is heartbeat-based: every alive broker beats once per interval, and
a client that misses miss_threshold consecutive beats abandons the broker,
reconnects to the next one in its priority list, replays its subscriptions,
and re-sends what it buffered while disconnected. There is no failback.

Ordering guarantee: for the messages that survive, delivery order per
(publisher, topic) matches publish order at every subscriber.
"""

from __future__ import annotations

import heapq
import itertools
import json
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InvalidConfigError, InvalidInputError

log = logging.getLogger(__name__)

TraceRow = dict


class QoS(Enum):
    AT_MOST_ONCE = "at_most_once"
    AT_LEAST_ONCE = "at_least_once"


@dataclass(frozen=True)
class Message:
    """Envelope; the payload is opaque to the mesh (bytes or JSON-able)."""

    msg_id: str
    topic: str
    payload: object
    qos: QoS
    publish_time_s: float
    publisher: str


@dataclass(frozen=True)
class LinkModel:
    """Per-link behavior; latency gets a uniform jitter in [0, jitter_s]."""

    latency_s: float = 0.05
    jitter_s: float = 0.0
    loss_prob: float = 0.0

    def __post_init__(self):
        if self.latency_s < 0 or self.jitter_s < 0:
            raise InvalidConfigError("latencies must be non-negative")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise InvalidConfigError("loss_prob must be in [0, 1]")

    @property
    def max_latency_s(self) -> float:
        return self.latency_s + self.jitter_s


@dataclass(frozen=True)
class Partition:
    """Nodes listed here cannot exchange traffic with the rest while active."""

    t_start_s: float
    t_end_s: float
    nodes: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        if self.t_end_s <= self.t_start_s:
            raise InvalidConfigError("partition must end after it starts")

    def severs(self, a: str, b: str, t: float) -> bool:
        if not self.t_start_s <= t < self.t_end_s:
            return False
        return (a in self.nodes) != (b in self.nodes)


@dataclass(frozen=True)
class FailoverConfig:
    heartbeat_interval_s: float = 1.0
    miss_threshold: int = 3
    broker_priority: tuple[str, ...] = ()
    # parked publishes are re-sent this long after a reconnect, giving every
    # client time to replay subscriptions on the new broker first
    resend_delay_s: float = 1.0

    def __post_init__(self):
        if self.heartbeat_interval_s <= 0:
            raise InvalidConfigError("heartbeat interval must be positive")
        if self.miss_threshold < 1:
            raise InvalidConfigError("miss threshold must be at least 1")


@dataclass(frozen=True)
class BrokerFailure:
    broker_id: str
    t_s: float


@dataclass(frozen=True)
class NetworkConfig:
    brokers: tuple[str, ...] = ("broker-a",)
    default_link: LinkModel = LinkModel()
    link_overrides: dict = field(default_factory=dict)  # client id -> LinkModel
    partitions: tuple[Partition, ...] = ()
    failover: FailoverConfig = FailoverConfig()
    broker_failures: tuple[BrokerFailure, ...] = ()
    max_retries: int = 10
    retry_interval_s: float = 0.5
    buffer_cap: int = 64
    seed: int = 0

    def __post_init__(self):
        if not self.brokers:
            raise InvalidConfigError("need at least one broker")
        if self.max_retries < 0 or self.buffer_cap < 1:
            raise InvalidConfigError("bad retry or buffer setting")
        if self.retry_interval_s <= 0:
            raise InvalidConfigError("retry interval must be positive")

    def to_json(self) -> dict:
        return {
            "brokers": list(self.brokers),
            "default_link": vars(self.default_link).copy(),
            "link_overrides": {k: vars(v).copy()
                               for k, v in self.link_overrides.items()},
            "partitions": [{"t_start_s": p.t_start_s, "t_end_s": p.t_end_s,
                            "nodes": sorted(p.nodes)} for p in self.partitions],
            "failover": vars(self.failover).copy() | {
                "broker_priority": list(self.failover.broker_priority)},
            "broker_failures": [vars(bf).copy() for bf in self.broker_failures],
            "max_retries": self.max_retries,
            "retry_interval_s": self.retry_interval_s,
            "buffer_cap": self.buffer_cap,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "NetworkConfig":
        try:
            failover = data.get("failover", {})
            return cls(
                brokers=tuple(data.get("brokers", ("broker-a",))),
                default_link=LinkModel(**data.get("default_link", {})),
                link_overrides={k: LinkModel(**v) for k, v in
                                data.get("link_overrides", {}).items()},
                partitions=tuple(
                    Partition(t_start_s=p["t_start_s"], t_end_s=p["t_end_s"],
                              nodes=frozenset(p["nodes"]))
                    for p in data.get("partitions", [])),
                failover=FailoverConfig(
                    heartbeat_interval_s=failover.get("heartbeat_interval_s", 1.0),
                    miss_threshold=failover.get("miss_threshold", 3),
                    broker_priority=tuple(failover.get("broker_priority", ())),
                    resend_delay_s=failover.get("resend_delay_s", 1.0)),
                broker_failures=tuple(
                    BrokerFailure(broker_id=bf["broker_id"], t_s=bf["t_s"])
                    for bf in data.get("broker_failures", [])),
                max_retries=int(data.get("max_retries", 10)),
                retry_interval_s=float(data.get("retry_interval_s", 0.5)),
                buffer_cap=int(data.get("buffer_cap", 64)),
                seed=int(data.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidConfigError(f"bad network config: {exc}")

    @classmethod
    def load(cls, path: str | Path) -> "NetworkConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


def topic_matches(pattern: str, topic: str) -> bool:
    """Segment-wise match where '+' stands in for exactly one level."""
    p_parts = pattern.split("/")
    t_parts = topic.split("/")
    if len(p_parts) != len(t_parts):
        return False
    return all(p == "+" or p == t for p, t in zip(p_parts, t_parts))


class BrokerState:
    """Broker bookkeeping: subscription table, in-flight ids, liveness."""

    def __init__(self, broker_id: str):
        self.broker_id = broker_id
        self.alive = True
        self.subscriptions: dict[str, list[str]] = {}  # client -> patterns
        self.inflight: set[str] = set()  # msg ids currently being fanned out


class _Client:
    def __init__(self, client_id: str, on_message, priority: tuple[str, ...]):
        self.client_id = client_id
        self.on_message = on_message
        self.priority = priority
        self.connected = False
        self.current_broker: str | None = None
        self.failed_brokers: set[str] = set()
        self.last_heartbeat_s = -np.inf
        self.missed = 0
        self.buffer: deque[Message] = deque()
        self.subscriptions: list[str] = []
        self.drain_scheduled = False


_PENDING, _ARRIVED, _DEAD, _DONE = range(4)


class _Transfer:
    """One message moving over one hop, with retry state."""

    __slots__ = ("msg", "direction", "client_id", "broker_id", "attempts",
                 "state", "channel_key")

    def __init__(self, msg: Message, direction: str, client_id: str,
                 broker_id: str | None, channel_key):
        self.msg = msg
        self.direction = direction  # "up" (client->broker) or "down"
        self.client_id = client_id
        self.broker_id = broker_id  # fixed for down, resolved per attempt for up
        self.attempts = 0
        self.state = _PENDING
        self.channel_key = channel_key


class MeshNetwork:
    """Discrete-event pub/sub fabric; all randomness comes from config.seed."""

    def __init__(self, config: NetworkConfig):
        self.config = config
        self.now = 0.0
        self.rng = np.random.default_rng(config.seed)
        self.brokers: dict[str, BrokerState] = {}
        self.clients: dict[str, _Client] = {}
        self.trace: list[TraceRow] = []
        self.broker_transitions: list[dict] = []
        self._heap: list = []
        self._seq = itertools.count()
        self._msg_counter = itertools.count(1)
        self._channels: dict[tuple, deque[_Transfer]] = {}
        self._delivered: list[tuple[float, str, Message]] = []
        self._failover_armed = False
        for broker_id in config.brokers:
            self.brokers[broker_id] = BrokerState(broker_id)
        for failure in config.broker_failures:
            self.schedule(failure.t_s, lambda b=failure.broker_id: self.kill_broker(b))

    # ---- scheduling core ----

    def schedule(self, t_s: float, fn: Callable[[], None]) -> None:
        """Run fn at simulated time t_s (not before the current time)."""
        heapq.heappush(self._heap, (max(t_s, self.now), next(self._seq), fn))

    def schedule_in(self, dt_s: float, fn: Callable[[], None]) -> None:
        self.schedule(self.now + dt_s, fn)

    def advance(self, dt_s: float) -> list[tuple[float, str, Message]]:
        """Process every event due within dt_s; returns (t, client, msg) deliveries."""
        if dt_s < 0:
            raise InvalidInputError("cannot advance backwards")
        target = self.now + dt_s
        self._delivered = []
        while self._heap and self._heap[0][0] <= target:
            t, _, fn = heapq.heappop(self._heap)
            self.now = t
            fn()
        self.now = target
        return self._delivered

    def run_until(self, t_s: float) -> list[tuple[float, str, Message]]:
        return self.advance(t_s - self.now)

    # ---- wiring ----

    def add_client(self, client_id: str, on_message=None,
                   priority: tuple[str, ...] | None = None) -> None:
        if client_id in self.clients or client_id in self.brokers:
            raise InvalidInputError(f"duplicate node id {client_id!r}")
        if priority is None:
            priority = self.config.failover.broker_priority or self.config.brokers
        client = _Client(client_id, on_message, tuple(priority))
        self.clients[client_id] = client
        self._try_connect(client)

    def subscribe(self, client_id: str, pattern: str) -> bool:
        """Register interest; replayed automatically after a failover."""
        client = self._client(client_id)
        if pattern not in client.subscriptions:
            client.subscriptions.append(pattern)
        if client.connected:
            broker = self.brokers[client.current_broker]
            broker.subscriptions.setdefault(client_id, [])
            if pattern not in broker.subscriptions[client_id]:
                broker.subscriptions[client_id].append(pattern)
        return True

    def publish(self, client_id: str, topic: str, payload: dict,
                qos: QoS = QoS.AT_LEAST_ONCE) -> str:
        """Publish one message; returns its id. Buffered while disconnected."""
        client = self._client(client_id)
        msg = Message(msg_id=f"m{next(self._msg_counter):06d}", topic=topic,
                      payload=payload, qos=qos, publish_time_s=self.now,
                      publisher=client_id)
        self._trace(msg, "publish", client_id,
                    client.current_broker if client.connected else "")
        if not client.connected:
            # only at-least-once publishes survive a disconnect; the
            # fire-and-forget class is stale by the time a reconnect lands
            if qos is QoS.AT_LEAST_ONCE:
                self._park(client, msg)
            else:
                self._trace(msg, "drop", client_id, "", reason="disconnected")
        elif client.buffer and qos is QoS.AT_LEAST_ONCE:
            # queue behind undrained messages to preserve publish order
            self._park(client, msg)
        else:
            self._start_uplink(client, msg)
        return msg.msg_id

    def kill_broker(self, broker_id: str) -> None:
        broker = self.brokers.get(broker_id)
        if broker is None or not broker.alive:
            return
        broker.alive = False
        broker.subscriptions.clear()
        self.broker_transitions.append(
            {"t": self.now, "kind": "broker_killed", "broker": broker_id})

    def write_trace_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            for row in self.trace:
                fh.write(json.dumps(row, sort_keys=True) + "\n")

    # ---- internals ----

    def _client(self, client_id: str) -> _Client:
        try:
            return self.clients[client_id]
        except KeyError:
            raise InvalidInputError(f"unknown client {client_id!r}")

    def _trace(self, msg: Message, event: str, frm: str, to: str | None,
               **extra) -> None:
        row = {"t": round(self.now, 9), "msg_id": msg.msg_id, "topic": msg.topic,
               "from": frm, "to": to or "", "event": event}
        row.update(extra)
        self.trace.append(row)

    def _link_for(self, client_id: str) -> LinkModel:
        return self.config.link_overrides.get(client_id, self.config.default_link)

    def _severed(self, a: str, b: str) -> bool:
        return any(p.severs(a, b, self.now) for p in self.config.partitions)

    def _latency(self, link: LinkModel) -> float:
        if link.jitter_s > 0:
            return link.latency_s + float(self.rng.uniform(0.0, link.jitter_s))
        return link.latency_s

    def _lost(self, link: LinkModel) -> bool:
        return link.loss_prob > 0 and float(self.rng.random()) < link.loss_prob

    def _park(self, client: _Client, msg: Message) -> None:
        client.buffer.append(msg)
        if len(client.buffer) > self.config.buffer_cap:
            dropped = client.buffer.popleft()
            log.warning("client %s buffer full, dropping oldest message %s",
                        client.client_id, dropped.msg_id)
            self._trace(dropped, "drop", client.client_id, "",
                        reason="buffer_overflow")

    def _drain_buffer(self, client: _Client) -> None:
        client.drain_scheduled = False
        if not client.connected:
            return
        while client.buffer:
            if not client.connected:
                return
            self._start_uplink(client, client.buffer.popleft())

    # ---- uplink: client to broker ----

    def _start_uplink(self, client: _Client, msg: Message) -> None:
        key = ("up", msg.publisher, msg.topic)
        transfer = _Transfer(msg, "up", client.client_id, None, key)
        self._channels.setdefault(key, deque()).append(transfer)
        self._attempt_up(transfer)

    def _attempt_up(self, transfer: _Transfer) -> None:
        if transfer.state is not _PENDING:
            return
        client = self.clients[transfer.client_id]
        msg = transfer.msg
        if not client.connected:
            # fold back into the buffer; the transfer slot dies so the
            # channel does not deadlock, and the drain re-creates it
            transfer.state = _DEAD
            if msg.qos is QoS.AT_LEAST_ONCE:
                self._park(client, msg)
            else:
                self._trace(msg, "drop", client.client_id, "", reason="disconnected")
            self._pump(transfer.channel_key)
            return
        broker_id = client.current_broker
        broker = self.brokers[broker_id]
        if not broker.alive or self._severed(client.client_id, broker_id):
            if msg.qos is QoS.AT_LEAST_ONCE:
                # unreachable, not lost: retry without spending a credit
                self.schedule_in(self.config.retry_interval_s,
                                 lambda: self._attempt_up(transfer))
            else:
                transfer.state = _DEAD
                self._trace(msg, "drop", client.client_id, broker_id,
                            reason="unreachable")
                self._pump(transfer.channel_key)
            return
        link = self._link_for(client.client_id)
        if self._lost(link):
            transfer.attempts += 1
            self._trace(msg, "drop", client.client_id, broker_id, reason="loss",
                        attempt=transfer.attempts)
            if msg.qos is QoS.AT_LEAST_ONCE and \
                    transfer.attempts <= self.config.max_retries:
                self._trace(msg, "retry", client.client_id, broker_id,
                            attempt=transfer.attempts)
                self.schedule_in(self.config.retry_interval_s,
                                 lambda: self._attempt_up(transfer))
            else:
                transfer.state = _DEAD
                self._pump(transfer.channel_key)
            return
        self.schedule_in(self._latency(link),
                         lambda b=broker_id: self._arrive_up(transfer, b))

    def _arrive_up(self, transfer: _Transfer, broker_id: str) -> None:
        if transfer.state is not _PENDING:
            return
        broker = self.brokers[broker_id]
        if not broker.alive:
            # the broker died while the message was in flight
            msg = transfer.msg
            if msg.qos is QoS.AT_LEAST_ONCE:
                self.schedule_in(self.config.retry_interval_s,
                                 lambda: self._attempt_up(transfer))
            else:
                transfer.state = _DEAD
                self._trace(msg, "drop", transfer.client_id, broker_id,
                            reason="broker_dead")
                self._pump(transfer.channel_key)
            return
        transfer.state = _ARRIVED
        transfer.broker_id = broker_id
        self._pump(transfer.channel_key)

    # ---- downlink: broker to subscriber ----

    def _fanout(self, msg: Message, broker_id: str) -> None:
        broker = self.brokers[broker_id]
        broker.inflight.add(msg.msg_id)
        for client_id, patterns in list(broker.subscriptions.items()):
            if any(topic_matches(p, msg.topic) for p in patterns):
                key = ("down", msg.publisher, msg.topic, client_id)
                transfer = _Transfer(msg, "down", client_id, broker_id, key)
                self._channels.setdefault(key, deque()).append(transfer)
                self._attempt_down(transfer)
        broker.inflight.discard(msg.msg_id)

    def _attempt_down(self, transfer: _Transfer) -> None:
        if transfer.state is not _PENDING:
            return
        client = self.clients[transfer.client_id]
        broker = self.brokers[transfer.broker_id]
        msg = transfer.msg
        if not broker.alive or not client.connected or \
                client.current_broker != transfer.broker_id:
            # the session this delivery belonged to is gone
            transfer.state = _DEAD
            self._trace(msg, "drop", transfer.broker_id, client.client_id,
                        reason="session_gone")
            self._pump(transfer.channel_key)
            return
        if self._severed(client.client_id, transfer.broker_id):
            if msg.qos is QoS.AT_LEAST_ONCE:
                self.schedule_in(self.config.retry_interval_s,
                                 lambda: self._attempt_down(transfer))
            else:
                transfer.state = _DEAD
                self._trace(msg, "drop", transfer.broker_id, client.client_id,
                            reason="unreachable")
                self._pump(transfer.channel_key)
            return
        link = self._link_for(client.client_id)
        if self._lost(link):
            transfer.attempts += 1
            self._trace(msg, "drop", transfer.broker_id, client.client_id,
                        reason="loss", attempt=transfer.attempts)
            if msg.qos is QoS.AT_LEAST_ONCE and \
                    transfer.attempts <= self.config.max_retries:
                self._trace(msg, "retry", transfer.broker_id, client.client_id,
                            attempt=transfer.attempts)
                self.schedule_in(self.config.retry_interval_s,
                                 lambda: self._attempt_down(transfer))
            else:
                transfer.state = _DEAD
                self._pump(transfer.channel_key)
            return
        self.schedule_in(self._latency(link), lambda: self._arrive_down(transfer))

    def _arrive_down(self, transfer: _Transfer) -> None:
        if transfer.state is not _PENDING:
            return
        transfer.state = _ARRIVED
        self._pump(transfer.channel_key)

    # ---- ordered handoff ----

    def _pump(self, key: tuple) -> None:
        """Release the channel head when it has resolved, preserving order."""
        channel = self._channels.get(key)
        if not channel:
            return
        while channel:
            head = channel[0]
            if head.state == _DEAD:
                channel.popleft()
                continue
            if head.state != _ARRIVED:
                return
            head.state = _DONE
            channel.popleft()
            if head.direction == "up":
                self._fanout(head.msg, head.broker_id)
            else:
                self._deliver(head)

    def _deliver(self, transfer: _Transfer) -> None:
        client = self.clients[transfer.client_id]
        msg = transfer.msg
        self._trace(msg, "deliver", transfer.broker_id, client.client_id)
        self._delivered.append((self.now, client.client_id, msg))
        if client.on_message is not None:
            client.on_message(client.client_id, msg, self.now)

    # ---- heartbeats and failover ----

    def _heartbeat_tick(self) -> None:
        interval = self.config.failover.heartbeat_interval_s
        for broker in self.brokers.values():
            if not broker.alive:
                continue
            msg = Message(msg_id=f"m{next(self._msg_counter):06d}",
                          topic=f"sys/heartbeat/{broker.broker_id}",
                          payload={"broker": broker.broker_id, "t": self.now},
                          qos=QoS.AT_MOST_ONCE, publish_time_s=self.now,
                          publisher=broker.broker_id)
            self._trace(msg, "publish", broker.broker_id, "")
            for client in self.clients.values():
                if client.current_broker != broker.broker_id or not client.connected:
                    continue
                if self._severed(client.client_id, broker.broker_id):
                    continue
                link = self._link_for(client.client_id)
                if self._lost(link):
                    continue
                self.schedule_in(
                    self._latency(link),
                    lambda c=client, m=msg: self._receive_heartbeat(c, m))
        self.schedule_in(interval, self._heartbeat_tick)

    def _receive_heartbeat(self, client: _Client, msg: Message) -> None:
        if not client.connected or client.current_broker != msg.publisher:
            return
        client.last_heartbeat_s = self.now
        client.missed = 0
        self._trace(msg, "deliver", msg.publisher, client.client_id)

    def _monitor_tick(self) -> None:
        interval = self.config.failover.heartbeat_interval_s
        for client in self.clients.values():
            if client.connected:
                if self.now - client.last_heartbeat_s > interval:
                    client.missed += 1
                if client.missed >= self.config.failover.miss_threshold:
                    self._failover(client)
            else:
                # a client the failover logic disconnected keeps probing
                self._try_connect(client, record_reconnect=True)
        self.schedule_in(interval, self._monitor_tick)

    def _failover(self, client: _Client) -> None:
        old = client.current_broker
        client.failed_brokers.add(old)
        client.connected = False
        client.current_broker = None
        client.missed = 0
        connected = self._try_connect(client)
        self._trace(
            Message(msg_id="", topic="", payload={}, qos=QoS.AT_MOST_ONCE,
                    publish_time_s=self.now, publisher=client.client_id),
            "failover", old, client.current_broker if connected else "")
        self.broker_transitions.append(
            {"t": self.now, "kind": "failover", "client": client.client_id,
             "from": old, "to": client.current_broker})

    def _try_connect(self, client: _Client, record_reconnect: bool = False) -> bool:
        """Connect to the first reachable candidate not already written off."""
        for broker_id in client.priority:
            broker = self.brokers.get(broker_id)
            if broker is None or not broker.alive:
                continue
            if broker_id in client.failed_brokers:
                continue  # no failback
            if self._severed(client.client_id, broker_id):
                continue
            client.connected = True
            client.current_broker = broker_id
            client.last_heartbeat_s = self.now
            client.missed = 0
            for pattern in client.subscriptions:
                broker.subscriptions.setdefault(client.client_id, [])
                if pattern not in broker.subscriptions[client.client_id]:
                    broker.subscriptions[client.client_id].append(pattern)
            if record_reconnect:
                self.broker_transitions.append(
                    {"t": self.now, "kind": "reconnect",
                     "client": client.client_id, "to": broker_id})
            if client.buffer and not client.drain_scheduled:
                client.drain_scheduled = True
                self.schedule_in(self.config.failover.resend_delay_s,
                                 lambda c=client: self._drain_buffer(c))
            return True
        return False


def heartbeat_and_failover(network: MeshNetwork,
                           config: FailoverConfig | None = None) -> list[dict]:
    """Arm heartbeat emission and client-side liveness monitoring.

    Brokers beat once per interval; a client that misses miss_threshold beats
    in a row abandons its broker and reconnects down the priority list. The
    returned list is live: transitions (broker_killed, failover, reconnect)
    append to it as the simulation advances. Arming twice is a no-op.
    """
    if config is not None and config != network.config.failover:
        if network._failover_armed:
            raise InvalidConfigError("failover already armed with other settings")
        network.config = replace(network.config, failover=config)
    if not network._failover_armed:
        network._failover_armed = True
        interval = network.config.failover.heartbeat_interval_s
        network.schedule(network.now + interval, network._heartbeat_tick)
        network.schedule(network.now + 1.5 * interval, network._monitor_tick)
    return network.broker_transitions
