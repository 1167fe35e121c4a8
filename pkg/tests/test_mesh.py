import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hecsim.errors import InvalidConfigError, InvalidInputError
from hecsim.mesh import (BrokerFailure, FailoverConfig, LinkModel,
                         MeshNetwork, NetworkConfig, Partition, QoS,
                         heartbeat_and_failover, topic_matches)
from oracles import delivery_probability


def make_net(**kwargs):
    return MeshNetwork(NetworkConfig(**kwargs))


def collect(net, client_id="sub", pattern="t/+"):
    """Add a subscriber that appends (t, payload) to the returned list."""
    got = []
    net.add_client(client_id,
                   on_message=lambda cid, msg, t: got.append((t, msg.payload)))
    net.subscribe(client_id, pattern)
    return got


# ---- topic matching ----

@pytest.mark.parametrize("pattern,topic,expected", [
    ("a/b/c", "a/b/c", True),
    ("a/+/c", "a/b/c", True),
    ("+/+/+", "a/b/c", True),
    ("a/b", "a/b/c", False),
    ("a/b/c/d", "a/b/c", False),
    ("a/+/d", "a/b/c", False),
    ("+", "a/b", False),
    ("hec/pn/+/frame", "hec/pn/pn-3/frame", True),
    ("hec/pn/+/frame", "hec/pn/pn-3/status", False),
])
def test_topic_matches_cases(pattern, topic, expected):
    assert topic_matches(pattern, topic) is expected


SEGMENT = st.text(alphabet="abc", min_size=1, max_size=3)


@settings(max_examples=80, deadline=None)
@given(st.lists(SEGMENT, min_size=1, max_size=4), st.data())
def test_topic_matches_properties(segments, data):
    topic = "/".join(segments)
    assert topic_matches(topic, topic)
    wild = [data.draw(st.booleans()) for _ in segments]
    pattern = "/".join("+" if w else s for s, w in zip(segments, wild))
    assert topic_matches(pattern, topic)
    assert not topic_matches(pattern + "/x", topic)


# ---- config plumbing ----

def test_network_config_round_trip(tmp_path):
    cfg = NetworkConfig(
        brokers=("b1", "b2"),
        default_link=LinkModel(latency_s=0.02, jitter_s=0.01, loss_prob=0.1),
        link_overrides={"pn-1": LinkModel(latency_s=0.2)},
        partitions=(Partition(t_start_s=1.0, t_end_s=2.0,
                              nodes=frozenset({"pn-1"})),),
        failover=FailoverConfig(heartbeat_interval_s=0.5, miss_threshold=2,
                                broker_priority=("b2", "b1"),
                                resend_delay_s=0.25),
        broker_failures=(BrokerFailure(broker_id="b1", t_s=5.0),),
        max_retries=4, retry_interval_s=0.1, buffer_cap=16, seed=99)
    back = NetworkConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert back == cfg
    path = tmp_path / "net.json"
    path.write_text(json.dumps(cfg.to_json()))
    assert NetworkConfig.load(path) == cfg


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        NetworkConfig(brokers=())
    with pytest.raises(InvalidConfigError):
        NetworkConfig(max_retries=-1)
    with pytest.raises(InvalidConfigError):
        LinkModel(loss_prob=1.5)
    with pytest.raises(InvalidConfigError):
        Partition(t_start_s=2.0, t_end_s=1.0, nodes=frozenset())
    with pytest.raises(InvalidConfigError):
        FailoverConfig(miss_threshold=0)
    with pytest.raises(InvalidConfigError):
        NetworkConfig.from_json({"default_link": {"bogus_field": 1}})


def test_duplicate_and_unknown_clients():
    net = make_net()
    net.add_client("a")
    with pytest.raises(InvalidInputError):
        net.add_client("a")
    with pytest.raises(InvalidInputError):
        net.publish("ghost", "t/x", {})


# ---- basic delivery ----

def test_lossless_delivery_and_latency():
    net = make_net()
    got = collect(net)
    net.add_client("pub")
    net.publish("pub", "t/x", {"n": 1})
    net.advance(1.0)
    assert len(got) == 1
    t, payload = got[0]
    assert payload == {"n": 1}
    assert t == pytest.approx(0.10)  # two hops at 0.05 each


def test_publish_order_is_preserved_end_to_end():
    net = make_net(default_link=LinkModel(latency_s=0.05, loss_prob=0.4),
                   max_retries=20, retry_interval_s=0.1, seed=3)
    got = collect(net)
    net.add_client("pub")
    for n in range(10):
        net.run_until(n * 0.05)
        net.publish("pub", "t/x", {"n": n})
    net.advance(60.0)
    assert [p["n"] for _, p in got] == list(range(10))


def test_at_most_once_gives_up_on_first_loss():
    net = make_net(default_link=LinkModel(loss_prob=1.0), seed=0)
    got = collect(net)
    net.add_client("pub")
    mid = net.publish("pub", "t/x", {}, qos=QoS.AT_MOST_ONCE)
    net.advance(30.0)
    assert got == []
    rows = [r for r in net.trace if r["msg_id"] == mid]
    assert [r["event"] for r in rows] == ["publish", "drop"]
    assert rows[1]["reason"] == "loss"


def test_at_least_once_dies_after_retry_budget():
    net = make_net(default_link=LinkModel(loss_prob=1.0),
                   max_retries=3, retry_interval_s=0.1, seed=0)
    got = collect(net)
    net.add_client("pub")
    mid = net.publish("pub", "t/x", {})
    net.advance(30.0)
    assert got == []
    drops = [r for r in net.trace
             if r["msg_id"] == mid and r["event"] == "drop"]
    assert len(drops) == 4  # first try plus three retries
    assert drops[-1]["attempt"] == 4


def test_loss_recovery_matches_closed_form():
    net = make_net(default_link=LinkModel(latency_s=0.01, loss_prob=0.3),
                   max_retries=5, retry_interval_s=0.05, seed=11)
    got = collect(net)
    net.add_client("pub")
    n = 200
    for k in range(n):
        net.publish("pub", "t/x", {"n": k})
    net.advance(300.0)
    # each hop succeeds with p = 1 - loss^(retries+1); two hops in series
    p = delivery_probability(0.3, 5) ** 2
    sigma = (p * (1 - p) / n) ** 0.5
    assert abs(len(got) / n - p) <= 3 * sigma + 1e-12


def test_delivery_callback_and_advance_agree():
    net = make_net()
    got = collect(net)
    net.add_client("pub")
    net.publish("pub", "t/x", {"n": 0})
    out = net.advance(1.0)
    assert [(t, m.payload) for t, _, m in out] == got


# ---- partitions ----

def test_partition_parks_alo_until_it_heals():
    net = make_net(partitions=(Partition(t_start_s=5.0, t_end_s=10.0,
                                         nodes=frozenset({"pub"})),),
                   retry_interval_s=0.5)
    got = collect(net)
    net.add_client("pub")
    net.run_until(6.0)
    net.publish("pub", "t/x", {"n": 1})
    net.advance(1.0)
    assert got == []  # still severed
    net.advance(20.0)
    assert len(got) == 1
    assert got[0][0] == pytest.approx(10.10)  # first recheck after healing


def test_partition_drops_amo():
    net = make_net(partitions=(Partition(t_start_s=5.0, t_end_s=10.0,
                                         nodes=frozenset({"pub"})),))
    got = collect(net)
    net.add_client("pub")
    net.run_until(6.0)
    mid = net.publish("pub", "t/x", {}, qos=QoS.AT_MOST_ONCE)
    net.advance(20.0)
    assert got == []
    drop = next(r for r in net.trace
                if r["msg_id"] == mid and r["event"] == "drop")
    assert drop["reason"] == "unreachable"


# ---- disconnected buffering ----

def test_disconnected_publishes_park_then_drop_oldest():
    net = make_net(buffer_cap=3)
    net.kill_broker("broker-a")  # nothing to connect to from the start
    net.add_client("pub")
    assert not net.clients["pub"].connected
    ids = [net.publish("pub", "t/x", {"n": k}) for k in range(5)]
    overflow = [r for r in net.trace if r["event"] == "drop"
                and r.get("reason") == "buffer_overflow"]
    assert [r["msg_id"] for r in overflow] == ids[:2]  # oldest go first
    assert [m.msg_id for m in net.clients["pub"].buffer] == ids[2:]


def test_disconnected_amo_is_dropped_immediately():
    net = make_net()
    net.kill_broker("broker-a")
    net.add_client("pub")
    mid = net.publish("pub", "t/x", {}, qos=QoS.AT_MOST_ONCE)
    drop = next(r for r in net.trace
                if r["msg_id"] == mid and r["event"] == "drop")
    assert drop["reason"] == "disconnected"
    assert len(net.clients["pub"].buffer) == 0


# ---- heartbeats and failover ----

def two_broker_net(kill_at=10.0):
    cfg = NetworkConfig(
        brokers=("broker-a", "broker-b"),
        broker_failures=(BrokerFailure(broker_id="broker-a", t_s=kill_at),))
    net = MeshNetwork(cfg)
    transitions = heartbeat_and_failover(net)
    return net, transitions


def test_no_failure_means_no_transitions():
    net = make_net(brokers=("broker-a", "broker-b"))
    transitions = heartbeat_and_failover(net)
    collect(net)
    net.add_client("pub")
    net.publish("pub", "t/x", {})
    net.advance(30.0)
    assert transitions == []
    beats = [r for r in net.trace if r["topic"].startswith("sys/heartbeat/")]
    assert len(beats) > 0


def test_failover_timeline_and_replayed_subscriptions():
    net, transitions = two_broker_net(kill_at=10.0)
    got = collect(net)
    net.add_client("pub")
    net.advance(20.0)

    kinds = [tr["kind"] for tr in transitions]
    assert kinds.count("broker_killed") == 1
    failovers = [tr for tr in transitions if tr["kind"] == "failover"]
    assert {tr["client"] for tr in failovers} == {"sub", "pub"}
    for tr in failovers:
        # three missed beats at interval 1: detected on the 12.5 s check
        assert tr["t"] == pytest.approx(12.5)
        assert tr["from"] == "broker-a" and tr["to"] == "broker-b"

    # subscriptions were replayed: traffic flows on the new broker
    net.publish("pub", "t/x", {"n": 7})
    net.advance(1.0)
    assert got[-1][1] == {"n": 7}
    assert "broker-a" in net.clients["pub"].failed_brokers  # no failback


def test_alo_published_during_outage_arrives_after_failover():
    net, _ = two_broker_net(kill_at=10.0)
    got = collect(net)
    net.add_client("pub")
    net.run_until(10.2)
    net.publish("pub", "t/x", {"n": 1})  # broker-a is already dead
    net.advance(10.0)
    assert len(got) == 1
    assert 12.5 <= got[0][0] <= 13.0


def test_all_brokers_dead_strands_the_client():
    cfg = NetworkConfig(
        brokers=("broker-a",),
        broker_failures=(BrokerFailure(broker_id="broker-a", t_s=5.0),))
    net = MeshNetwork(cfg)
    transitions = heartbeat_and_failover(net)
    got = collect(net)
    net.add_client("pub")
    net.run_until(8.0)
    net.publish("pub", "t/x", {"n": 1})
    net.advance(20.0)
    assert got == []
    failover = next(tr for tr in transitions if tr["kind"] == "failover"
                    and tr["client"] == "pub")
    assert failover["to"] is None
    assert len(net.clients["pub"].buffer) == 1  # parked, not lost


def test_arming_twice_is_idempotent():
    net = make_net()
    first = heartbeat_and_failover(net)
    second = heartbeat_and_failover(net)
    assert first is second
    with pytest.raises(InvalidConfigError):
        heartbeat_and_failover(net, FailoverConfig(heartbeat_interval_s=2.0))


def test_trace_is_deterministic():
    def run():
        net = make_net(
            brokers=("broker-a", "broker-b"),
            default_link=LinkModel(latency_s=0.05, jitter_s=0.02,
                                   loss_prob=0.2),
            broker_failures=(BrokerFailure(broker_id="broker-a", t_s=5.0),),
            seed=21)
        heartbeat_and_failover(net)
        collect(net)
        net.add_client("pub")
        for k in range(20):
            net.run_until(0.3 * k)
            net.publish("pub", "t/x", {"n": k})
        net.advance(30.0)
        return net.trace

    a = run()
    b = run()
    assert a == b
    assert len(a) > 40


def test_trace_jsonl_round_trips(tmp_path):
    net = make_net()
    collect(net)
    net.add_client("pub")
    net.publish("pub", "t/x", {"n": 1})
    net.advance(1.0)
    path = tmp_path / "trace.jsonl"
    net.write_trace_jsonl(path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert rows == net.trace
    assert {r["event"] for r in rows} >= {"publish", "deliver"}
