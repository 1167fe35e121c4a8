"""Scenario runner: seismic synthesis, node runtimes, mesh, and metrics.

A Scenario says where the peripheral nodes stand and when elephants pass
which of them; a SimConfig says how the nodes and the network behave.
run_scenario synthesizes one seismic trace per node, scores every window,
and drives the peripheral and central state machines through the simulated
mesh in a single discrete-event loop. Every random choice descends from the
scenario's master seed through labeled sub-seeds, so the same scenario and
seed produce byte-identical outputs.

Outputs per run: delivery_trace.jsonl, actions.jsonl, detections.jsonl,
warnings.jsonl, metrics.json.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .central import (CnAnomaly, CnConfig, CnState, DetectorResult,
                      FrameReceived, JsonlSink, MemorySink, OfficerMessage,
                      OracleDetector, PublishNegativeDecision,
                      PublishRepelCommand, RunDetector, Siren,
                      StochasticDetector, StochasticDetectorParams,
                      WarningKind, cn_step, detect_frame, emit_warning,
                      truth_from_frame)
from .detection import Algorithm1Params, detect_stream
from .deterrent import ModificationKind, ModificationParams
from .errors import InvalidConfigError, InvalidInputError
from .mesh import (MeshNetwork, NetworkConfig, QoS, heartbeat_and_failover)
from .peripheral import (CaptureFrame, CommandReceived, FrameCaptured, Flash,
                         IR_POWERED_STATES, LogAnomaly, NegativeDecision,
                         PlayDeterrent, PnConfig, PnState, PnStateKind,
                         PreArm, PublishFrame, RepelCommand, SeismicWindowReady,
                         ThermalFrame, ir_duty_cycle, pn_step)
from .seeds import derive_seed
from .signals import RumbleSpec, synth_rumble_stream
from .sigio import write_jsonl


# ---- scenario model ----

@dataclass(frozen=True)
class PnPlacement:
    """A peripheral node and the hotspot label it guards."""

    node_id: str
    position: str = ""


@dataclass(frozen=True)
class ElephantEvent:
    """One approach: a rumble heard by the listed nodes from t_onset_s.

    thermal_visible controls whether a frame captured while the animal is
    near carries a positive ground truth; a seismically audible but
    thermally hidden event exercises the negative-decision path.
    """

    t_onset_s: float
    pn_ids: tuple[str, ...]
    rumble: RumbleSpec
    thermal_visible: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pn_ids", tuple(self.pn_ids))
        if self.t_onset_s < 0:
            raise InvalidInputError("event onset must be non-negative")
        if not self.pn_ids:
            raise InvalidInputError("event must touch at least one node")


@dataclass(frozen=True)
class Scenario:
    name: str
    duration_s: float
    pns: tuple[PnPlacement, ...]
    events: tuple[ElephantEvent, ...] = ()
    detector: str = "oracle"
    master_seed: int = 0
    network: NetworkConfig | None = None  # overrides SimConfig.mesh when set

    def __post_init__(self):
        object.__setattr__(self, "pns", tuple(self.pns))
        object.__setattr__(self, "events", tuple(self.events))
        if self.duration_s <= 0:
            raise InvalidConfigError("scenario duration must be positive")
        if not self.pns:
            raise InvalidConfigError("scenario needs at least one node")
        ids = [p.node_id for p in self.pns]
        if len(set(ids)) != len(ids):
            raise InvalidConfigError("duplicate node ids")
        if self.detector not in ("oracle", "stochastic"):
            raise InvalidConfigError(f"unknown detector {self.detector!r}")
        known = set(ids)
        for ev in self.events:
            if ev.t_onset_s >= self.duration_s:
                raise InvalidConfigError("event onset falls outside the scenario")
            missing = set(ev.pn_ids) - known
            if missing:
                raise InvalidConfigError(f"event references unknown nodes {sorted(missing)}")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "duration_s": self.duration_s,
            "pns": [{"node_id": p.node_id, "position": p.position}
                    for p in self.pns],
            "events": [{
                "t_onset_s": ev.t_onset_s,
                "pn_ids": list(ev.pn_ids),
                "rumble": vars(ev.rumble).copy(),
                "thermal_visible": ev.thermal_visible,
            } for ev in self.events],
            "detector": self.detector,
            "master_seed": self.master_seed,
            "network": self.network.to_json() if self.network else None,
        }

    @classmethod
    def from_json(cls, data: dict, base_dir: str | Path | None = None) -> "Scenario":
        try:
            network = data.get("network")
            if isinstance(network, str):
                # a string is a path to a network config file, relative to
                # the scenario file itself
                path = Path(network)
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                network = NetworkConfig.load(path)
            elif isinstance(network, dict):
                network = NetworkConfig.from_json(network)
            return cls(
                name=data["name"],
                duration_s=float(data["duration_s"]),
                pns=tuple(PnPlacement(node_id=p["node_id"],
                                      position=p.get("position", ""))
                          for p in data["pns"]),
                events=tuple(ElephantEvent(
                    t_onset_s=float(ev["t_onset_s"]),
                    pn_ids=tuple(ev["pn_ids"]),
                    rumble=RumbleSpec(**ev["rumble"]),
                    thermal_visible=bool(ev.get("thermal_visible", True)),
                ) for ev in data.get("events", [])),
                detector=data.get("detector", "oracle"),
                master_seed=int(data.get("master_seed", 0)),
                network=network,
            )
        except (KeyError, TypeError) as exc:
            raise InvalidConfigError(f"bad scenario: {exc}")

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        path = Path(path)
        return cls.from_json(json.loads(path.read_text()), base_dir=path.parent)


@dataclass(frozen=True)
class SimConfig:
    window_s: float = 4.0
    alg1: Algorithm1Params = Algorithm1Params()
    seismic_rate_hz: float = 1000.0
    noise_rms: float = 1.0
    pn_defaults: PnConfig = PnConfig(node_id="pn")
    cn: CnConfig = CnConfig()
    detector_params: StochasticDetectorParams = StochasticDetectorParams()
    thermal_hold_s: float = 30.0
    capture_delay_s: float = 0.05
    detector_delay_s: float = 0.1
    mesh: NetworkConfig = NetworkConfig()
    topic_prefix: str = "hec"
    match_horizon_s: float = 30.0
    output_dir: str | None = None

    def __post_init__(self):
        if abs(self.window_s - self.alg1.window_s) > 1e-9:
            raise InvalidConfigError(
                f"window_s {self.window_s} disagrees with the detector window "
                f"{self.alg1.window_s}")
        if self.seismic_rate_hz <= 0 or self.noise_rms <= 0:
            raise InvalidConfigError("rate and noise level must be positive")
        if self.capture_delay_s < 0 or self.detector_delay_s < 0:
            raise InvalidConfigError("delays must be non-negative")
        if "/" in self.topic_prefix or "+" in self.topic_prefix \
                or not self.topic_prefix:
            raise InvalidConfigError("topic prefix must be one plain segment")

    def to_json(self) -> dict:
        pn = vars(self.pn_defaults).copy()
        pn.pop("node_id")
        pn.pop("alg1")  # the detector params are owned by this config
        pn["broker_priority"] = list(pn["broker_priority"])
        return {
            "window_s": self.window_s,
            "alg1": vars(self.alg1).copy(),
            "seismic_rate_hz": self.seismic_rate_hz,
            "noise_rms": self.noise_rms,
            "pn": pn,
            "cn": vars(self.cn).copy() | {
                "deterrent_alpha_range": list(self.cn.deterrent_alpha_range)},
            "detector_params": {"tpr": self.detector_params.tpr,
                                "fpr": self.detector_params.fpr},
            "thermal_hold_s": self.thermal_hold_s,
            "capture_delay_s": self.capture_delay_s,
            "detector_delay_s": self.detector_delay_s,
            "mesh": self.mesh.to_json(),
            "topic_prefix": self.topic_prefix,
            "match_horizon_s": self.match_horizon_s,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SimConfig":
        try:
            alg1 = Algorithm1Params(**data.get("alg1", {}))
            pn_fields = dict(data.get("pn", {}))
            pn_fields["broker_priority"] = tuple(
                pn_fields.get("broker_priority", ()))
            cn_fields = dict(data.get("cn", {}))
            if "deterrent_alpha_range" in cn_fields:
                cn_fields["deterrent_alpha_range"] = tuple(
                    cn_fields["deterrent_alpha_range"])
            det = data.get("detector_params", {})
            return cls(
                window_s=float(data.get("window_s", alg1.window_s)),
                alg1=alg1,
                seismic_rate_hz=float(data.get("seismic_rate_hz", 1000.0)),
                noise_rms=float(data.get("noise_rms", 1.0)),
                pn_defaults=PnConfig(node_id="pn", alg1=alg1, **pn_fields),
                cn=CnConfig(**cn_fields),
                detector_params=StochasticDetectorParams(
                    tpr=float(det.get("tpr", 0.9)),
                    fpr=float(det.get("fpr", 0.05))),
                thermal_hold_s=float(data.get("thermal_hold_s", 30.0)),
                capture_delay_s=float(data.get("capture_delay_s", 0.05)),
                detector_delay_s=float(data.get("detector_delay_s", 0.1)),
                mesh=NetworkConfig.from_json(data["mesh"])
                    if "mesh" in data else NetworkConfig(),
                topic_prefix=data.get("topic_prefix", "hec"),
                match_horizon_s=float(data.get("match_horizon_s", 30.0)),
                output_dir=data.get("output_dir"),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidConfigError(f"bad sim config: {exc}")

    @classmethod
    def load(cls, path: str | Path) -> "SimConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


# ---- metrics ----

@dataclass(frozen=True)
class EventOutcome:
    t_onset_s: float
    pn_ids: tuple[str, ...]
    detected: bool
    latency_s: float | None

    def __post_init__(self):
        if self.latency_s is not None and self.latency_s < 0:
            raise InvalidInputError("latency cannot be negative")


@dataclass(frozen=True)
class MetricsReport:
    scenario_name: str
    duration_s: float
    events: tuple[EventOutcome, ...]
    recall: float | None
    false_warning_count: int
    ir_duty_cycle: dict
    message_counts: dict
    seed: int

    def __post_init__(self):
        if self.recall is not None and not 0.0 <= self.recall <= 1.0:
            raise InvalidInputError("recall must lie in [0, 1]")

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "duration_s": self.duration_s,
            "seed": self.seed,
            "recall": self.recall,
            "false_warning_count": self.false_warning_count,
            "events": [{
                "t_onset_s": ev.t_onset_s,
                "pn_ids": list(ev.pn_ids),
                "detected": ev.detected,
                "latency_s": ev.latency_s,
            } for ev in self.events],
            "ir_duty_cycle": dict(sorted(self.ir_duty_cycle.items())),
            "message_counts": {
                topic: dict(counts)
                for topic, counts in sorted(self.message_counts.items())},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"


@dataclass
class RunLogs:
    """Everything one run produced, as plain JSON-able rows."""

    delivery_trace: list
    actions: list
    warnings: list
    detections: list
    # in-memory state history per node, for the duty-cycle cross-check
    state_logs: dict | None = None


IR_STATE_NAMES = frozenset(k.value for k in IR_POWERED_STATES)


def _duty_from_actions(actions: list, node_ids: list[str],
                       duration_s: float) -> dict:
    """Reconstruct camera-on time from logged state transitions."""
    duty = {}
    for node in node_ids:
        powered_since = None
        total = 0.0
        for row in actions:
            if row["node"] != node:
                continue
            entering = row["state_to"] in IR_STATE_NAMES
            leaving = row["state_from"] in IR_STATE_NAMES
            if entering and powered_since is None:
                powered_since = row["t"]
            elif leaving and not entering and powered_since is not None:
                total += row["t"] - powered_since
                powered_since = None
        if powered_since is not None:
            total += duration_s - powered_since
        duty[node] = total / duration_s if duration_s > 0 else 0.0
    return duty


def compute_metrics(logs: RunLogs, scenario: Scenario,
                    config: SimConfig) -> MetricsReport:
    """Reduce one run's logs to the summary report.

    An event counts as detected when an officer warning lands inside
    [onset, onset + match_horizon_s]; a warning inside no event's horizon is
    false. Duty cycles come from the action log and, when the in-memory
    state histories are present, are cross-checked against them.
    """
    for name in ("delivery_trace", "actions", "warnings", "detections"):
        if getattr(logs, name) is None:
            raise InvalidInputError(f"missing log stream {name}")

    officer = sorted((w for w in logs.warnings
                      if w["kind"] == WarningKind.OFFICER_MESSAGE.value),
                     key=lambda w: w["t"])
    outcomes = []
    matched_any = [False] * len(officer)
    for ev in scenario.events:
        lo, hi = ev.t_onset_s, ev.t_onset_s + config.match_horizon_s
        latency = None
        for i, w in enumerate(officer):
            if lo <= w["t"] <= hi:
                matched_any[i] = True
                if latency is None:
                    latency = w["t"] - ev.t_onset_s
        outcomes.append(EventOutcome(
            t_onset_s=ev.t_onset_s, pn_ids=ev.pn_ids,
            detected=latency is not None, latency_s=latency))
    false_count = matched_any.count(False)
    recall = None
    if scenario.events:
        recall = sum(o.detected for o in outcomes) / len(scenario.events)

    node_ids = [p.node_id for p in scenario.pns]
    duty = _duty_from_actions(logs.actions, node_ids, scenario.duration_s)
    if logs.state_logs is not None:
        for node in node_ids:
            direct = ir_duty_cycle(logs.state_logs[node], scenario.duration_s)
            if abs(direct - duty[node]) > 1e-9:
                raise InvalidInputError(
                    f"duty mismatch for {node}: state log {direct} vs "
                    f"action log {duty[node]}")

    counts: dict[str, dict] = {}
    for row in logs.delivery_trace:
        if not row["msg_id"] or row["event"] not in ("publish", "deliver"):
            continue
        slot = counts.setdefault(row["topic"], {"published": 0, "delivered": 0})
        slot["published" if row["event"] == "publish" else "delivered"] += 1

    return MetricsReport(
        scenario_name=scenario.name, duration_s=scenario.duration_s,
        events=tuple(outcomes), recall=recall,
        false_warning_count=false_count, ir_duty_cycle=duty,
        message_counts=counts, seed=scenario.master_seed)


# ---- node runtimes ----

def _action_label(action) -> str:
    if isinstance(action, CaptureFrame):
        return f"capture_frame:{action.count}"
    if isinstance(action, PublishFrame):
        return f"publish_frame:{action.frame.frame_id}"
    if isinstance(action, PlayDeterrent):
        d = action.command.deterrent
        return f"play_deterrent:{d.kind.value}:alpha={d.alpha:.4f}"
    if isinstance(action, Flash):
        return f"flash:{action.freq_hz}hz:{action.duration_s}s"
    if isinstance(action, PreArm):
        return f"pre_arm:{action.ds}"
    if isinstance(action, LogAnomaly):
        return f"anomaly:{action.reason}"
    if isinstance(action, RunDetector):
        return f"run_detector:{action.frame.frame_id}"
    if isinstance(action, PublishRepelCommand):
        return f"publish_repel:{action.frame_id}"
    if isinstance(action, PublishNegativeDecision):
        return f"publish_negative:{action.decision.frame_id}"
    if isinstance(action, OfficerMessage):
        return f"officer_message:{action.record.frame_id}"
    if isinstance(action, Siren):
        return f"siren:{action.record.frame_id}"
    if isinstance(action, CnAnomaly):
        return f"anomaly:{action.reason}"
    return type(action).__name__


class _PnRuntime:
    def __init__(self, run: "_Run", config: PnConfig):
        self.run = run
        self.config = config
        self.node_id = config.node_id
        self.state = PnState.idle()
        self.state_log = [(0.0, self.state)]

    # -- event entry points --

    def on_window(self, detection) -> None:
        if detection.ds >= 1:
            # scores are recorded whether or not they trigger, which is what
            # lets the action log justify every later repel command
            self.run.log_action(
                self.node_id, self.state, self.state,
                f"seismic_score:ds={detection.ds}:run={detection.max_run}")
        self._dispatch(SeismicWindowReady(detection), detection=detection)

    def on_command(self, payload: dict) -> None:
        if payload.get("kind") == "repel":
            det = payload["deterrent"]
            command = RepelCommand(
                pn_id=payload["pn_id"], issued_at_s=payload["issued_at_s"],
                deterrent=ModificationParams(
                    kind=ModificationKind(det["kind"]), alpha=det["alpha"],
                    seed=det["seed"]),
                flash_freq_hz=payload["flash_freq_hz"],
                duration_s=payload["duration_s"])
            self._dispatch(CommandReceived(command))
        elif payload.get("kind") == "negative":
            decision = NegativeDecision(pn_id=payload["pn_id"],
                                        frame_id=payload["frame_id"],
                                        issued_at_s=payload["issued_at_s"])
            self._dispatch(CommandReceived(decision))
        else:
            self.run.log_action(self.node_id, self.state, self.state,
                                "anomaly:bad command payload")

    def on_timer(self, deadline_s: float) -> None:
        from .peripheral import TimerExpired
        self._dispatch(TimerExpired(deadline_s))

    # -- machinery --

    def _dispatch(self, event, detection=None) -> None:
        run = self.run
        now = run.net.now
        old = self.state
        new, actions = pn_step(old, event, self.config, now)
        self.state = new
        if new != old:
            self.state_log.append((now, new))
            if new.until_s is not None and \
                    (new.kind, new.until_s) != (old.kind, old.until_s):
                run.net.schedule(new.until_s,
                                 lambda d=new.until_s: self.on_timer(d))
            if new.kind != old.kind:
                run.publish_status(self, old.kind, new.kind)
        if new != old or actions:
            if actions:
                for action in actions:
                    run.log_action(self.node_id, old, new, _action_label(action))
            else:
                run.log_action(self.node_id, old, new, "")
        for action in actions:
            self._perform(action, detection)

    def _perform(self, action, detection) -> None:
        run = self.run
        if isinstance(action, CaptureFrame):
            widx = detection.window_index if detection is not None else -1
            for k in range(action.count):
                fid = f"{self.node_id}-w{widx:03d}"
                if action.count > 1:
                    fid += f"-c{k}"
                run.net.schedule_in(
                    run.config.capture_delay_s,
                    lambda f=fid: self._capture(f))
        elif isinstance(action, PublishFrame):
            run.publish_frame(self, action.frame)
        # PlayDeterrent / Flash / PreArm / LogAnomaly are fully described by
        # their action-log rows; nothing further runs in simulation

    def _capture(self, frame_id: str) -> None:
        run = self.run
        now = run.net.now
        frame = ThermalFrame(frame_id=frame_id, pn_id=self.node_id,
                             timestamp_s=now,
                             sim_ground_truth=run.thermal_truth(self.node_id, now))
        self._dispatch(FrameCaptured(frame))


class _CnRuntime:
    def __init__(self, run: "_Run", config: CnConfig, detector):
        self.run = run
        self.config = config
        self.detector = detector
        self.node_id = config.node_id
        self.state = CnState()

    def on_frame(self, payload: dict) -> None:
        frame = ThermalFrame(
            frame_id=payload["frame_id"], pn_id=payload["pn_id"],
            timestamp_s=payload["timestamp_s"], width=payload["width"],
            height=payload["height"],
            sim_ground_truth=payload["truth_present"])
        self._dispatch(FrameReceived(frame))

    def _dispatch(self, event) -> None:
        run = self.run
        now = run.net.now
        old = self.state
        new, actions = cn_step(old, event, self.config, now)
        self.state = new
        for action in actions:
            run.log_action(self.node_id, _cn_state_label(old),
                           _cn_state_label(new), _action_label(action),
                           raw_states=True)
            self._perform(action)

    def _perform(self, action) -> None:
        run = self.run
        if isinstance(action, RunDetector):
            frame = action.frame
            run.net.schedule_in(run.config.detector_delay_s,
                                lambda: self._decide(frame))
        elif isinstance(action, PublishRepelCommand):
            run.publish_command(self, action.command, action.frame_id)
        elif isinstance(action, PublishNegativeDecision):
            run.publish_negative(self, action.decision)
        elif isinstance(action, OfficerMessage):
            run.emit_warning(action.record)
        elif isinstance(action, Siren):
            run.emit_warning(action.record)

    def _decide(self, frame: ThermalFrame) -> None:
        decision = detect_frame(frame, self.detector, truth_from_frame(frame))
        self.run.detections.append({
            "t": self.run.net.now, "frame_id": decision.frame_id,
            "pn_id": frame.pn_id,
            "elephant_present": decision.elephant_present,
            "confidence": round(decision.confidence, 6)})
        self._dispatch(DetectorResult(decision))


def _cn_state_label(state: CnState) -> str:
    return f"pending={len(state.pending)}"


# ---- orchestration ----

class _Run:
    def __init__(self, scenario: Scenario, config: SimConfig,
                 out_dir: Path | None):
        self.scenario = scenario
        self.config = config
        mesh_cfg = scenario.network if scenario.network is not None else config.mesh
        mesh_cfg = replace(mesh_cfg,
                           seed=derive_seed(scenario.master_seed, "mesh"))
        self.net = MeshNetwork(mesh_cfg)
        self.actions: list[dict] = []
        self.detections: list[dict] = []
        self.memory_sink = MemorySink()
        self.sinks = [self.memory_sink]
        if out_dir is not None:
            # the sink appends, so reruns must start from an empty file for
            # the byte-identical determinism contract to hold
            warnings_path = out_dir / "warnings.jsonl"
            warnings_path.write_text("")
            self.sinks.append(JsonlSink(warnings_path))
        prefix = config.topic_prefix

        if scenario.detector == "oracle":
            detector = OracleDetector()
        else:
            detector = StochasticDetector(replace(
                config.detector_params,
                seed=derive_seed(scenario.master_seed, "detector")))
        self.cn = _CnRuntime(self, config.cn, detector)
        # the central node registers first so it re-subscribes first after
        # a failover, before any node re-sends buffered frames
        self.net.add_client(self.cn.node_id,
                            on_message=self._cn_message)
        self.net.subscribe(self.cn.node_id, f"{prefix}/pn/+/frame")

        self.pns: dict[str, _PnRuntime] = {}
        for placement in scenario.pns:
            pn_cfg = replace(config.pn_defaults, node_id=placement.node_id,
                             alg1=config.alg1)
            runtime = _PnRuntime(self, pn_cfg)
            self.pns[placement.node_id] = runtime
            self.net.add_client(placement.node_id,
                                on_message=self._pn_message)
            self.net.subscribe(placement.node_id,
                               f"{prefix}/cn/cmd/{placement.node_id}")
        heartbeat_and_failover(self.net)

    # -- mesh callbacks --

    def _cn_message(self, client_id: str, msg, t: float) -> None:
        if msg.payload.get("kind") == "frame":
            self.cn.on_frame(msg.payload)

    def _pn_message(self, client_id: str, msg, t: float) -> None:
        self.pns[client_id].on_command(msg.payload)

    # -- helpers used by the runtimes --

    def thermal_truth(self, pn_id: str, t: float) -> bool:
        hold = self.config.thermal_hold_s
        return any(
            ev.thermal_visible and pn_id in ev.pn_ids
            and ev.t_onset_s <= t <= ev.t_onset_s + ev.rumble.duration_s + hold
            for ev in self.scenario.events)

    def log_action(self, node: str, state_from, state_to, action: str,
                   raw_states: bool = False) -> None:
        if raw_states:
            frm, to = state_from, state_to
        else:
            frm, to = state_from.kind.value, state_to.kind.value
        self.actions.append({"t": self.net.now, "node": node,
                             "state_from": frm, "state_to": to,
                             "action": action})

    def publish_status(self, pn: _PnRuntime, old_kind, new_kind) -> None:
        self.net.publish(
            pn.node_id,
            f"{self.config.topic_prefix}/pn/{pn.node_id}/status",
            {"kind": "status", "pn_id": pn.node_id, "t": self.net.now,
             "state": new_kind.value, "previous": old_kind.value},
            qos=QoS.AT_MOST_ONCE)

    def publish_frame(self, pn: _PnRuntime, frame: ThermalFrame) -> None:
        self.net.publish(
            pn.node_id,
            f"{self.config.topic_prefix}/pn/{pn.node_id}/frame",
            {"kind": "frame", "frame_id": frame.frame_id,
             "pn_id": frame.pn_id, "timestamp_s": frame.timestamp_s,
             "width": frame.width, "height": frame.height,
             "pixels_b64": None, "truth_present": frame.sim_ground_truth},
            qos=QoS.AT_LEAST_ONCE)

    def publish_command(self, cn: _CnRuntime, command: RepelCommand,
                        frame_id: str) -> None:
        self.net.publish(
            cn.node_id,
            f"{self.config.topic_prefix}/cn/cmd/{command.pn_id}",
            {"kind": "repel", "pn_id": command.pn_id, "frame_id": frame_id,
             "issued_at_s": command.issued_at_s,
             "deterrent": {"kind": command.deterrent.kind.value,
                           "alpha": command.deterrent.alpha,
                           "seed": command.deterrent.seed},
             "flash_freq_hz": command.flash_freq_hz,
             "duration_s": command.duration_s},
            qos=QoS.AT_LEAST_ONCE)

    def publish_negative(self, cn: _CnRuntime,
                         decision: NegativeDecision) -> None:
        self.net.publish(
            cn.node_id,
            f"{self.config.topic_prefix}/cn/cmd/{decision.pn_id}",
            {"kind": "negative", "pn_id": decision.pn_id,
             "frame_id": decision.frame_id,
             "issued_at_s": decision.issued_at_s},
            qos=QoS.AT_LEAST_ONCE)

    def emit_warning(self, record) -> None:
        emit_warning(record, self.sinks)
        self.net.publish(
            self.cn.node_id,
            f"{self.config.topic_prefix}/cn/warning",
            record.to_record() | {"kind_tag": "warning"},
            qos=QoS.AT_LEAST_ONCE)


def run_scenario_with_logs(scenario: Scenario, config: SimConfig | None = None,
                           out_dir: str | Path | None = None
                           ) -> tuple[MetricsReport, RunLogs]:
    """Run one scenario end to end; returns the report plus the raw logs."""
    config = config if config is not None else SimConfig()
    resolved = out_dir if out_dir is not None else config.output_dir
    out = None
    if resolved is not None:
        out = Path(resolved)
        out.mkdir(parents=True, exist_ok=True)

    run = _Run(scenario, config, out)

    # seismic synthesis and window scoring, per node, up front; scores are
    # consumed by the event loop at each window's end time
    for placement in scenario.pns:
        pn_id = placement.node_id
        events = [(ev.t_onset_s, ev.rumble) for ev in scenario.events
                  if pn_id in ev.pn_ids]
        trace = synth_rumble_stream(
            events, total_s=scenario.duration_s,
            sample_rate_hz=config.seismic_rate_hz,
            seed=derive_seed(scenario.master_seed, "seismic", pn_id),
            noise_rms=config.noise_rms)
        runtime = run.pns[pn_id]
        for det in detect_stream(trace, config.alg1):
            t_ready = det.window_start_s + config.window_s
            run.net.schedule(t_ready, lambda r=runtime, d=det: r.on_window(d))

    run.net.run_until(scenario.duration_s)

    logs = RunLogs(
        delivery_trace=run.net.trace,
        actions=run.actions,
        warnings=[r.to_record() for r in run.memory_sink.records],
        detections=run.detections,
        state_logs={pn_id: rt.state_log for pn_id, rt in run.pns.items()},
    )
    report = compute_metrics(logs, scenario, config)

    if out is not None:
        run.net.write_trace_jsonl(out / "delivery_trace.jsonl")
        write_jsonl(logs.actions, out / "actions.jsonl")
        write_jsonl(logs.detections, out / "detections.jsonl")
        if not run.memory_sink.records:
            (out / "warnings.jsonl").write_text("")
        (out / "metrics.json").write_text(report.dumps())
    return report, logs


def run_scenario(scenario: Scenario, config: SimConfig | None = None,
                 out_dir: str | Path | None = None) -> MetricsReport:
    report, _ = run_scenario_with_logs(scenario, config, out_dir)
    return report


def example_scenario() -> Scenario:
    """Three riverside nodes, two elephant approaches in one minute."""
    return Scenario(
        name="river-crossing",
        duration_s=60.0,
        pns=(PnPlacement("pn-1", "river-east"),
             PnPlacement("pn-2", "river-ford"),
             PnPlacement("pn-3", "river-west")),
        events=(
            ElephantEvent(t_onset_s=8.25, pn_ids=("pn-1",),
                          rumble=RumbleSpec(duration_s=3.5, snr_db=18.0)),
            ElephantEvent(t_onset_s=28.3, pn_ids=("pn-3",),
                          rumble=RumbleSpec(duration_s=3.5, snr_db=14.0)),
        ),
        detector="oracle",
        master_seed=42,
    )
