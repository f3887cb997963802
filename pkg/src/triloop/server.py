"""Unified-namespace telemetry server.

Every sensor, actuator, derived electrical reading, and twin expectation
lives in a single addressable tree of nodes.  A 10 Hz pump advances the
plant in real time and refreshes node values — critical channels
(temperatures, flows, heater power) every cycle, auxiliary ones
(pressures, electrical/derived values, actuator readbacks, twin
expectations) once per second.  Clients speak newline-delimited JSON
over TCP:

    {"op": "read", "node": "TF11"}
        -> {"ok": true, "node": "TF11", "value": 26.36, "t": ..., "quality": "good"}
    {"op": "write", "node": "Heater_AO", "value": 35.0}
        -> {"ok": true} | {"ok": false, "err": "OutOfRange", "detail": ...}
    {"op": "subscribe", "nodes": ["TF11", "FT1"], "rate_hz": 10}
        -> {"ok": true, "id": 1}, then pushed
           {"op": "update", "t": ..., "values": {"TF11": 26.36, "FT1": 0.1269}}

Publishing is time-driven (the facility acquisition is fixed-rate), so an
unchanged value is still republished each period.  Writes apply to the
plant immediately but carry the pump's timestamp, so a paused plant ages
into "stale" quality instead of pretending to be live.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import gru
from .channels import (
    ACTUATOR_IDS,
    CSV_HEADER,
    MEASURED_IDS,
    OUTPUT_ORDER,
    frame_to_row,
    canonical_catalog,
    pack_input,
)
from .errors import (
    AccessDenied,
    MalformedMessage,
    OutOfRange,
    TriloopError,
    UnknownNode,
)
from .pipeline import T_ENC, zscore

log = logging.getLogger(__name__)

DEFAULT_PORT = 4840
PUMP_PERIOD_S = 0.1
BACKLOG_LIMIT_S = 2.0
STALE_AFTER_PERIODS = 3

#: Node ids refreshed at 10 Hz: temperatures, flows, heater power.
CRITICAL_IDS = tuple(
    cid for cid in MEASURED_IDS
    if canonical_catalog().spec(cid).sampling_class == "critical"
)
AUXILIARY_MEASURED_IDS = tuple(
    cid for cid in MEASURED_IDS if cid not in CRITICAL_IDS
)
WRITABLE_IDS = ACTUATOR_IDS + ("Demand_Elec",)
ELECTRICAL_IDS = ("Heater_Voltage", "Heater_Current")
DT_PREFIX = "dt_"

_WRITE_KWARG = {
    "Heater_AO": "heater_ao",
    "Pump1_AO": "pump1_hz",
    "Pump2_AO": "pump2_hz",
    "CR_AO": "cr_ao",
    "Demand_Elec": "demand_kw",
}


@dataclass
class Node:
    """One namespace entry; ``value is None`` means never populated (quality bad)."""

    id: str
    sampling_class: str          # critical | auxiliary
    writable: bool = False
    unit: str = ""
    value: float | None = None
    t_ms: float = 0.0

    @property
    def period_s(self) -> float:
        return PUMP_PERIOD_S if self.sampling_class == "critical" else 1.0

    def quality(self, now_ms: float) -> str:
        if self.value is None:
            return "bad"
        if now_ms - self.t_ms > STALE_AFTER_PERIODS * self.period_s * 1000.0:
            return "stale"
        return "good"


@dataclass
class Subscription:
    id: int
    nodes: tuple
    rate_hz: int


class _Client:
    """One TCP peer: its subscriptions plus a backlog-bounded outbox."""

    def __init__(self, writer):
        self.writer = writer
        self.subs: list[Subscription] = []
        self.outbox: deque = deque()      # (enqueue monotonic s, bytes)
        self.wakeup = asyncio.Event()
        self.inflight_since: float | None = None
        self.sender_task: asyncio.Task | None = None
        self.closed = False

    def oldest_pending_s(self) -> float | None:
        if self.inflight_since is not None:
            return self.inflight_since
        if self.outbox:
            return self.outbox[0][0]
        return None

    async def run_sender(self):
        try:
            while True:
                while not self.outbox:
                    self.wakeup.clear()
                    await self.wakeup.wait()
                enq_t, data = self.outbox.popleft()
                self.inflight_since = enq_t
                self.writer.write(data)
                await self.writer.drain()
                self.inflight_since = None
        except (ConnectionError, RuntimeError, asyncio.CancelledError):
            pass


def build_namespace() -> dict:
    """Every catalog channel, the electrical readings, and one ``dt_``
    expectation node per model output channel — each exactly once."""
    cat = canonical_catalog()
    nodes: dict[str, Node] = {}
    for cid in MEASURED_IDS:
        spec = cat.spec(cid)
        nodes[cid] = Node(cid, spec.sampling_class, unit=spec.unit)
    nodes["Demand_Elec"] = Node("Demand_Elec", "auxiliary", writable=True, unit="kW")
    for cid in ACTUATOR_IDS:
        spec = cat.spec(cid)
        nodes[cid] = Node(cid, "auxiliary", writable=True, unit=spec.unit)
    nodes["Heater_Voltage"] = Node("Heater_Voltage", "auxiliary", unit="V")
    nodes["Heater_Current"] = Node("Heater_Current", "auxiliary", unit="A")
    for cid in OUTPUT_ORDER:
        nid = DT_PREFIX + cid
        nodes[nid] = Node(nid, "auxiliary", unit=cat.spec(cid).unit)
    return nodes


def _write_bounds(node_id: str) -> tuple:
    spec = canonical_catalog().spec(node_id)
    return 0.0, spec.max_value


class TelemetryServer:
    """Owns a Simulator (and optionally a forecast model) and serves the tree.

    ``clock`` is injectable for tests that need to age node timestamps
    without sleeping.
    """

    def __init__(self, sim, *, host="127.0.0.1", port=DEFAULT_PORT, model=None,
                 token=None, log_path=None, send_buffer=None, clock=time.time):
        if model is not None and model.norm_stats is None:
            raise OutOfRange("twin model must carry normalization statistics")
        self.sim = sim
        self.model = model
        self.host = host
        self.port = port
        self.paused = False
        self.nodes = build_namespace()
        self._token = token
        self._log_path = log_path
        self._log_fh = None
        self._send_buffer = send_buffer
        self._clock = clock
        self._clients: set[_Client] = set()
        self._tick_index = 0
        self._sub_counter = 0
        self._last_pump_ms = self.now_ms()
        self._twin_window: deque = deque(maxlen=T_ENC)
        self._server: asyncio.AbstractServer | None = None
        self._pump_task: asyncio.Task | None = None

    # -- time ------------------------------------------------------------

    def now_ms(self) -> float:
        return self._clock() * 1000.0

    @property
    def client_count(self) -> int:
        return len(self._clients)

    # -- lifecycle -------------------------------------------------------

    async def start(self):
        self._server = await asyncio.start_server(self._handle_conn,
                                                  self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]
        self._last_pump_ms = self.now_ms()
        self._pump_task = asyncio.create_task(self._pump_loop())
        log.info("telemetry server on %s:%d (%d nodes)",
                 self.host, self.port, len(self.nodes))

    async def stop(self):
        if self._pump_task:
            self._pump_task.cancel()
            try:
                await self._pump_task
            except asyncio.CancelledError:
                pass
            self._pump_task = None
        for client in list(self._clients):
            self._drop_client(client)
        if self._server:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
        if self._log_fh:
            self._log_fh.close()
            self._log_fh = None

    def pause(self):
        """Freeze the plant pump; node timestamps age into staleness."""
        self.paused = True

    def resume(self):
        self.paused = False

    # -- pump ------------------------------------------------------------

    async def _pump_loop(self):
        loop = asyncio.get_running_loop()
        next_t = loop.time()
        while True:
            delay = next_t - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            self.pump_once()
            next_t += PUMP_PERIOD_S
            lag = loop.time() - next_t
            if lag > 1.0:
                log.warning("control deadline overrun: pump %.0f ms behind",
                            lag * 1000.0)
                next_t = loop.time()

    def pump_once(self):
        """One 100 ms cycle: advance plant, refresh nodes, publish, police backlogs.

        While paused the plant and the node stamps freeze (readings age into
        staleness) but publishing and backlog policing keep running.
        """
        self._tick_index += 1
        on_second = self._tick_index % 10 == 0
        if not self.paused:
            self.sim.tick()
            # Stamp after the advance so readings are fresh even when the
            # first tick pays one-time compilation cost.
            now = self.now_ms()
            self._last_pump_ms = now
            frame = self.sim.measure()
            for cid in CRITICAL_IDS:
                self._set(cid, frame.values[cid], now)
            if on_second:
                for cid in AUXILIARY_MEASURED_IDS:
                    self._set(cid, frame.values[cid], now)
                self._set("Demand_Elec", frame.demand_elec, now)
                for cid in ACTUATOR_IDS:
                    self._set(cid, frame.actuators[cid], now)
                volt, curr = self.sim.electrical_readings()
                self._set("Heater_Voltage", volt, now)
                self._set("Heater_Current", curr, now)
                self._feed_twin(frame, now)
                self._log_row(frame)
        self._publish(self.now_ms(), on_second)
        self._police_backlogs()

    def _log_row(self, frame):
        if not self._log_path:
            return
        if self._log_fh is None:
            self._log_fh = open(self._log_path, "w", encoding="utf-8",
                                newline="\n")
            self._log_fh.write(CSV_HEADER + "\n")
        row = frame_to_row(frame)
        self._log_fh.write(",".join(f"{x:.12g}" for x in row) + "\n")
        self._log_fh.flush()

    def _set(self, node_id, value, now_ms):
        node = self.nodes[node_id]
        node.value = float(value)
        node.t_ms = now_ms

    def _feed_twin(self, frame, now_ms):
        if self.model is None:
            return
        self._twin_window.append(pack_input(frame))
        if len(self._twin_window) < T_ENC:
            return
        stats = self.model.norm_stats
        window = zscore(stats, np.stack(self._twin_window))
        pred = gru.predict(window, self.model)[0]
        physical = zscore(stats, pred[None, :], "inverse")[0]
        if not np.all(np.isfinite(physical)):
            log.warning("twin prediction non-finite; expectation nodes not updated")
            return
        for cid, value in zip(OUTPUT_ORDER, physical):
            self._set(DT_PREFIX + cid, value, now_ms)

    def _publish(self, now_ms, on_second):
        for client in list(self._clients):
            for sub in client.subs:
                if sub.rate_hz == 1 and not on_second:
                    continue
                values = {nid: self.nodes[nid].value for nid in sub.nodes}
                line = json.dumps({"op": "update", "t": now_ms,
                                   "values": values}) + "\n"
                self._enqueue(client, line)

    def _police_backlogs(self):
        now = time.monotonic()
        for client in list(self._clients):
            oldest = client.oldest_pending_s()
            if oldest is not None and now - oldest > BACKLOG_LIMIT_S:
                log.warning("dropping client: %.1f s of undelivered backlog",
                            now - oldest)
                self._drop_client(client)

    # -- protocol --------------------------------------------------------

    def handle_request(self, msg, client=None) -> dict:
        """Dispatch one decoded request; errors become ``ok:false`` replies."""
        try:
            if not isinstance(msg, dict) or not isinstance(msg.get("op"), str):
                raise MalformedMessage("message must be an object with an 'op' string")
            if self._token is not None and msg.get("token") != self._token:
                raise AccessDenied("missing or invalid token")
            op = msg["op"]
            if op == "read":
                return self._op_read(msg)
            if op == "write":
                return self._op_write(msg)
            if op == "subscribe":
                if client is None:
                    raise MalformedMessage("subscribe requires a connection")
                return self._op_subscribe(msg, client)
            raise MalformedMessage(f"unknown op {op!r}")
        except TriloopError as exc:
            return {"ok": False, "err": type(exc).__name__, "detail": str(exc)}

    def _lookup(self, msg) -> Node:
        node_id = msg.get("node")
        if not isinstance(node_id, str):
            raise MalformedMessage("request needs a 'node' string")
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node named {node_id!r}") from None

    def _op_read(self, msg) -> dict:
        node = self._lookup(msg)
        return {"ok": True, "node": node.id, "value": node.value,
                "t": node.t_ms, "quality": node.quality(self.now_ms())}

    def _op_write(self, msg) -> dict:
        node = self._lookup(msg)
        if not node.writable:
            raise AccessDenied(f"{node.id} is read-only")
        value = msg.get("value")
        if not isinstance(value, (int, float)) or isinstance(value, bool) \
                or not math.isfinite(value):
            raise MalformedMessage("write needs a finite numeric 'value'")
        lo, hi = _write_bounds(node.id)
        if not lo <= value <= hi:
            raise OutOfRange(f"{node.id} value {value} outside {lo}..{hi}")
        self.sim.apply(**{_WRITE_KWARG[node.id]: float(value)})
        self._refresh_command_nodes()
        return {"ok": True}

    def _refresh_command_nodes(self):
        """Readbacks update immediately, but stamped with the pump's time so a
        paused plant reads back stale rather than live."""
        st = self.sim.state
        readback = {"Heater_AO": st.heater_cmd_pct, "Pump1_AO": st.pump1_hz,
                    "Pump2_AO": st.pump2_hz, "CR_AO": st.rod_position,
                    "Demand_Elec": st.demand_kw}
        for nid, value in readback.items():
            node = self.nodes[nid]
            node.value = float(value)
            node.t_ms = self._last_pump_ms

    def _op_subscribe(self, msg, client) -> dict:
        nodes = msg.get("nodes")
        if not isinstance(nodes, list) or not nodes:
            raise MalformedMessage("subscribe needs a non-empty 'nodes' list")
        for nid in nodes:
            if not isinstance(nid, str):
                raise MalformedMessage("node ids must be strings")
            if nid not in self.nodes:
                raise UnknownNode(f"no node named {nid!r}")
        rate = msg.get("rate_hz")
        if rate not in (1, 10):
            raise OutOfRange("rate_hz must be 1 or 10")
        if rate == 10:
            slow = [nid for nid in nodes
                    if self.nodes[nid].sampling_class != "critical"]
            if slow:
                raise OutOfRange(
                    f"auxiliary nodes publish at 1 Hz: {', '.join(slow)}")
        self._sub_counter += 1
        client.subs.append(Subscription(self._sub_counter, tuple(nodes), rate))
        return {"ok": True, "id": self._sub_counter}

    # -- connections -----------------------------------------------------

    async def _handle_conn(self, reader, writer):
        sock = writer.get_extra_info("socket")
        if self._send_buffer and sock is not None:
            import socket as _socket
            sock.setsockopt(_socket.SOL_SOCKET, _socket.SO_SNDBUF,
                            self._send_buffer)
            writer.transport.set_write_buffer_limits(high=self._send_buffer)
        client = _Client(writer)
        client.sender_task = asyncio.create_task(client.run_sender())
        self._clients.add(client)
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                line = line.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line.decode("utf-8"))
                except (UnicodeDecodeError, ValueError):
                    self._enqueue(client, json.dumps(
                        {"ok": False, "err": "MalformedMessage",
                         "detail": "invalid JSON"}) + "\n")
                    continue
                reply = self.handle_request(msg, client)
                self._enqueue(client, json.dumps(reply) + "\n")
        except (ConnectionError, asyncio.LimitOverrunError, ValueError):
            pass
        finally:
            self._drop_client(client)

    def _enqueue(self, client, line: str):
        if client.closed:
            return
        client.outbox.append((time.monotonic(), line.encode("utf-8")))
        client.wakeup.set()

    def _drop_client(self, client):
        if client.closed:
            return
        client.closed = True
        self._clients.discard(client)
        client.subs.clear()
        if client.sender_task:
            client.sender_task.cancel()
        transport = client.writer.transport
        if transport is not None:
            transport.abort()


async def run_until(server: TelemetryServer, seconds: float | None):
    """Start a server and run for ``seconds`` (forever when None)."""
    await server.start()
    try:
        if seconds is None:
            await asyncio.Event().wait()
        else:
            await asyncio.sleep(seconds)
    finally:
        await server.stop()
