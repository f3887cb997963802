"""HTTP bridge for dashboards.

Wraps a running :class:`~triloop.server.TelemetryServer` in a small REST
surface so browser clients never speak the raw TCP protocol:

* ``GET  /api/state``   — full namespace snapshot
* ``GET  /api/stream``  — the same snapshot as 1 Hz server-sent events
* ``POST /api/command`` — actuator/demand write, validated server-side
* ``POST /api/assist``  — operator question answered from live data

The gateway reads the node tree in-process; it is a view, not a second
source of truth.
"""

from __future__ import annotations

import asyncio
import json

from fastapi import FastAPI
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from .assistant import TwinExpectation, answer_query
from .channels import ACTUATOR_IDS, MEASURED_IDS, OUTPUT_ORDER, SensorFrame
from .errors import TriloopError
from .server import DT_PREFIX, TelemetryServer

STREAM_PERIOD_S = 1.0

_HTTP_STATUS = {
    "UnknownNode": 404,
    "AccessDenied": 403,
    "OutOfRange": 400,
    "MalformedMessage": 400,
}


class CommandBody(BaseModel):
    node: str
    value: float


class AssistBody(BaseModel):
    query: str


def _snapshot(server: TelemetryServer) -> dict:
    now = server.now_ms()
    nodes = {
        nid: {"value": node.value, "t": node.t_ms,
              "quality": node.quality(now), "writable": node.writable}
        for nid, node in server.nodes.items()
    }
    return {"t": now, "nodes": nodes}


def _frame_from_nodes(server: TelemetryServer) -> SensorFrame:
    """Reassemble a sensor frame from the live namespace for the assistant."""
    values = {}
    for cid in MEASURED_IDS:
        v = server.nodes[cid].value
        if v is None:
            raise TriloopError(f"node {cid} not yet populated")
        values[cid] = v
    actuators = {cid: server.nodes[cid].value or 0.0 for cid in ACTUATOR_IDS}
    demand = server.nodes["Demand_Elec"].value or 0.0
    t_s = server.nodes["TF11"].t_ms / 1000.0
    return SensorFrame(t=t_s, values=values, demand_elec=demand,
                       actuators=actuators)


def _twin_from_nodes(server: TelemetryServer) -> TwinExpectation | None:
    dt_values = {}
    for cid in OUTPUT_ORDER:
        node = server.nodes[DT_PREFIX + cid]
        if node.value is None:
            return None
        dt_values[node.id] = node.value
    demand = server.nodes["Demand_Elec"].value or 0.0
    return TwinExpectation.from_nodes(demand, dt_values)


def build_gateway(server: TelemetryServer, *, backend=None) -> FastAPI:
    """REST app over one server instance; ``backend`` is the optional
    chat-completion endpoint for /api/assist (rule fallback otherwise)."""
    app = FastAPI(title="triloop gateway", docs_url=None, redoc_url=None)

    @app.get("/api/state")
    def state() -> dict:
        return _snapshot(server)

    @app.get("/api/stream")
    async def stream(limit: int | None = None) -> StreamingResponse:
        # ``limit`` bounds the event count (handy for curl and tests);
        # dashboards omit it and read forever.
        async def gen():
            sent = 0
            while limit is None or sent < limit:
                yield f"data: {json.dumps(_snapshot(server))}\n\n"
                sent += 1
                if limit is None or sent < limit:
                    await asyncio.sleep(STREAM_PERIOD_S)

        return StreamingResponse(gen(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    @app.post("/api/command")
    def command(body: CommandBody) -> JSONResponse:
        reply = server.handle_request(
            {"op": "write", "node": body.node, "value": body.value})
        status = 200 if reply["ok"] else _HTTP_STATUS.get(reply["err"], 400)
        return JSONResponse(reply, status_code=status)

    @app.post("/api/assist")
    def assist(body: AssistBody) -> JSONResponse:
        try:
            frame = _frame_from_nodes(server)
            voltage = server.nodes["Heater_Voltage"].value or 0.0
            current = server.nodes["Heater_Current"].value or 0.0
            reply = answer_query(body.query, frame, voltage, current,
                                 twin=_twin_from_nodes(server), backend=backend)
        except TriloopError as exc:
            return JSONResponse({"ok": False, "err": type(exc).__name__,
                                 "detail": str(exc)}, status_code=503)
        advisory = reply.advisory.to_dict() if reply.advisory else None
        return JSONResponse({"ok": True, "response": reply.text,
                             "advisory": advisory,
                             "fallback": reply.used_fallback})

    return app


async def serve_with_gateway(server: TelemetryServer, *, gateway_host="127.0.0.1",
                             gateway_port=8000, backend=None,
                             run_seconds=None) -> None:
    """Run the TCP server and the HTTP gateway on one event loop."""
    import uvicorn

    app = build_gateway(server, backend=backend)
    await server.start()
    config = uvicorn.Config(app, host=gateway_host, port=gateway_port,
                            log_level="warning", lifespan="off")
    http = uvicorn.Server(config)
    task = asyncio.create_task(http.serve())
    try:
        if run_seconds is None:
            await task
        else:
            await asyncio.sleep(run_seconds)
    finally:
        http.should_exit = True
        try:
            await asyncio.wait_for(task, timeout=5.0)
        except (asyncio.TimeoutError, asyncio.CancelledError):
            task.cancel()
        await server.stop()
