"""Command-line workbench.

One verb per workflow stage::

    simulate     run a scripted scenario and write the 1 Hz frames as CSV
    gen-dataset  produce the demand-following training dataset
    train        fit the forecaster on a dataset CSV
    evaluate     score a checkpoint on a dataset's held-out tail
    sweep        train the full width x depth grid and tabulate losses
    twin         roll the surrogate to steady state for a demand setpoint
    serve        run the telemetry server (plant or twin mode)
    assist       answer an operator question from a facility snapshot

Exit status: 0 success, 1 domain error (printed verbatim), 2 usage error.
All artifact-producing verbs are bit-reproducible for a fixed ``--seed``;
wall-clock fields in reports are the one deliberate exception.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import socket
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import gru, pipeline
from .assistant import ChatBackend, TwinExpectation, answer_query
from .channels import (
    MEASURED_IDS,
    OUTPUT_ORDER,
    read_dataset,
    read_dataset_matrix,
    write_dataset,
    pack_input,
)
from .errors import TriloopError
from .plant import (
    PlantConfig,
    Scenario,
    Simulator,
    dataset_scenario,
    idle_scenario,
    staircase_scenario,
)
from .server import DT_PREFIX, TelemetryServer, run_until
from .twin import rollout, speedup_report

_SCENARIO_NAMES = ("staircase", "idle", "dataset")


def _load_config(path) -> PlantConfig:
    return PlantConfig.from_file(path) if path else PlantConfig()


def _load_scenario(name_or_path: str, config: PlantConfig) -> Scenario:
    if name_or_path == "staircase":
        return staircase_scenario(config)
    if name_or_path == "idle":
        return idle_scenario()
    if name_or_path == "dataset":
        return dataset_scenario()
    return Scenario.from_file(name_or_path)


# ---------------------------------------------------------------------------
# verbs


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    scenario = _load_scenario(args.scenario, config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.no_noise:
        overrides["noise_enabled"] = False
    if overrides:
        scenario = replace(scenario, **overrides)
    frames = Simulator(config).run(scenario)
    write_dataset(args.out, frames)
    print(f"simulate: {len(frames)} frames ({scenario.duration_s:.0f} s) "
          f"-> {args.out}")
    return 0


def cmd_gen_dataset(args) -> int:
    config = _load_config(args.config)
    scenario = dataset_scenario(steps=args.steps, seed=args.seed,
                                noise_enabled=not args.no_noise)
    frames = Simulator(config).run(scenario)
    write_dataset(args.out, frames)
    print(f"gen-dataset: {len(frames)} rows -> {args.out}")
    return 0


def _train_config(args) -> pipeline.TrainConfig:
    return pipeline.TrainConfig(
        hidden=args.hidden, layers=args.layers, batch=args.batch, lr=args.lr,
        early_stop_patience=args.patience, max_epochs=args.max_epochs,
        seed=args.seed)


def cmd_train(args) -> int:
    trajectory = read_dataset_matrix(args.data)
    splits = pipeline.prepare_dataset(trajectory)
    model, history = pipeline.train(splits, _train_config(args))
    gru.save_checkpoint(model, args.out)
    if args.history:
        pipeline.save_history(history, args.history)
    best_val = min(r.valid_loss for r in history)
    print(f"train: {len(history)} epochs, best validation loss "
          f"{best_val:.6g} -> {args.out}")
    metrics = pipeline.evaluate(model, splits.X_test, splits.Y_test)
    for group in pipeline.GroupMetrics.GROUPS:
        print(f"  test {group}: mae {metrics.mae[group]:.4g} "
              f"rmse {metrics.rmse[group]:.4g}")
    return 0


def _windows_with_model_stats(model, trajectory, index_range):
    samples = pipeline.make_windows(index_range, trajectory)
    X = pipeline.zscore(model.norm_stats, np.stack([s.input for s in samples]))
    Y = pipeline.zscore(model.norm_stats, np.stack([s.target for s in samples]))
    return X, Y


def cmd_evaluate(args) -> int:
    model = gru.load_checkpoint(args.model)
    trajectory = read_dataset_matrix(args.data)
    _, _, test_range = pipeline.split_sequential(trajectory.shape[0])
    X, Y = _windows_with_model_stats(model, trajectory, test_range)
    metrics = pipeline.evaluate(model, X, Y)
    doc = {"windows": int(X.shape[0]), "mae": metrics.mae,
           "rmse": metrics.rmse}
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"evaluate: {X.shape[0]} held-out windows from {args.data}")
    for group in pipeline.GroupMetrics.GROUPS:
        print(f"  {group}: mae {metrics.mae[group]:.4g} "
              f"rmse {metrics.rmse[group]:.4g}")
    return 0


def cmd_sweep(args) -> int:
    trajectory = read_dataset_matrix(args.data)
    splits = pipeline.prepare_dataset(trajectory)
    cfg = _train_config(args)
    cells = pipeline.sweep_grid()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(pipeline.sweep_cell, splits, cfg, h, l)
                       for h, l in cells]
            result = pipeline.assemble_sweep(f.result() for f in futures)
    else:
        result = pipeline.sweep(splits, cfg)
    pipeline.save_sweep(result, args.out)
    print(f"sweep: {len(result.rows)} cells -> {args.out}")
    print(f"  best (hidden, layers): {result.best}; "
          f"adopted default: {result.adopted_default}")
    return 0


def cmd_twin(args) -> int:
    model = gru.load_checkpoint(args.model)
    if args.data:
        trajectory = read_dataset_matrix(args.data)
        if trajectory.shape[0] < pipeline.T_ENC:
            raise TriloopError(
                f"--data needs at least {pipeline.T_ENC} rows for a window")
        window = trajectory[-pipeline.T_ENC:, pipeline.INPUT_COLUMN_IDX]
    else:
        window = _idle_window(_load_config(args.config))
    result = rollout(model, window, args.demand, max_steps=args.max_steps)
    report = speedup_report(result)
    report["demand_kw"] = args.demand
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    state = (f"steady at step {result.convergence_step}" if result.converged
             else "not converged")
    print(f"twin: demand {args.demand:g} kW, {result.steps_run} steps, "
          f"{state}, {result.wall_clock_s * 1e3:.1f} ms wall "
          f"({result.speedup:.0f}x real time)")
    return 0


def _idle_window(config: PlantConfig) -> np.ndarray:
    """30 s of energized-standby frames as the default rollout seed."""
    sim = Simulator(config, noise_enabled=False)
    sim.apply(heater_ao=100.0, pump1_hz=10.0, pump2_hz=10.0, cr_ao=100.0)
    sim.advance_seconds(30)
    rows = []
    for _ in range(pipeline.T_ENC):
        rows.append(pack_input(sim.measure()))
        sim.advance_seconds(1)
    return np.stack(rows)


def cmd_serve(args) -> int:
    config = _load_config(args.config)
    sim = Simulator(config, noise_enabled=not args.no_noise, seed=args.seed,
                    control_mode="demand_follow")
    sim.apply(heater_ao=100.0, pump1_hz=10.0, pump2_hz=10.0, cr_ao=100.0)
    model = gru.load_checkpoint(args.model) if args.twin else None
    server = TelemetryServer(sim, host=args.host, port=args.port, model=model,
                             token=args.token, log_path=args.log)
    mode = "twin" if args.twin else "plant"
    print(f"serve: {mode} mode on {args.host}:{args.port}"
          + (f", gateway :{args.gateway_port}" if args.gateway_port else ""))
    try:
        if args.gateway_port:
            from .gateway import serve_with_gateway
            asyncio.run(serve_with_gateway(
                server, gateway_host=args.host,
                gateway_port=args.gateway_port,
                backend=ChatBackend.from_env(),
                run_seconds=args.run_seconds))
        else:
            asyncio.run(run_until(server, args.run_seconds))
    except KeyboardInterrupt:
        pass
    return 0


def _assist_backend(args) -> ChatBackend | None:
    if args.backend == "fallback":
        return None
    if args.backend:
        return ChatBackend(base_url=args.backend,
                           api_key=os.environ.get("ASSISTANT_API_KEY"),
                           model=os.environ.get("ASSISTANT_MODEL", "gpt-4o"))
    return ChatBackend.from_env()


def _snapshot_from_server(address: str):
    host, _, port = address.rpartition(":")
    with socket.create_connection((host or "127.0.0.1", int(port)),
                                  timeout=10.0) as sock:
        fh = sock.makefile("rw", encoding="utf-8", newline="\n")

        def read_node(nid):
            fh.write(json.dumps({"op": "read", "node": nid}) + "\n")
            fh.flush()
            while True:
                reply = json.loads(fh.readline())
                if reply.get("op") != "update":
                    if not reply.get("ok"):
                        raise TriloopError(
                            f"telemetry read of {nid} failed: {reply.get('err')}")
                    return reply

        values = {cid: read_node(cid)["value"] for cid in MEASURED_IDS}
        actuators = {cid: read_node(cid)["value"]
                     for cid in ("Heater_AO", "Pump1_AO", "Pump2_AO", "CR_AO")}
        demand = read_node("Demand_Elec")["value"] or 0.0
        t_s = read_node("TF11")["t"] / 1000.0
        voltage = read_node("Heater_Voltage")["value"] or 0.0
        current = read_node("Heater_Current")["value"] or 0.0
        dt_nodes = {DT_PREFIX + cid: read_node(DT_PREFIX + cid)["value"]
                    for cid in OUTPUT_ORDER}
    if any(v is None for v in values.values()):
        raise TriloopError("server has not published a full frame yet")
    from .channels import SensorFrame
    frame = SensorFrame(t=t_s, values=values, demand_elec=demand,
                        actuators={k: v or 0.0 for k, v in actuators.items()})
    twin = None
    if all(v is not None for v in dt_nodes.values()):
        twin = TwinExpectation.from_nodes(demand, dt_nodes)
    return frame, voltage, current, twin


def _electricals_for_frame(config: PlantConfig, frame):
    """Project heater V/I from the frame's actuator readbacks."""
    sim = Simulator(config, noise_enabled=False)
    sim.state.heater_cmd_pct = frame.actuators.get("Heater_AO", 0.0)
    sim.state.rod_position = frame.actuators.get("CR_AO", 0.0)
    return sim.electrical_readings()


def cmd_assist(args) -> int:
    config = _load_config(args.config)
    if args.server:
        frame, voltage, current, twin = _snapshot_from_server(args.server)
    elif args.data:
        frame = read_dataset(args.data)[-1]
        voltage, current = _electricals_for_frame(config, frame)
        twin = None
    else:
        sim = Simulator(config, noise_enabled=False)
        sim.apply(heater_ao=100.0, pump1_hz=10.0, pump2_hz=10.0, cr_ao=100.0)
        sim.advance_seconds(30)
        frame = sim.measure()
        voltage, current = sim.electrical_readings()
        twin = None
    reply = answer_query(args.query, frame, voltage, current, twin=twin,
                         backend=_assist_backend(args))
    print(reply.text, end="" if reply.text.endswith("\n") else "\n")
    if args.json:
        doc = {"response": reply.text, "fallback": reply.used_fallback,
               "advisory": reply.advisory.to_dict() if reply.advisory else None}
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--hidden", type=int, default=256,
                   choices=gru.HIDDEN_WIDTHS, help="GRU hidden width")
    p.add_argument("--layers", type=int, default=2,
                   choices=gru.LAYER_COUNTS, help="stacked GRU layers")
    p.add_argument("--batch", type=int, default=128, help="mini-batch size")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    p.add_argument("--patience", type=int, default=100,
                   help="early-stop patience, epochs")
    p.add_argument("--max-epochs", type=int, default=2000,
                   help="hard epoch cap")
    p.add_argument("--seed", type=int, default=0, help="training seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triloop",
        description="Three-loop facility workbench: plant simulation, "
                    "surrogate training, twin rollout, telemetry, assistant.")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="verb")

    p = sub.add_parser("simulate", help="run a scripted scenario to CSV")
    p.add_argument("--scenario", default="staircase",
                   help="named scenario (%s) or a TOML/JSON file"
                        % "/".join(_SCENARIO_NAMES))
    p.add_argument("--out", default="run.csv", help="output CSV path")
    p.add_argument("--config", help="plant config TOML/JSON")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--no-noise", action="store_true",
                   help="disable sensor noise")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen-dataset", help="generate the training dataset")
    p.add_argument("--steps", type=int, default=3706,
                   help="number of 1 Hz rows")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--out", default="dataset.csv", help="output CSV path")
    p.add_argument("--config", help="plant config TOML/JSON")
    p.add_argument("--no-noise", action="store_true",
                   help="disable sensor noise")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train", help="train the forecaster on a dataset")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--out", default="model.json", help="checkpoint path")
    p.add_argument("--history", help="optional epoch-history CSV")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on held-out data")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--json", help="optional metrics JSON path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="train the width x depth grid")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--out", default="sweep.csv", help="result table CSV")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("twin", help="roll the surrogate to steady state")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--demand", type=float, default=1.889,
                   help="electric demand, kW")
    p.add_argument("--max-steps", type=int, default=1000,
                   help="prediction cap")
    p.add_argument("--data", help="seed the window from this CSV's tail")
    p.add_argument("--report", help="write the rollout report JSON here")
    p.add_argument("--config", help="plant config TOML/JSON")
    p.set_defaults(func=cmd_twin)

    p = sub.add_parser("serve", help="run the telemetry server")
    p.add_argument("--host", default="127.0.0.1", help="bind address")
    p.add_argument("--port", type=int, default=4840, help="telemetry TCP port")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--plant", action="store_true",
                      help="plant mode: no expectation nodes (default)")
    mode.add_argument("--twin", action="store_true",
                      help="twin mode: publish dt_ expectation nodes")
    p.add_argument("--model", help="checkpoint for --twin mode")
    p.add_argument("--gateway-port", type=int,
                   help="also serve the HTTP dashboard gateway on this port")
    p.add_argument("--run-seconds", type=float,
                   help="stop after this long (default: run forever)")
    p.add_argument("--log", help="append 1 Hz frames to this CSV")
    p.add_argument("--token", help="require this access token on all requests")
    p.add_argument("--no-noise", action="store_true",
                   help="disable sensor noise")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--config", help="plant config TOML/JSON")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("assist", help="answer an operator question")
    p.add_argument("--query", required=True, help="the question text")
    p.add_argument("--backend",
                   help="chat backend base URL, or 'fallback' to force the "
                        "rule-based advisor (default: ASSISTANT_BASE_URL env)")
    p.add_argument("--server", help="snapshot a live server, host:port")
    p.add_argument("--data", help="snapshot the last row of this CSV")
    p.add_argument("--json", help="also write the reply as JSON here")
    p.add_argument("--config", help="plant config TOML/JSON")
    p.set_defaults(func=cmd_assist)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if getattr(args, "twin", False) and not args.model:
        print("usage error: --twin requires --model", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (TriloopError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
