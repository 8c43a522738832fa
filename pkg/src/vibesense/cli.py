"""Orchestration command line.

Subcommands::

    vibesense simulate --scenario s.json --out dir [--seed N]
    vibesense hub serve [--http-port P] [--udp-port P] [--environment env.txt]
                        [--sensor sensor.json] [--ui-dir dir]
                        [--status-push-url URL] [--status-push-period S]
    vibesense analyze snr --segment f.vseg --out dir [--bucket-s S]
    vibesense analyze spectrogram --segment f.vseg --out dir [--window-len N] [--hop-len N]
    vibesense analyze tsne (--features f.csv | --run dir) --out dir
                        [--perplexity P] [--iters N] [--seed N]
    vibesense train --run dir --out weights.bin [--epochs N] [--seed N]
    vibesense recommend repl --environment env.txt [--sensor sensor.json]
    vibesense recommend serve --environment env.txt [--sensor sensor.json]
                        [--http-port P] [--ui-dir dir]

The LLM endpoint is configured through VIBESENSE_LLM_ENDPOINT /
VIBESENSE_LLM_MODEL; without an endpoint the deterministic expert answers.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dsp, features, hubserver, runner, scenario, segments
from .hub import EdgeHub, HubConfig
from .recognize import TCNConfig, TrainConfig, TSNEConfig, save_weights, train, tsne
from .recommend.engine import DialogEngine
from .recommend.llmclient import LLMClient
from .recommend.schema import SensorSpec, parse_environment


def _load_engine(args) -> DialogEngine:
    graph = parse_environment(Path(args.environment).read_text())
    sensor = SensorSpec.from_dict(json.loads(Path(args.sensor).read_text())) if args.sensor else SensorSpec()
    return DialogEngine(graph, sensor, llm=LLMClient.from_env(os.environ))


def _cmd_simulate(args) -> int:
    scn = scenario.load_scenario(args.scenario)
    if args.seed is not None:
        scn.seed = args.seed
        scn.raw["seed"] = args.seed
    report = runner.run_scenario(scn, args.out)
    print(json.dumps(report.to_dict(), indent=2))
    return 0 if report.ok else 1


def _cmd_hub_serve(args) -> int:
    hub = EdgeHub(HubConfig())
    recommend = None
    if args.environment:
        recommend = hubserver.RecommendService(_load_engine(args))
    server = hubserver.HubServer(
        hub,
        host=args.host,
        http_port=args.http_port,
        udp_port=args.udp_port,
        recommend=recommend,
        ui_dir=Path(args.ui_dir) if args.ui_dir else None,
        status_push_url=args.status_push_url,
        status_push_period_s=args.status_push_period,
    )
    server.start()
    print(f"hub: udp {server.udp_port}, http {server.http_port} (Ctrl-C stops)")
    try:
        while True:
            import time

            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
    return 0


def _cmd_analyze_snr(args) -> int:
    seg = segments.read_segment(args.segment)
    rate = seg.nominal_rate_hz or 7000
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    series = dsp.bucketed_snr_series(seg.to_array(fill=0), rate, args.bucket_s)
    normalized = dsp.min_max_normalize(series)
    with open(out / "snr_series.csv", "w") as fh:
        fh.write("bucket,snr_db,normalized\n")
        for i, (raw, norm) in enumerate(zip(series, normalized)):
            fh.write(f"{i},{raw:.6f},{norm:.6f}\n")
    ac = dsp.circular_autocorrelation(series)
    with open(out / "snr_autocorr.csv", "w") as fh:
        fh.write("lag,autocorrelation\n")
        for lag, val in enumerate(ac):
            fh.write(f"{lag},{val:.6f}\n")
    peak = dsp.dominant_period(series)
    print(f"{len(series)} buckets, dominant period {peak} buckets")
    return 0


def _cmd_analyze_spectrogram(args) -> int:
    seg = segments.read_segment(args.segment)
    rate = seg.nominal_rate_hz or 7000
    params = dsp.SpectrogramParams(window_len=args.window_len, hop_len=args.hop_len)
    times, freqs, mag = dsp.spectrogram(seg.to_array(fill=0), rate, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "spectrogram.csv", "w") as fh:
        fh.write("time_s," + ",".join(f"{f:.3f}" for f in freqs) + "\n")
        for t, row in zip(times, mag):
            fh.write(f"{t:.6f}," + ",".join(f"{v:.6g}" for v in row) + "\n")
    print(f"{mag.shape[0]} frames x {mag.shape[1]} bins -> {out / 'spectrogram.csv'}")
    return 0


def _cmd_analyze_tsne(args) -> int:
    if args.features:
        x, labels, _ = features.read_features_csv(args.features)
    else:
        ds = features.build_event_dataset(args.run)
        x = ds.features
        labels = [ds.label_names[i] for i in ds.labels]
    cfg = TSNEConfig(perplexity=args.perplexity, n_iter=args.iters, rng_seed=args.seed)
    result = tsne(x, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "embedding.csv", "w") as fh:
        fh.write("x,y,label\n")
        for (ex, ey), label in zip(result.embedding, labels):
            fh.write(f"{ex:.6f},{ey:.6f},{label}\n")
    with open(out / "kl_trace.csv", "w") as fh:
        fh.write("iteration,kl\n")
        for i, kl in enumerate(result.kl_trace):
            fh.write(f"{i},{kl:.6f}\n")
    print(f"n={len(x)}, initial KL {result.kl_trace[0]:.4f}, final KL {result.final_kl:.4f}")
    return 0


def _cmd_train(args) -> int:
    ds = features.build_event_dataset(args.run)
    n_bins, n_frames = ds.windows.shape[1], ds.windows.shape[2]
    config = TCNConfig(
        input_window=n_frames,
        in_channels=n_bins,
        n_layers=3,
        hidden_channels=16,
        kernel_size=3,
        latent_dim=16,
        n_classes=len(ds.label_names),
    )
    weights, trace = train(
        ds.windows,
        ds.labels,
        config,
        TrainConfig(epochs=args.epochs, seed=args.seed),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_weights(out, config, weights)
    with open(out.with_suffix(".loss.csv"), "w") as fh:
        fh.write("epoch,loss,ce,mse,train_accuracy\n")
        for row in trace:
            fh.write(
                f"{row['epoch']},{row['loss']:.6f},{row['ce']:.6f},"
                f"{row['mse']:.6f},{row['train_accuracy']:.4f}\n"
            )
    print(
        f"trained {len(trace)} epochs, final accuracy "
        f"{trace[-1]['train_accuracy']:.3f} -> {out}"
    )
    return 0


def _cmd_recommend_repl(args) -> int:
    engine = _load_engine(args)
    state, output = engine.start()
    print(f"agent: {output.text}")
    for line in sys.stdin:
        message = line.strip()
        if not message:
            continue
        if message in ("quit", "exit"):
            break
        state, output = engine.step(state, message)
        if output.recommendations:
            for r in output.recommendations:
                print(
                    f"  [{r.placement.placement_id}] perf={r.perf_score:.2f} "
                    f"ux={r.ux_score:.2f} total={r.total:.2f} :: {r.rationale}"
                )
        print(f"agent: {output.text}")
        if state.phase.value == "done":
            break
    return 0


def _cmd_recommend_serve(args) -> int:
    hub = EdgeHub(HubConfig())
    service = hubserver.RecommendService(_load_engine(args))
    server = hubserver.HubServer(
        hub,
        host=args.host,
        http_port=args.http_port,
        udp_port=None,
        recommend=service,
        ui_dir=Path(args.ui_dir) if args.ui_dir else None,
    )
    server.start()
    print(f"recommendation API on http {server.http_port} (Ctrl-C stops)")
    try:
        while True:
            import time

            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibesense", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario end to end")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_simulate)

    hub_p = sub.add_parser("hub", help="hub operations")
    hub_sub = hub_p.add_subparsers(dest="hub_command", required=True)
    p = hub_sub.add_parser("serve", help="run the UDP + HTTP hub")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--http-port", type=int, default=hubserver.DEFAULT_HTTP_PORT)
    p.add_argument("--udp-port", type=int, default=hubserver.DEFAULT_UDP_PORT)
    p.add_argument("--environment", default=None)
    p.add_argument("--sensor", default=None)
    p.add_argument("--ui-dir", default=None)
    p.add_argument("--status-push-url", default=None)
    p.add_argument("--status-push-period", type=float, default=30.0)
    p.set_defaults(func=_cmd_hub_serve)

    an = sub.add_parser("analyze", help="analysis pipelines")
    an_sub = an.add_subparsers(dest="analysis", required=True)
    p = an_sub.add_parser("snr", help="bucketed SNR series + autocorrelation")
    p.add_argument("--segment", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bucket-s", type=float, default=2.0)
    p.set_defaults(func=_cmd_analyze_snr)
    p = an_sub.add_parser("spectrogram", help="STFT magnitude matrix")
    p.add_argument("--segment", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window-len", type=int, default=1024)
    p.add_argument("--hop-len", type=int, default=512)
    p.set_defaults(func=_cmd_analyze_spectrogram)
    p = an_sub.add_parser("tsne", help="2-D embedding of event features")
    p.add_argument("--features", default=None)
    p.add_argument("--run", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iters", type=int, default=600)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_analyze_tsne)

    p = sub.add_parser("train", help="train the activity recognizer on a run")
    p.add_argument("--run", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    rec = sub.add_parser("recommend", help="placement recommendation")
    rec_sub = rec.add_subparsers(dest="rec_command", required=True)
    p = rec_sub.add_parser("repl", help="interactive dialog on stdin")
    p.add_argument("--environment", required=True)
    p.add_argument("--sensor", default=None)
    p.set_defaults(func=_cmd_recommend_repl)
    p = rec_sub.add_parser("serve", help="HTTP recommendation API")
    p.add_argument("--environment", required=True)
    p.add_argument("--sensor", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--http-port", type=int, default=hubserver.DEFAULT_HTTP_PORT)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(func=_cmd_recommend_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "analyze" and args.analysis == "tsne":
        if not args.features and not args.run:
            print("analyze tsne needs --features or --run", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except (scenario.ScenarioError, ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
