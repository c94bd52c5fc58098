"""Command-line entry point: synth, ingest, train, backtest, report.

Every subcommand takes --config (flat ``key = value`` file), --seed, and
--out. CLI flags override config entries; the effective configuration is
written to <out>/config.resolved for reproducibility. Usage errors exit 2;
data errors exit 1 with the error class named on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import agent, bench, ingest, neural, synth
from .errors import MmrlError
from .indicators import IndicatorConfig
from .macro_env import MacroEnv
from .micro_env import MicroEnv
from .orderbook import market_price
from .types import MS_PER_MINUTE, EventKind, Side

DEFAULTS = {
    "epochs": "500",
    "gamma": "0.97",
    "batch_size": "32",
    "memory_capacity": "10000",
    "eps_start": "1.0",
    "eps_end": "0.05",
    "eps_decay": "0.995",
    "lr": "0.001",
    "window_n": "20",
    "ema_n": "20",
    "volatility_m": "10",
    "history_h": "30",
    "macro_hidden": "128,64",
    "micro_hidden": "256,128",
    "buy_qty": "1.0",
    "buyhold_qty": "10.0",
    "momentum_n": "20",
    "minutes": "120",
    "base_price": "5000.0",
    "trend": "0.0",
    "noise": "0.1",
    "depth": "25",
    "trade_rate": "1.0",
}


def load_config(path: str | None) -> dict[str, str]:
    cfg = dict(DEFAULTS)
    if path:
        for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise MmrlError(f"config line {line_no}: expected 'key = value'")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    return cfg


def write_resolved(cfg: dict[str, str], out: Path) -> None:
    lines = [f"{k} = {cfg[k]}" for k in sorted(cfg)]
    (out / "config.resolved").write_text("\n".join(lines) + "\n")


def _indicator_config(cfg: dict[str, str]) -> IndicatorConfig:
    return IndicatorConfig(window_n=int(cfg["window_n"]), ema_n=int(cfg["ema_n"]),
                           volatility_m=int(cfg["volatility_m"]),
                           history_h=int(cfg["history_h"]))


def _train_config(cfg: dict[str, str]) -> agent.TrainConfig:
    return agent.TrainConfig(gamma=float(cfg["gamma"]), batch_size=int(cfg["batch_size"]),
                             epochs=int(cfg["epochs"]), memory_capacity=int(cfg["memory_capacity"]),
                             eps_start=float(cfg["eps_start"]), eps_end=float(cfg["eps_end"]),
                             eps_decay=float(cfg["eps_decay"]), lr=float(cfg["lr"]))


def _hidden_dims(text: str) -> tuple[int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 2:
        raise MmrlError(f"hidden dims must be two comma-separated ints, got {text!r}")
    return parts[0], parts[1]


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_timeline(timeline_dir: str) -> ingest.BookTimeline:
    d = Path(timeline_dir)
    with open(d / "snapshot.json") as fh:
        snap_ts, book = ingest.load_snapshot(fh)
    with open(d / "events.jsonl") as fh:
        events = ingest.parse_event_stream(fh)
    return ingest.BookTimeline(snap_ts, book, events)


def _override(cfg: dict[str, str], args, *names: str) -> None:
    for name in names:
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None:
            cfg[name.replace("-", "_")] = str(value)


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    _override(cfg, args, "minutes", "trend", "noise", "base_price", "depth", "trade_rate")
    out = _out_dir(args)
    market = synth.generate(synth.SynthConfig(
        seed=args.seed, duration_minutes=int(cfg["minutes"]),
        base_price=float(cfg["base_price"]), trend_per_minute=float(cfg["trend"]),
        noise_sigma=float(cfg["noise"]), book_depth=int(cfg["depth"]),
        trade_rate=float(cfg["trade_rate"])))
    (out / "snapshot.json").write_text(ingest.dump_snapshot(market.snapshot_ts, market.snapshot) + "\n")
    with open(out / "events.jsonl", "w") as fh:
        ingest.write_event_stream(market.events, fh)
    write_resolved(cfg, out)
    print(f"synth: {len(market.events)} events over {cfg['minutes']} minutes -> {out}")
    return 0


def cmd_ingest(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args)
    with open(args.snapshot) as fh:
        snap_ts, book = ingest.load_snapshot(fh)
    rejects: list[tuple[int, str]] = []
    with open(args.events) as fh:
        events = ingest.parse_event_stream(fh, rejects=rejects)
    timeline = ingest.BookTimeline(snap_ts, book, events)

    # validate: replay the whole stream, checking the book stays uncrossed
    replayed = timeline.initial_snapshot.copy()
    crossings = 0
    for ev in timeline.events:
        ingest._apply_events(replayed, [ev])
        if replayed.is_crossed():
            crossings += 1
    trades = [e for e in events if e.kind is EventKind.TRADE]
    bars = ingest.build_minute_ticks(trades) if trades else []
    with open(out / "ticks.csv", "w", newline="") as fh:
        ingest.write_ticks_csv(bars, fh)
    summary = {
        "events": len(events),
        "rejected": len(rejects),
        "trades": len(trades),
        "bars": len(bars),
        "crossed_states": crossings,
        "t_start": timeline.start_ts,
        "t_end": timeline.end_ts,
    }
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    write_resolved(cfg, out)
    print(f"ingest: {len(events)} events, {len(rejects)} rejected, "
          f"{len(bars)} bars -> {out}")
    return 0


def cmd_train_macro(args) -> int:
    cfg = load_config(args.config)
    _override(cfg, args, "epochs")
    out = _out_dir(args)
    with open(args.ticks) as fh:
        bars = ingest.read_ticks_csv(fh)
    ind_cfg = _indicator_config(cfg)
    end = None
    if args.split is not None:
        train_bars, _ = ingest.split_train_test(bars, args.split)
        end = len(train_bars)
    env = MacroEnv(bars, ind_cfg, end=end, buy_qty=float(cfg["buy_qty"]))
    spec = neural.NetSpec(input_dim=env.state_dim, hidden_dims=_hidden_dims(cfg["macro_hidden"]),
                          output_dim=env.n_actions, dueling=False, seed=args.seed)
    net = neural.init(spec)
    rng = np.random.default_rng(args.seed)
    logs = agent.train(env, net, _train_config(cfg), rng)
    neural.save_file(net, out / "macro_net.json")
    with open(out / "train_log.jsonl", "w") as fh:
        agent.write_training_log(logs, fh)
    write_resolved(cfg, out)
    final = logs[-1].cum_reward if logs else 0.0
    print(f"train-macro: {len(logs)} epochs, final cum_reward {final} -> {out}")
    return 0


def cmd_train_micro(args) -> int:
    cfg = load_config(args.config)
    _override(cfg, args, "epochs")
    out = _out_dir(args)
    timeline = _load_timeline(args.timeline)
    end_ts = args.split if args.split is not None else None
    env_rng = np.random.default_rng((args.seed, 1))
    env = MicroEnv(timeline, quantity=float(cfg["buy_qty"]), end_ts=end_ts,
                   rng=env_rng, record_episodes=True)
    spec = neural.NetSpec(input_dim=env.state_dim, hidden_dims=_hidden_dims(cfg["micro_hidden"]),
                          output_dim=env.n_actions, dueling=True, seed=args.seed)
    net = neural.init(spec)
    rng = np.random.default_rng(args.seed)
    logs = agent.train(env, net, _train_config(cfg), rng)
    neural.save_file(net, out / "micro_net.json")
    with open(out / "train_log.jsonl", "w") as fh:
        agent.write_training_log(logs, fh)
    if env.records:
        with open(out / "episodes.jsonl", "w") as fh:
            for record in env.records:
                fh.write(record.to_json() + "\n")
    write_resolved(cfg, out)
    print(f"train-micro: {len(logs)} epochs -> {out}")
    return 0


def cmd_backtest(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args)
    with open(args.ticks) as fh:
        bars = ingest.read_ticks_csv(fh)
    ind_cfg = _indicator_config(cfg)
    if args.split is not None:
        train_bars, _ = ingest.split_train_test(bars, args.split)
        start = max(len(train_bars), ind_cfg.warmup)
    else:
        start = ind_cfg.warmup

    pipeline_stats = None
    if args.strategy == "buyhold":
        curve = bench.buy_and_hold(bars, float(cfg["buyhold_qty"]), start=start)
    elif args.strategy == "momentum":
        curve = bench.momentum(bars, int(cfg["momentum_n"]), start=start)
    elif args.strategy == "macro":
        if not args.macro_net:
            raise MmrlError("backtest --strategy macro needs --macro-net")
        net = neural.load_file(args.macro_net)
        curve = bench.run_macro_standalone(net, bars, ind_cfg, start=start,
                                           buy_qty=float(cfg["buy_qty"]))
    elif args.strategy == "pipeline":
        if not (args.macro_net and args.micro_net and args.timeline):
            raise MmrlError("backtest --strategy pipeline needs --macro-net, --micro-net, --timeline")
        macro_net = neural.load_file(args.macro_net)
        micro_net = neural.load_file(args.micro_net)
        timeline = _load_timeline(args.timeline)
        curve, pipeline_stats = bench.run_pipeline(macro_net, micro_net, bars, timeline,
                                                   ind_cfg, start=start,
                                                   buy_qty=float(cfg["buy_qty"]))
    else:  # unreachable: argparse restricts choices
        raise MmrlError(f"unknown strategy {args.strategy}")

    with open(out / "pnl.csv", "w") as fh:
        bench.write_pnl_csv(curve, fh)
    (out / "stats.json").write_text(bench.stats_json(args.strategy, curve, args.seed, pipeline_stats))
    bench.plot_curves({args.strategy: curve}, out / "chart.png")
    write_resolved(cfg, out)
    print(f"backtest[{args.strategy}]: final_pnl {curve.final_pnl} -> {out}")
    return 0


def cmd_report(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args)
    runs = Path(args.runs)
    rows = []
    curves: dict[str, bench.PnlCurve] = {}
    for stats_path in sorted(runs.glob("**/stats.json")):
        doc = json.loads(stats_path.read_text())
        name = f"{doc['strategy']}@{stats_path.parent.name}"
        rows.append((name, doc))
        pnl_path = stats_path.parent / "pnl.csv"
        if pnl_path.exists():
            with open(pnl_path) as fh:
                curves[name] = bench.read_pnl_csv(fh)
    if not rows:
        raise MmrlError(f"no stats.json files under {runs}")
    header = "run,strategy,final_pnl,max_drawdown,profit_std,limit_fraction"
    lines = [header]
    for name, doc in rows:
        frac = doc.get("pipeline", {}).get("limit_fraction", "")
        lines.append(f"{name},{doc['strategy']},{doc['final_pnl']},"
                     f"{doc['max_drawdown']},{doc['profit_std']},{frac}")
    (out / "report.csv").write_text("\n".join(lines) + "\n")
    if curves:
        bench.plot_curves(curves, out / "report.png")
    write_resolved(cfg, out)
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmrl",
                                     description="Market-making RL workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic market")
    common(p)
    p.add_argument("--minutes", type=int)
    p.add_argument("--trend", type=float, help="mid-price drift per minute")
    p.add_argument("--noise", type=float, help="per-second mid-price noise stddev")
    p.add_argument("--base-price", type=float, dest="base_price")
    p.add_argument("--depth", type=int)
    p.add_argument("--trade-rate", type=float, dest="trade_rate")

    p = sub.add_parser("ingest", help="parse, validate, and bar-ify an event stream")
    common(p)
    p.add_argument("--events", required=True)
    p.add_argument("--snapshot", required=True)

    p = sub.add_parser("train-macro", help="train the minute-scale agent")
    common(p)
    p.add_argument("--ticks", required=True)
    p.add_argument("--split", type=int, help="train on bars strictly before this ts")
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("train-micro", help="train the execution agent")
    common(p)
    p.add_argument("--timeline", required=True, help="dir with snapshot.json + events.jsonl")
    p.add_argument("--split", type=int, help="train on minutes strictly before this ts")
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("backtest", help="evaluate a strategy on the test segment")
    common(p)
    p.add_argument("--strategy", required=True,
                   choices=["buyhold", "momentum", "macro", "pipeline"])
    p.add_argument("--ticks", required=True)
    p.add_argument("--timeline")
    p.add_argument("--split", type=int, help="evaluate bars at/after this ts")
    p.add_argument("--macro-net", dest="macro_net")
    p.add_argument("--micro-net", dest="micro_net")

    p = sub.add_parser("report", help="combine stats from several runs")
    common(p)
    p.add_argument("--runs", required=True)
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "train-macro": cmd_train_macro,
    "train-micro": cmd_train_micro,
    "backtest": cmd_backtest,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except MmrlError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
