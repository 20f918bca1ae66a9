"""Command-line entry points: synth, ingest, featurize, baseline, train, report, traces."""

import argparse
import sys

from . import baselines, evaluation, features, ingest, synth, training
from .errors import VolcastError
from .model import ModelConfig


def _cmd_synth(args):
    spec = synth.SynthSpec.from_json(args.spec)
    data = synth.generate(spec, out_dir=args.out_dir)
    splits = synth.default_splits(data)
    synth.splits_to_json(splits, f"{args.out_dir}/splits.json")
    print(f"wrote ohlcv.csv, vix.csv, news.txt, splits.json to {args.out_dir} "
          f"({spec.days} trading days)")


def _cmd_ingest(args):
    bars = ingest.load_ohlcv(args.ohlcv, ticker=args.ticker)
    news = ingest.load_news_embeddings(args.news)
    vix = ingest.load_vix(args.vix)
    splits = ingest.SplitSpec.from_json(args.splits)
    panel = ingest.align_panel(bars, news, vix, splits, ticker=args.ticker)
    ingest.save_panel(panel, args.out)
    print(f"aligned {len(panel.rows)} rows "
          f"({', '.join(f'{s}={len(panel.split_rows(s))}' for s in ('train', 'val', 'test'))})")


def _cmd_featurize(args):
    panel = ingest.load_panel(args.panel)
    rows = features.build_features(panel)
    features.save_features(rows, args.out)
    print(f"emitted {len(rows)} feature rows -> {args.out}")


def _cmd_baseline(args):
    rows = features.load_features(args.features)
    news = ingest.load_news_embeddings(args.news) if args.news else []
    news_dim = len(news[0].embedding) if news else 1
    result = baselines.run_baseline_job(rows, news, news_dim, args.model,
                                        out_dir=args.out, ticker=args.ticker)
    built = evaluation.build_report([args.out])
    for r in built.rows:
        print(f"{r.model} test {r.metric}: {r.seed_mean:.6f} (n={r.sample_count})")
    if result["penalty"] is not None:
        print(f"selected penalty: {result['penalty']:g}")


def _cmd_train(args):
    rows = features.load_features(args.features)
    news = ingest.load_news_embeddings(args.embeddings)
    news_dim = len(news[0].embedding) if news else 1
    if args.config:
        cfg = ModelConfig.from_json(args.config)
    else:
        cfg = ModelConfig(news_dim=news_dim)
    if cfg.news_dim != news_dim:
        raise VolcastError(f"config news_dim={cfg.news_dim} but embedding file has {news_dim}")
    settings = training.TrainSettings(seed=args.seed, ablation=args.ablate,
                                      lr=args.lr, batch_size=args.batch_size,
                                      max_epochs=args.max_epochs, patience=args.patience)
    bundle = training.build_dataset(rows, news, news_dim,
                                    lookback=cfg.lookback, horizon=cfg.horizon,
                                    ablation=settings.ablation)
    result = training.train(cfg, bundle, settings)
    training.write_run_dir(result, bundle, args.out, model_name=args.name,
                           ticker=args.ticker)
    last = result.history[-1]
    print(f"stopped at epoch {result.stop_epoch} (best {result.best_epoch}); "
          f"best val {settings.early_stop_metric}={result.best_metric:.6f}; "
          f"final train joint={last['train_joint']:.6g} -> {args.out}")


def _cmd_report(args):
    report = evaluation.build_report(args.runs)
    evaluation.write_report(report, csv_path=args.out + ".csv", json_path=args.out + ".json")
    for r in report.rows:
        print(f"{r.ticker or '-'} {r.model} {r.metric}: "
              f"{r.seed_mean:.6f} +/- {r.seed_std:.6f} over {r.n_seeds} seed(s)")
    print(f"wrote {args.out}.csv and {args.out}.json")


def _cmd_traces(args):
    evaluation.emit_traces(args.run, args.out, split=args.split)
    print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="volcast",
                                description="volatility forecasting pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate synthetic market data files")
    s.add_argument("--spec", required=True, help="SynthSpec JSON")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(fn=_cmd_synth)

    s = sub.add_parser("ingest", help="align OHLCV/news/VIX into a panel")
    s.add_argument("--ohlcv", required=True)
    s.add_argument("--news", required=True)
    s.add_argument("--vix", required=True)
    s.add_argument("--splits", required=True, help="JSON with train/val/test date ranges")
    s.add_argument("--out", required=True)
    s.add_argument("--ticker", default="")
    s.set_defaults(fn=_cmd_ingest)

    s = sub.add_parser("featurize", help="compute features/targets from a panel")
    s.add_argument("--panel", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_featurize)

    s = sub.add_parser("baseline", help="fit a HAR/HAR-X baseline")
    s.add_argument("--model", required=True, choices=baselines.BASELINE_KINDS)
    s.add_argument("--features", required=True)
    s.add_argument("--news", default=None, help="embedding file (HAR-X variants)")
    s.add_argument("--out", required=True, help="run directory")
    s.add_argument("--ticker", default="")
    s.set_defaults(fn=_cmd_baseline)

    s = sub.add_parser("train", help="train the fusion model")
    s.add_argument("--features", required=True)
    s.add_argument("--embeddings", required=True)
    s.add_argument("--config", default=None, help="ModelConfig JSON")
    s.add_argument("--ablate", default=None, choices=["volume", "news", "align"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lr", type=float, default=3e-4)
    s.add_argument("--batch-size", type=int, default=32)
    s.add_argument("--max-epochs", type=int, default=200)
    s.add_argument("--patience", type=int, default=10)
    s.add_argument("--name", default="m2vn")
    s.add_argument("--ticker", default="")
    s.add_argument("--out", required=True, help="run directory")
    s.set_defaults(fn=_cmd_train)

    s = sub.add_parser("report", help="aggregate run directories into a report")
    s.add_argument("--runs", nargs="+", required=True)
    s.add_argument("--out", required=True, help="output path stem (.csv/.json added)")
    s.set_defaults(fn=_cmd_report)

    s = sub.add_parser("traces", help="plot-ready forecast traces from one run")
    s.add_argument("--run", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--split", default="test")
    s.set_defaults(fn=_cmd_traces)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except VolcastError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
