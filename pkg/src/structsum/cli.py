"""Command line interface.

Subcommands: train, summarize, evaluate, bounds, curve, ablate. All of them
exit non-zero on error, write files atomically, and produce byte-identical
output for identical inputs and seeds.
"""

from __future__ import annotations

import argparse
import json
import sys

from .corpus import DatasetError, load_dataset, load_stopwords
from .experiments import (
    ABLATION_ROWS,
    ablation_table,
    bounds_table,
    evaluate_predictions,
    learning_curve,
    resolve_budget,
    sample_splits,
    select_c,
    sign_test,
    train_on,
)
from .features import GROUPS, FeatureConfig
from .greedy import GreedyConfig, greedy_maximize
from .learner import Model, ModelError, TrainerConfig, predict
from .rouge import AGGREGATIONS, LossConfig
from .scoring import PairwiseScorer, Summary, gain_state
from .util import atomic_write_text


def _parse_ids(text: str | None) -> list[int] | None:
    if text is None:
        return None
    return [int(v) for v in text.split(",") if v != ""]


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def _add_shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="JSON-lines dataset path")
    p.add_argument(
        "--model",
        choices=("pairwise", "pairwise-split", "coverage"),
        default="pairwise",
        help="model kind (default: pairwise)",
    )
    p.add_argument(
        "--budget",
        type=int,
        default=665,
        help="summary budget in bytes when a record carries none (default: 665)",
    )
    p.add_argument("--r", type=float, default=0.3, help="greedy cost exponent (default: 0.3)")
    p.add_argument(
        "--C", default="10.0", help="regularization; a comma list is a validation grid"
    )
    p.add_argument("--epsilon", type=float, default=1e-3, help="constraint tolerance")
    p.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        default=4.0,
        help="pairwise redundancy trade-off (default: 4.0)",
    )
    p.add_argument("--seed", type=int, default=0, help="seed for any split sampling")
    p.add_argument(
        "--single-reference",
        action="store_true",
        help="build training targets and losses from the first reference only",
    )
    p.add_argument("--out", default=None, help="output file path")
    p.add_argument("--stopwords", default=None, help="stopword list path (default: packaged)")
    p.add_argument(
        "--groups",
        default=None,
        help=f"comma list of enabled feature groups (default: all of {','.join(GROUPS)})",
    )
    p.add_argument(
        "--aggregation",
        choices=AGGREGATIONS,
        default="mean-f",
        help="multi-reference aggregation mode",
    )
    p.add_argument(
        "--rouge-drop-stopwords",
        action="store_true",
        help="drop stopwords from unigram counts before scoring",
    )


def _configs(args):
    groups = tuple(args.groups.split(",")) if args.groups else GROUPS
    feature_cfg = FeatureConfig(enabled_groups=groups)
    greedy_cfg = GreedyConfig(budget_bytes=args.budget, r=args.r)
    loss_cfg = LossConfig(
        multi_ref_aggregation=args.aggregation,
        rouge_stopword_removal=args.rouge_drop_stopwords,
    )
    return feature_cfg, greedy_cfg, loss_cfg


def _load(args):
    stopwords = load_stopwords(args.stopwords)
    return load_dataset(args.dataset, stopwords)


def _auto_split(args, n_sets: int, test_count: int):
    train_ids = _parse_ids(getattr(args, "train_ids", None))
    test_ids = _parse_ids(getattr(args, "test_ids", None))
    if train_ids is not None and test_ids is not None:
        return train_ids, test_ids
    if train_ids is not None or test_ids is not None:
        raise ValueError("give both --train-ids and --test-ids, or neither")
    if test_count >= n_sets:
        raise ValueError(f"--test-count {test_count} leaves no training sets (n={n_sets})")
    (tr, _, te), = sample_splits(
        n_sets, n_sets - test_count, 0, test_count, resamples=1, seed=args.seed
    )
    return list(tr), list(te)


def _write_json(path: str, payload) -> None:
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=1) + "\n")


def cmd_train(args) -> int:
    if not args.out:
        raise ValueError("train needs --out to save the model")
    data = _load(args)
    feature_cfg, greedy_cfg, loss_cfg = _configs(args)
    train_ids = _parse_ids(args.train_ids) or list(range(len(data)))
    val_ids = _parse_ids(args.val_ids) or []
    grid = _parse_floats(args.C)
    trainer_cfg = TrainerConfig(
        C=grid[0], epsilon=args.epsilon, max_outer_iters=args.max_iters
    )
    lam = args.lam if args.model == "pairwise" else None
    c_table = None
    if len(grid) > 1:
        if not val_ids:
            raise ValueError("a C grid needs --val-ids to select on")
        best_c, c_table = select_c(
            data, train_ids, val_ids, grid, args.model,
            feature_cfg, loss_cfg, greedy_cfg, trainer_cfg,
            lam=lam, single_reference=args.single_reference,
        )
        trainer_cfg = TrainerConfig(
            C=best_c, epsilon=args.epsilon, max_outer_iters=args.max_iters
        )
        print(f"selected C={best_c} on validation sets {val_ids}")
    log_lines: list[str] = []

    def log_cb(entry: dict) -> None:
        log_lines.append(json.dumps(entry, sort_keys=True))
        print(
            "iter {iteration}: constraints={constraints_total} "
            "dual={dual_objective:.6f} max_violation={max_violation:.6f}".format(**entry)
        )

    result = train_on(
        data, train_ids, args.model, feature_cfg, loss_cfg, greedy_cfg, trainer_cfg,
        lam=lam, single_reference=args.single_reference, log_callback=log_cb,
    )
    result.model.save(args.out)
    log_path = args.log or (args.out + ".log.jsonl")
    atomic_write_text(log_path, "\n".join(log_lines) + "\n")
    if c_table is not None:
        _write_json(args.out + ".cgrid.json", c_table)
    status = "converged" if result.converged else "hit iteration cap"
    print(f"saved {args.model} model to {args.out} ({status}, "
          f"{result.iterations[-1]['constraints_total']} constraints)")
    return 0


def _summarize_one(x, args, model) -> Summary:
    if model is not None:
        return predict(x, model)
    scorer = PairwiseScorer.tfidf_baseline(x, lam=args.lam)
    cfg = GreedyConfig(budget_bytes=resolve_budget(x, args.budget), r=args.r)
    return greedy_maximize(x, gain_state(x, scorer), cost=None, cfg=cfg)


def cmd_summarize(args) -> int:
    if (args.model_file is None) == (not args.baseline):
        raise ValueError("give exactly one of --model-file or --baseline")
    data = _load(args)
    model = Model.load(args.model_file) if args.model_file else None
    wanted = set(args.sets.split(",")) if args.sets else None
    records = []
    for x, _ in data:
        if wanted is not None and x.set_id not in wanted:
            continue
        y = _summarize_one(x, args, model)
        print(f"# {x.set_id}")
        for sid in y.selected:
            print(x.sentences[sid].text)
        records.append(
            {
                "set_id": x.set_id,
                "sentence_ids": list(y.selected),
                "total_cost_bytes": y.total_cost,
                "sentences": [x.sentences[sid].text for sid in y.selected],
            }
        )
    if wanted is not None:
        missing = wanted - {r["set_id"] for r in records}
        if missing:
            raise ValueError(f"dataset has no sets named {sorted(missing)}")
    if args.out:
        _write_json(args.out, {"summaries": records})
    return 0


def _load_predictions(path: str, data) -> dict[str, Summary]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    by_id = {x.set_id: x for x, _ in data}
    out: dict[str, Summary] = {}
    for rec in payload["summaries"]:
        set_id = rec["set_id"]
        if set_id not in by_id:
            raise ValueError(f"predictions name unknown set id {set_id!r}")
        x = by_id[set_id]
        ids = rec["sentence_ids"]
        bad = [i for i in ids if not (0 <= i < x.num_sentences)]
        if bad:
            raise ValueError(f"set {set_id!r}: sentence ids {bad} out of range")
        out[set_id] = Summary(tuple(ids), sum(x.sentences[i].cost for i in ids))
    return out


def cmd_evaluate(args) -> int:
    data = _load(args)
    _, _, loss_cfg = _configs(args)
    preds = _load_predictions(args.predictions, data)
    report = evaluate_predictions(data, preds, loss_cfg)
    print("set_id\tprecision\trecall\tf")
    for row in report.rows:
        print(f"{row['set_id']}\t{row['precision']:.5f}\t{row['recall']:.5f}\t{row['f']:.5f}")
    print(f"mean\t{report.mean_p:.5f}\t{report.mean_r:.5f}\t{report.mean_f:.5f}")
    print(f"stderr_f\t\t\t{report.stderr_f:.5f}")
    payload = {
        "per_set": report.rows,
        "mean": {"precision": report.mean_p, "recall": report.mean_r, "f": report.mean_f},
        "stderr_f": report.stderr_f,
    }
    if args.compare:
        other = _load_predictions(args.compare, data)
        other_report = evaluate_predictions(data, other, loss_cfg)
        ours = {r["set_id"]: r["f"] for r in report.rows}
        theirs = {r["set_id"]: r["f"] for r in other_report.rows}
        shared = sorted(set(ours) & set(theirs))
        if not shared:
            raise ValueError("no shared set ids between the two prediction files")
        p = sign_test([ours[s] for s in shared], [theirs[s] for s in shared])
        print(f"sign_test_p\t\t\t{p:.5f}")
        payload["sign_test_p"] = p
        payload["compared_to"] = args.compare
    if args.out:
        _write_json(args.out, payload)
    return 0


def cmd_bounds(args) -> int:
    data = _load(args)
    _, greedy_cfg, loss_cfg = _configs(args)
    model = Model.load(args.model_file)
    train_ids = _parse_ids(args.train_ids)
    test_ids = _parse_ids(args.test_ids)
    if not train_ids or not test_ids:
        raise ValueError("bounds needs --train-ids and --test-ids")
    rows = bounds_table(data, model, train_ids, test_ids, loss_cfg, greedy_cfg)
    print("bound\tmean_f")
    for name, value in rows:
        print(f"{name}\t{'n/a' if value is None else f'{value:.5f}'}")
    if args.out:
        _write_json(args.out, [{"bound": n, "mean_f": v} for n, v in rows])
    return 0


def cmd_curve(args) -> int:
    data = _load(args)
    feature_cfg, greedy_cfg, loss_cfg = _configs(args)
    train_ids, test_ids = _auto_split(args, len(data), args.test_count)
    sizes = [int(v) for v in args.sizes.split(",")]
    trainer_cfg = TrainerConfig(
        C=_parse_floats(args.C)[0], epsilon=args.epsilon, max_outer_iters=args.max_iters
    )
    lam = args.lam if args.model == "pairwise" else None
    rows = learning_curve(
        data, sizes, train_ids, test_ids, args.model,
        feature_cfg, loss_cfg, greedy_cfg, trainer_cfg, lam=lam,
        warn=lambda msg: print(f"warning: {msg}", file=sys.stderr),
    )
    print("size\tmean_f\tstderr_f")
    for row in rows:
        print(f"{row['size']}\t{row['mean_f']:.5f}\t{row['stderr_f']:.5f}")
    if args.out:
        _write_json(args.out, rows)
    return 0


def cmd_ablate(args) -> int:
    data = _load(args)
    feature_cfg, greedy_cfg, loss_cfg = _configs(args)
    train_ids, test_ids = _auto_split(args, len(data), args.test_count)
    trainer_cfg = TrainerConfig(
        C=_parse_floats(args.C)[0], epsilon=args.epsilon, max_outer_iters=args.max_iters
    )
    lam = args.lam if args.model == "pairwise" else None
    rows = args.rows.split(",") if args.rows else None
    table = ablation_table(
        data, train_ids, test_ids, args.model,
        feature_cfg, loss_cfg, greedy_cfg, trainer_cfg, lam=lam, rows=rows,
    )
    print("removed\tmean_f")
    for row in table:
        print(f"{row['removed']}\t{row['mean_f']:.5f}")
    if args.out:
        _write_json(args.out, table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="structsum",
        description="Budgeted submodular extractive summarization with large-margin training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model with cutting planes")
    _add_shared(p)
    p.add_argument("--train-ids", default=None, help="comma list of set indexes (default: all)")
    p.add_argument("--val-ids", default=None, help="validation set indexes for a C grid")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--log", default=None, help="training log path (default: OUT.log.jsonl)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("summarize", help="produce summaries for every set")
    _add_shared(p)
    p.add_argument("--model-file", default=None, help="trained model JSON")
    p.add_argument("--baseline", action="store_true", help="hand-tuned tf-idf cosine scorer")
    p.add_argument("--sets", default=None, help="comma list of set ids to summarize")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("evaluate", help="score prediction files against references")
    _add_shared(p)
    p.add_argument("--predictions", required=True, help="JSON written by summarize --out")
    p.add_argument("--compare", default=None, help="second prediction file for a sign test")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bounds", help="human/extractive/fit/prediction table")
    _add_shared(p)
    p.add_argument("--model-file", required=True)
    p.add_argument("--train-ids", required=True)
    p.add_argument("--test-ids", required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("curve", help="learning curve over training sizes")
    _add_shared(p)
    p.add_argument("--sizes", default="1,2,5,10,20,40")
    p.add_argument("--train-ids", default=None)
    p.add_argument("--test-ids", default=None)
    p.add_argument("--test-count", type=int, default=5)
    p.add_argument("--max-iters", type=int, default=100)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("ablate", help="retrain with one feature group removed per row")
    _add_shared(p)
    p.add_argument("--train-ids", default=None)
    p.add_argument("--test-ids", default=None)
    p.add_argument("--test-count", type=int, default=5)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument(
        "--rows",
        default=None,
        help="comma list of rows among: " + ", ".join(label for label, _ in ABLATION_ROWS),
    )
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, ModelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
