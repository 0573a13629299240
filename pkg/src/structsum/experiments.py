"""Experiment harness: splits, evaluation, bounds, curves, ablations.

Everything here is a plain function over loaded datasets so the CLI stays a
thin wrapper and tests can call the logic directly. All sampling is driven
by explicit seeds; rerunning with the same inputs reproduces the same
numbers.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

from .corpus import DocumentSet, ReferenceSet
from .features import FeatureConfig, GROUPS
from .greedy import GreedyConfig
from .learner import Model, TrainerConfig, TrainResult, predict, train
from .rouge import (
    LossConfig,
    RougeGain,
    loss_delta_r,
    make_target,
    reference_counts,
    rouge1_prf,
    summary_counts,
)
from .scoring import Summary
from .greedy import greedy_maximize

Dataset = list[tuple[DocumentSet, ReferenceSet]]

ABLATION_ROWS = (
    ("none", None),
    ("basic", "basic"),
    ("all except basic", "all-except-basic"),
    ("location", "location"),
    ("sent+doc", "sent_doc"),
    ("cap+stop+len", "cap_stop_len"),
    ("minmax", "minmax"),
)


@dataclass(frozen=True)
class ExperimentPlan:
    dataset: str
    splits: tuple[tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]], ...]
    resamples: int
    budget_bytes: int
    model_kind: str
    c_grid: tuple[float, ...]
    r: float
    seed: int


def sample_splits(
    n_sets: int,
    n_train: int,
    n_val: int,
    n_test: int,
    resamples: int,
    seed: int,
) -> tuple[tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]], ...]:
    """Seeded resampled (train, val, test) index splits, disjoint within
    each resample."""
    if n_train + n_val + n_test > n_sets:
        raise ValueError(
            f"split sizes {n_train}+{n_val}+{n_test} exceed dataset size {n_sets}"
        )
    rng = random.Random(seed)
    out = []
    for _ in range(resamples):
        order = list(range(n_sets))
        rng.shuffle(order)
        tr = tuple(sorted(order[:n_train]))
        va = tuple(sorted(order[n_train:n_train + n_val]))
        te = tuple(sorted(order[n_train + n_val:n_train + n_val + n_test]))
        out.append((tr, va, te))
    return tuple(out)


def resolve_budget(x: DocumentSet, default_budget: int) -> int:
    return x.budget_bytes if x.budget_bytes is not None else default_budget


def build_targets(
    data: Dataset,
    greedy_cfg: GreedyConfig,
    loss_cfg: LossConfig,
    single_reference: bool = False,
) -> Dataset:
    """Return training views with targets attached.

    In single-reference mode both the target and the training loss see only
    the first reference; evaluation elsewhere still uses all of them.
    """
    out: Dataset = []
    for x, Y in data:
        refs = Y.references[:1] if single_reference else Y.references
        view = ReferenceSet(set_id=Y.set_id, references=refs)
        cfg = replace(greedy_cfg, budget_bytes=resolve_budget(x, greedy_cfg.budget_bytes))
        make_target(x, view, cfg, loss_cfg)
        out.append((x, view))
    return out


def train_on(
    data: Dataset,
    ids: list[int] | tuple[int, ...],
    model_kind: str,
    feature_config: FeatureConfig,
    loss_config: LossConfig,
    greedy_config: GreedyConfig,
    trainer_config: TrainerConfig,
    lam: float | None = None,
    single_reference: bool = False,
    log_callback=None,
) -> TrainResult:
    subset = [data[i] for i in ids]
    prepared = build_targets(subset, greedy_config, loss_config, single_reference)
    return train(
        prepared,
        model_kind,
        feature_config=feature_config,
        loss_config=loss_config,
        greedy_config=greedy_config,
        trainer_config=trainer_config,
        lam=lam,
        log_callback=log_callback,
    )


def predict_sets(data: Dataset, ids, model: Model) -> dict[str, Summary]:
    out = {}
    for i in ids:
        x, _ = data[i]
        out[x.set_id] = predict(x, model)
    return out


@dataclass
class EvalReport:
    rows: list[dict]
    mean_p: float
    mean_r: float
    mean_f: float
    stderr_f: float


def _stderr(values: list[float]) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return math.sqrt(var) / math.sqrt(n)


def evaluate_predictions(
    data: Dataset, predictions: dict[str, Summary], loss_cfg: LossConfig = LossConfig()
) -> EvalReport:
    """Per-set and mean unigram P/R/F against all references."""
    by_id = {x.set_id: (x, Y) for x, Y in data}
    missing = sorted(set(predictions) - set(by_id))
    if missing:
        raise ValueError(f"predictions reference unknown set ids: {missing}")
    rows = []
    ps, rs, fs = [], [], []
    for set_id in sorted(predictions):
        x, Y = by_id[set_id]
        y = predictions[set_id]
        p, r, f = rouge1_prf(
            summary_counts(x, y, loss_cfg), reference_counts(Y, loss_cfg), loss_cfg
        )
        rows.append(
            {"set_id": set_id, "precision": p, "recall": r, "f": f, "sentences": list(y.selected)}
        )
        ps.append(p)
        rs.append(r)
        fs.append(f)
    n = len(rows)
    if n == 0:
        raise ValueError("no predictions to evaluate")
    return EvalReport(
        rows=rows,
        mean_p=sum(ps) / n,
        mean_r=sum(rs) / n,
        mean_f=sum(fs) / n,
        stderr_f=_stderr(fs),
    )


def mean_f(data: Dataset, ids, model: Model, loss_cfg: LossConfig) -> float:
    report = evaluate_predictions([data[i] for i in ids], predict_sets(data, ids, model), loss_cfg)
    return report.mean_f


def extractive_ceiling(
    data: Dataset, ids, greedy_cfg: GreedyConfig, loss_cfg: LossConfig
) -> float:
    """Mean F of greedy score-maximizing extractive summaries."""
    total = 0.0
    for i in ids:
        x, Y = data[i]
        cfg = replace(greedy_cfg, budget_bytes=resolve_budget(x, greedy_cfg.budget_bytes))
        gain = RougeGain(x, Y, loss_cfg)
        y = greedy_maximize(x, gain, cost=None, cfg=cfg)
        _, _, f = rouge1_prf(
            summary_counts(x, y, loss_cfg), reference_counts(Y, loss_cfg), loss_cfg
        )
        total += f
    return total / len(ids)


def human_agreement(data: Dataset, ids, loss_cfg: LossConfig) -> float | None:
    """Mean leave-one-out F among references; None when any set has < 2."""
    values = []
    for i in ids:
        _, Y = data[i]
        if len(Y.references) < 2:
            return None
        refs = reference_counts(Y, loss_cfg)
        per_set = []
        for held_out in range(len(refs)):
            others = [r for j, r in enumerate(refs) if j != held_out]
            total = 0.0
            for other in others:
                from .rouge import clipped_overlap, f_score

                total += f_score(
                    clipped_overlap(refs[held_out], other), refs[held_out].total, other.total
                )
            per_set.append(total / len(others))
        values.append(sum(per_set) / len(per_set))
    return sum(values) / len(values)


def bounds_table(
    data: Dataset,
    model: Model,
    train_ids,
    test_ids,
    loss_cfg: LossConfig,
    greedy_cfg: GreedyConfig,
) -> list[tuple[str, float | None]]:
    """Rows: human agreement, extractive ceiling, train fit, test prediction."""
    return [
        ("human", human_agreement(data, test_ids, loss_cfg)),
        ("extractive", extractive_ceiling(data, test_ids, greedy_cfg, loss_cfg)),
        ("model_fit", mean_f(data, train_ids, model, loss_cfg)),
        ("prediction", mean_f(data, test_ids, model, loss_cfg)),
    ]


def learning_curve(
    data: Dataset,
    sizes,
    train_ids,
    test_ids,
    model_kind: str,
    feature_config: FeatureConfig,
    loss_config: LossConfig,
    greedy_config: GreedyConfig,
    trainer_config: TrainerConfig,
    lam: float | None = None,
    warn=None,
) -> list[dict]:
    """Train on prefixes of ``train_ids``; evaluate each on ``test_ids``."""
    rows = []
    for size in sizes:
        if size > len(train_ids):
            if warn is not None:
                warn(f"curve size {size} exceeds {len(train_ids)} available training sets; skipped")
            continue
        result = train_on(
            data, list(train_ids)[:size], model_kind,
            feature_config, loss_config, greedy_config, trainer_config, lam=lam,
        )
        per_set = [
            r["f"]
            for r in evaluate_predictions(
                [data[i] for i in test_ids], predict_sets(data, test_ids, result.model), loss_config
            ).rows
        ]
        rows.append(
            {
                "size": size,
                "mean_f": sum(per_set) / len(per_set),
                "stderr_f": _stderr(per_set),
            }
        )
    return rows


def ablation_table(
    data: Dataset,
    train_ids,
    test_ids,
    model_kind: str,
    feature_config: FeatureConfig,
    loss_config: LossConfig,
    greedy_config: GreedyConfig,
    trainer_config: TrainerConfig,
    lam: float | None = None,
    rows=None,
) -> list[dict]:
    """Retrain with one group removed per row; 'none' keeps everything and
    'all except basic' keeps only the basic group."""
    out = []
    selected = rows if rows is not None else [label for label, _ in ABLATION_ROWS]
    valid = {label: spec for label, spec in ABLATION_ROWS}
    for label in selected:
        if label not in valid:
            raise ValueError(
                f"unknown ablation row {label!r}; valid rows: {[l for l, _ in ABLATION_ROWS]}"
            )
        spec = valid[label]
        if spec is None:
            cfg = feature_config
        elif spec == "all-except-basic":
            cfg = replace(feature_config, enabled_groups=("basic",))
        else:
            cfg = feature_config.without_group(spec)
        result = train_on(
            data, list(train_ids), model_kind, cfg, loss_config, greedy_config, trainer_config, lam=lam
        )
        f = mean_f(data, test_ids, result.model, loss_config)
        out.append({"removed": label, "mean_f": f})
    return out


def select_c(
    data: Dataset,
    train_ids,
    val_ids,
    c_grid,
    model_kind: str,
    feature_config: FeatureConfig,
    loss_config: LossConfig,
    greedy_config: GreedyConfig,
    trainer_config: TrainerConfig,
    lam: float | None = None,
    single_reference: bool = False,
) -> tuple[float, list[dict]]:
    """Pick the grid point with the best validation F (ties: smaller C)."""
    if not val_ids:
        raise ValueError("C-grid selection needs a validation split")
    table = []
    best_c, best_f = None, -1.0
    for c in sorted(c_grid):
        result = train_on(
            data, list(train_ids), model_kind, feature_config, loss_config,
            greedy_config, replace(trainer_config, C=c), lam=lam,
            single_reference=single_reference,
        )
        f = mean_f(data, val_ids, result.model, loss_config)
        table.append({"C": c, "val_f": f})
        if f > best_f:
            best_c, best_f = c, f
    return best_c, table


def sign_test(scores_a: list[float], scores_b: list[float]) -> float:
    """Two-sided paired sign test p-value; ties dropped."""
    if len(scores_a) != len(scores_b):
        raise ValueError("paired scores must have equal length")
    wins = sum(1 for a, b in zip(scores_a, scores_b) if a > b)
    losses = sum(1 for a, b in zip(scores_a, scores_b) if a < b)
    n = wins + losses
    if n == 0:
        return 1.0
    k = min(wins, losses)
    tail = sum(math.comb(n, i) for i in range(0, k + 1)) / 2 ** n
    return min(1.0, 2.0 * tail)
