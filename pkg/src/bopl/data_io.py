"""File formats: supervised CSV, bandit-log CSV, model JSON, trace CSV.

Every format round-trips losslessly: reals are serialized with Python's
shortest round-trip repr, so a written value parses back to the identical
double.  Readers reject invariant violations (bad propensities, version
mismatches, ragged rows) instead of repairing them; errors carry 1-based
line numbers where applicable.  See docs/formats.md for the layouts.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .boosting import RoundStats, TrainTrace
from .dataset import BanditDataset, SupervisedExample
from .policy import Ensemble, SoftmaxPolicy
from .simulation import MULTICLASS, MULTILABEL, LoggingPolicy
from .trees import Predictor, Tree

MODEL_FORMAT = "bopl-model"
LOGGING_FORMAT = "bopl-logging-policy"
FORMAT_VERSION = 1

TRACE_COLUMNS = (
    "t", "alpha", "grad_term", "grad_norm", "emp_risk",
    "surrogate_risk", "snips_train", "bound",
)


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_float(text: str, what: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"line {line}: bad {what} value {text!r}") from None


# ---------------------------------------------------------------------------
# supervised CSV


def write_supervised_csv(path, examples: Sequence[SupervisedExample], task: str) -> None:
    if not examples:
        raise ValueError("no examples to write")
    d = examples[0].features.shape[0]
    label_col = "label" if task == MULTICLASS else "labels"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([label_col] + [f"f{j}" for j in range(d)])
        for e in examples:
            if task == MULTICLASS:
                if len(e.labels) != 1:
                    raise ValueError("multiclass examples carry exactly one label")
                lab = str(e.labels[0])
            else:
                lab = ";".join(str(c) for c in e.labels)
            writer.writerow([lab] + [_fmt(v) for v in e.features])


def read_supervised_csv(path, task: str) -> list[SupervisedExample]:
    if task not in (MULTICLASS, MULTILABEL):
        raise ValueError(f"task must be multiclass or multilabel, got {task!r}")
    expected_label = "label" if task == MULTICLASS else "labels"
    examples: list[SupervisedExample] = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != expected_label:
            raise ValueError(
                f"{path}: expected header starting with {expected_label!r}"
            )
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(f"line {line}: expected {width} fields, got {len(row)}")
            try:
                if task == MULTICLASS:
                    labels = (int(row[0]),)
                else:
                    labels = tuple(int(c) for c in row[0].split(";"))
            except ValueError:
                raise ValueError(f"line {line}: bad label field {row[0]!r}") from None
            features = np.array([
                _parse_float(v, "feature", line) for v in row[1:]
            ])
            examples.append(SupervisedExample(features=features, labels=labels))
    if not examples:
        raise ValueError(f"{path}: no data rows")
    return examples


def sniff_supervised_task(path) -> str | None:
    """Peek at a CSV header: 'label' means multiclass, 'labels' multilabel."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header and header[0] == "label":
        return MULTICLASS
    if header and header[0] == "labels":
        return MULTILABEL
    return None


# ---------------------------------------------------------------------------
# bandit log CSV


def write_bandit_csv(path, data: BanditDataset) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["action", "propensity", "reward"]
            + [f"f{j}" for j in range(data.feature_dim)]
        )
        for i in range(len(data)):
            writer.writerow(
                [int(data.actions[i]), _fmt(data.propensities[i]), _fmt(data.rewards[i])]
                + [_fmt(v) for v in data.features[i]]
            )


def read_bandit_csv(path, num_actions: int | None = None) -> BanditDataset:
    actions: list[int] = []
    propensities: list[float] = []
    rewards: list[float] = []
    features: list[np.ndarray] = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["action", "propensity", "reward"]:
            raise ValueError(f"{path}: expected header action,propensity,reward,f0,...")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(f"line {line}: expected {width} fields, got {len(row)}")
            try:
                a = int(row[0])
            except ValueError:
                raise ValueError(f"line {line}: bad action {row[0]!r}") from None
            p = _parse_float(row[1], "propensity", line)
            if not (0.0 < p <= 1.0):
                raise ValueError(f"line {line}: propensity {p} outside (0, 1]")
            if a < 0 or (num_actions is not None and a >= num_actions):
                raise ValueError(f"line {line}: action {a} out of range")
            actions.append(a)
            propensities.append(p)
            rewards.append(_parse_float(row[2], "reward", line))
            features.append(np.array([
                _parse_float(v, "feature", line) for v in row[3:]
            ]))
    if not actions:
        raise ValueError(f"{path}: no data rows")
    if num_actions is None:
        num_actions = max(actions) + 1
    return BanditDataset(
        features=np.stack(features),
        actions=np.array(actions),
        propensities=np.array(propensities),
        rewards=np.array(rewards),
        num_actions=num_actions,
    )


# ---------------------------------------------------------------------------
# model JSON


def _tree_to_obj(tree: Tree) -> dict:
    return {
        "is_leaf": tree.is_leaf.astype(int).tolist(),
        "feature": tree.feature.tolist(),
        "threshold": [None if math.isnan(t) else t for t in tree.threshold.tolist()],
        "value": tree.value.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
    }


def _tree_from_obj(obj: dict) -> Tree:
    return Tree(
        is_leaf=np.array(obj["is_leaf"], dtype=np.uint8),
        feature=np.array(obj["feature"], dtype=np.int64),
        threshold=np.array(
            [math.nan if t is None else float(t) for t in obj["threshold"]]
        ),
        value=np.array(obj["value"], dtype=np.float64),
        left=np.array(obj["left"], dtype=np.int64),
        right=np.array(obj["right"], dtype=np.int64),
    )


def write_model(path, policy: SoftmaxPolicy, metadata: dict | None = None) -> None:
    ens = policy.ensemble
    doc = {
        "format": MODEL_FORMAT,
        "format_version": FORMAT_VERSION,
        "num_actions": ens.num_actions,
        "feature_dim": ens.feature_dim,
        "beta": "inf" if math.isinf(policy.beta) else policy.beta,
        "members": [
            {
                "alpha": alpha,
                "kind": pred.kind,
                "scale": pred.scale,
                "tree": _tree_to_obj(pred.tree),
            }
            for alpha, pred in ens.members
        ],
        "metadata": metadata or {},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, allow_nan=False)
        fh.write("\n")


def read_model(path) -> tuple[SoftmaxPolicy, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"{path}: format_version {doc.get('format_version')} "
            f"(this reader supports {FORMAT_VERSION})"
        )
    members = [
        (
            float(m["alpha"]),
            Predictor(kind=m["kind"], tree=_tree_from_obj(m["tree"]), scale=float(m["scale"])),
        )
        for m in doc["members"]
    ]
    ensemble = Ensemble(
        members=members,
        num_actions=int(doc["num_actions"]),
        feature_dim=int(doc["feature_dim"]),
    )
    beta = math.inf if doc["beta"] == "inf" else float(doc["beta"])
    return SoftmaxPolicy(ensemble=ensemble, beta=beta), doc.get("metadata", {})


# ---------------------------------------------------------------------------
# logging-policy JSON


def write_logging_policy(path, policy: LoggingPolicy, metadata: dict | None = None) -> None:
    doc = {
        "format": LOGGING_FORMAT,
        "format_version": FORMAT_VERSION,
        "epsilon": policy.epsilon,
        "weights": [list(row) for row in policy.weights.tolist()],
        "metadata": metadata or {},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, allow_nan=False)
        fh.write("\n")


def read_logging_policy(path) -> tuple[LoggingPolicy, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != LOGGING_FORMAT:
        raise ValueError(f"{path}: not a {LOGGING_FORMAT} file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version")
    policy = LoggingPolicy(
        weights=np.array(doc["weights"], dtype=np.float64),
        epsilon=float(doc["epsilon"]),
    )
    return policy, doc.get("metadata", {})


# ---------------------------------------------------------------------------
# trace CSV


def write_trace_csv(path, trace: TrainTrace, config_echo: dict | None = None) -> None:
    meta = {
        "min_emp_risk": trace.min_emp_risk,
        "initial_gap": trace.initial_gap,
        "stop_reason": trace.stop_reason,
    }
    if config_echo:
        meta["config"] = config_echo
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for s in trace.rounds:
            writer.writerow([
                s.t,
                _fmt(s.alpha),
                "" if math.isnan(s.grad_term) else _fmt(s.grad_term),
                _fmt(s.grad_norm),
                _fmt(s.emp_risk),
                "" if s.surrogate_risk is None else _fmt(s.surrogate_risk),
                _fmt(s.snips_train),
                "" if s.bound is None else _fmt(s.bound),
            ])


def read_trace_csv(path) -> tuple[TrainTrace, dict]:
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing trace metadata line")
        meta = json.loads(first[2:])
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(TRACE_COLUMNS):
            raise ValueError(f"{path}: unexpected trace columns {header}")
        rounds: list[RoundStats] = []
        for line, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != len(TRACE_COLUMNS):
                raise ValueError(f"line {line}: expected {len(TRACE_COLUMNS)} fields")
            rounds.append(RoundStats(
                t=int(row[0]),
                alpha=_parse_float(row[1], "alpha", line),
                grad_term=math.nan if row[2] == "" else _parse_float(row[2], "grad_term", line),
                grad_norm=_parse_float(row[3], "grad_norm", line),
                emp_risk=_parse_float(row[4], "emp_risk", line),
                surrogate_risk=None if row[5] == "" else _parse_float(row[5], "surrogate_risk", line),
                snips_train=_parse_float(row[6], "snips_train", line),
                bound=None if row[7] == "" else _parse_float(row[7], "bound", line),
            ))
    trace = TrainTrace(
        rounds=rounds,
        min_emp_risk=float(meta["min_emp_risk"]),
        initial_gap=float(meta["initial_gap"]),
        stop_reason=str(meta["stop_reason"]),
    )
    return trace, meta


def ensure_parent(path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
