"""Deterministic training loop, metrics, and cross-testing."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .embeddings import CuiEmbeddingTable, cui_embedding
from .errors import RelmineError, ValidationError
from .model import (
    ModelConfig,
    ModelParams,
    backward,
    forward_loss,
    init_params,
    predict_bag,
)
from .sampling import Dataset
from .triplets import NA_LABEL

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 4e-4
    l2: float = 1e-7
    epochs: int = 20
    batch_size: int = 32
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValidationError(f"unknown optimizer '{self.optimizer}'")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "l2": self.l2,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "optimizer": self.optimizer,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


class _Sgd:
    def __init__(self, learning_rate: float):
        self.lr = learning_rate

    def step(self, params: ModelParams, grads) -> None:
        for name, g in grads.items():
            params.tensors[name] -= self.lr * g
        params.version += 1


class _Adam:
    """Adam with the standard defaults (b1=0.9, b2=0.999, eps=1e-8)."""

    def __init__(self, learning_rate: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: ModelParams, grads) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / b1c) / (np.sqrt(v / b2c) + self.eps)
            params.tensors[name] -= self.lr * update
        params.version += 1


def _entity_vectors(bag, cui_table: CuiEmbeddingTable):
    return cui_embedding(bag.head_cui, cui_table), cui_embedding(bag.tail_cui, cui_table)


def train(
    dataset: Dataset,
    cui_table: CuiEmbeddingTable,
    word_table,
    model_config: ModelConfig,
    train_config: TrainConfig,
):
    """Mini-batch training over the train split, shuffled per epoch.

    Deterministic for a given seed: shuffling, instance subsampling and
    accumulation order are all fixed. Returns (params, loss_log) where
    loss_log rows are (epoch, batch, mean loss).
    """
    train_bags = dataset.bags_in("train")
    if not train_bags:
        raise ValidationError("dataset has no train split")
    if not dataset.bags_in("test"):
        raise ValidationError("dataset has no test split")
    if model_config.num_labels != len(dataset.label_order):
        raise ValidationError(
            f"model num_labels={model_config.num_labels} but dataset has "
            f"{len(dataset.label_order)} labels"
        )
    if model_config.l2 != train_config.l2:
        raise ValidationError(
            "model_config.l2 and train_config.l2 disagree; set them equal"
        )
    label_index = {label: i for i, label in enumerate(dataset.label_order)}
    groups = sorted(
        {
            g
            for bag in dataset.bags
            for inst in bag.instances
            for g in (inst.e1_group, inst.e2_group)
        }
    )
    params = init_params(model_config, word_table, groups, dataset.label_order)
    entity_vecs = [_entity_vectors(bag, cui_table) for bag in train_bags]
    labels = [label_index[bag.label] for bag in train_bags]

    optimizer = (
        _Adam(train_config.learning_rate)
        if train_config.optimizer == "adam"
        else _Sgd(train_config.learning_rate)
    )
    rng = np.random.default_rng(train_config.seed)
    loss_log: list[tuple[int, int, float]] = []
    n = len(train_bags)
    for epoch in range(train_config.epochs):
        order = rng.permutation(n)
        for batch_no, start in enumerate(range(0, n, train_config.batch_size)):
            batch = order[start : start + train_config.batch_size]
            grads_sum = params.zero_grads()
            loss_sum = 0.0
            for i in batch:
                k1, k2 = entity_vecs[i]
                loss, trace = forward_loss(train_bags[i], labels[i], k1, k2, params, rng)
                loss_sum += loss
                for name, g in backward(trace, params).items():
                    grads_sum[name] += g
            scale = 1.0 / len(batch)
            mean_loss = loss_sum * scale
            if not np.isfinite(mean_loss):
                raise RelmineError(
                    f"non-finite loss {mean_loss} at epoch {epoch}, batch {batch_no}"
                )
            optimizer.step(params, {n_: g * scale for n_, g in grads_sum.items()})
            loss_log.append((epoch, batch_no, mean_loss))
    return params, loss_log


def write_loss_log(loss_log, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,batch,loss\n")
        for epoch, batch, loss in loss_log:
            fh.write(f"{epoch},{batch},{loss!r}\n")


@dataclass
class Metrics:
    """Confusion matrix plus the accuracy/precision/recall/F1 summary.

    positive_accuracy is exact-label accuracy restricted to bags whose
    true label is not NA; per-label scores treat each non-NA label
    one-vs-rest.
    """

    labels: tuple[str, ...]
    confusion: np.ndarray
    overall_accuracy: float = field(init=False)
    positive_accuracy: float = field(init=False)
    per_label: dict = field(init=False)

    def __post_init__(self) -> None:
        c = self.confusion
        total = float(c.sum())
        self.overall_accuracy = float(np.trace(c)) / total if total else 0.0
        na = self.labels.index(NA_LABEL) if NA_LABEL in self.labels else None
        pos_total = 0.0
        pos_correct = 0.0
        per_label = {}
        for i, label in enumerate(self.labels):
            if na is not None and i == na:
                continue
            row = float(c[i].sum())
            col = float(c[:, i].sum())
            tp = float(c[i, i])
            pos_total += row
            pos_correct += tp
            precision = tp / col if col else 0.0
            recall = tp / row if row else 0.0
            f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
            per_label[label] = {
                "precision": precision,
                "recall": recall,
                "f1": f1,
                "support": int(row),
            }
        self.positive_accuracy = pos_correct / pos_total if pos_total else 0.0
        self.per_label = per_label

    def negative_accuracy(self) -> float:
        """Fraction of NA bags predicted NA."""
        if NA_LABEL not in self.labels:
            return 0.0
        i = self.labels.index(NA_LABEL)
        row = float(self.confusion[i].sum())
        return float(self.confusion[i, i]) / row if row else 0.0

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "confusion": self.confusion.astype(int).tolist(),
            "overall_accuracy": self.overall_accuracy,
            "positive_accuracy": self.positive_accuracy,
            "negative_accuracy": self.negative_accuracy(),
            "per_label": self.per_label,
        }

    def format_table(self) -> str:
        lines = [
            f"overall accuracy   {self.overall_accuracy:.4f}",
            f"positive accuracy  {self.positive_accuracy:.4f}",
            "",
            f"{'label':<12} {'prec':>7} {'recall':>7} {'f1':>7} {'support':>8}",
        ]
        for label, row in self.per_label.items():
            lines.append(
                f"{label:<12} {row['precision']:>7.4f} {row['recall']:>7.4f} "
                f"{row['f1']:>7.4f} {row['support']:>8d}"
            )
        return "\n".join(lines)


def evaluate(
    params: ModelParams,
    dataset: Dataset,
    split: str,
    cui_table: CuiEmbeddingTable,
) -> Metrics:
    """Score one split: every bag predicted with all of its instances."""
    bags = dataset.bags_in(split)
    if not bags:
        raise ValidationError(f"dataset has no '{split}' split")
    labels = params.label_order
    index = {label: i for i, label in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for bag in bags:
        if bag.label not in index:
            raise ValidationError(f"bag label '{bag.label}' unknown to the model")
        k1, k2 = _entity_vectors(bag, cui_table)
        predicted, _ = predict_bag(bag, k1, k2, params)
        confusion[index[bag.label], index[predicted]] += 1
    return Metrics(labels=labels, confusion=confusion)


@dataclass
class CrossTestResult:
    overall_accuracy: float
    negative_accuracy: float
    metrics: Metrics

    def to_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "negative_accuracy": self.negative_accuracy,
            "metrics": self.metrics.to_dict(),
        }


def cross_test(
    params: ModelParams,
    dataset_a: Dataset,
    dataset_b: Dataset,
    cui_table: CuiEmbeddingTable,
) -> CrossTestResult:
    """Evaluate a model trained on dataset A against dataset B's test
    split (no retraining). A and B must share their positive bag set.
    Reports overall accuracy and accuracy on B's negative bags alone."""
    if dataset_a.positive_keys() != dataset_b.positive_keys():
        raise ValidationError("cross_test requires identical positive bag sets")
    metrics = evaluate(params, dataset_b, "test", cui_table)
    return CrossTestResult(
        overall_accuracy=metrics.overall_accuracy,
        negative_accuracy=metrics.negative_accuracy(),
        metrics=metrics,
    )


def grad_check(
    params: ModelParams,
    bag,
    k1: np.ndarray,
    k2: np.ndarray,
    label_index: int,
    epsilon: float = 1e-5,
    seed: int = 0,
    coords_per_tensor: int = 200,
    gradients: dict | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Small tensors are checked coordinate by coordinate; larger ones on a
    seeded random subsample of at least coords_per_tensor coordinates.
    Instance subsampling is re-seeded identically for every loss
    evaluation so the finite differences see a deterministic function.
    Pass precomputed ``gradients`` to audit an external gradient.
    """

    def loss_at() -> float:
        inner = np.random.default_rng(seed + 7919)
        return forward_loss(bag, label_index, k1, k2, params, inner)[0]

    if gradients is None:
        inner = np.random.default_rng(seed + 7919)
        _, trace = forward_loss(bag, label_index, k1, k2, params, inner)
        gradients = backward(trace, params)
    mask = params.output_mask()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in sorted(params.tensors):
        tensor = params.tensors[name]
        flat = tensor.ravel()
        size = flat.size
        if size <= coords_per_tensor:
            coords = range(size)
        else:
            coords = sorted(rng.choice(size, size=coords_per_tensor, replace=False).tolist())
        grad_flat = gradients[name].ravel()
        mask_flat = mask.ravel() if (mask is not None and name == "w_out") else None
        for c in coords:
            if mask_flat is not None and mask_flat[c] == 0.0:
                continue  # constrained coordinate, not a free parameter
            original = flat[c]
            flat[c] = original + epsilon
            plus = loss_at()
            flat[c] = original - epsilon
            minus = loss_at()
            flat[c] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            analytic = grad_flat[c]
            denom = max(abs(analytic), abs(numeric), 1e-6)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
