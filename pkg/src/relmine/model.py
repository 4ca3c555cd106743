"""Bag-level relation classifier.

A pluggable sentence encoder maps each masked instance to a vector; a
trained query vector attends over the instance vectors of a bag; the two
entities' concept embeddings are projected low-dimensional and
concatenated with the attended sentence vector before a softmax layer.
All arithmetic is float64 and all gradients are exact and analytic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .sampling import LONG, Bag, Instance, group_mask_token

CHECKPOINT_FORMAT_VERSION = 1

SEP_TOKEN = "[SEP]"

ENCODER_VARIANTS = ("bow_linear", "avg_embed_proj", "token_attention")
ABLATIONS = ("none", "text_only", "cui_only")

# Tensors subject to the l2 penalty; the rest are biases.
_WEIGHT_NAMES = frozenset(
    {"w_bow", "w_proj", "q_attn", "special_emb", "v_ep", "w_ent1", "w_ent2", "w_out"}
)


@dataclass(frozen=True)
class ModelConfig:
    encoder_variant: str = "avg_embed_proj"
    d_e: int = 128
    d_r: int = 200
    d_k: int = 1000
    d_c: int = 100
    n_s: int = 10
    num_labels: int = 2
    l2: float = 1e-7
    seed: int = 0
    ablation: str = "none"

    def __post_init__(self) -> None:
        if self.encoder_variant not in ENCODER_VARIANTS:
            raise ValidationError(f"unknown encoder_variant '{self.encoder_variant}'")
        if self.ablation not in ABLATIONS:
            raise ValidationError(f"unknown ablation '{self.ablation}'")
        if self.num_labels < 2:
            raise ValidationError("num_labels must include NA and at least one relation")

    def to_dict(self) -> dict:
        return {
            "encoder_variant": self.encoder_variant,
            "d_e": self.d_e,
            "d_r": self.d_r,
            "d_k": self.d_k,
            "d_c": self.d_c,
            "n_s": self.n_s,
            "num_labels": self.num_labels,
            "l2": self.l2,
            "seed": self.seed,
            "ablation": self.ablation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


class ModelParams:
    """All learned tensors plus the frozen word table they encode against.

    ``version`` increments on every optimizer step; traces remember the
    version they were computed under and go stale when it moves.
    """

    def __init__(self, config, label_order, special_tokens, tensors, word_table, vocab=None):
        self.config = config
        self.label_order = tuple(label_order)
        self.special_tokens = tuple(special_tokens)
        self.special_index = {t: i for i, t in enumerate(self.special_tokens)}
        self.vocab = tuple(vocab) if vocab is not None else None
        self.vocab_index = (
            {t: i for i, t in enumerate(self.vocab)} if self.vocab is not None else None
        )
        self.tensors: dict[str, np.ndarray] = tensors
        self.word_table = word_table
        self.version = 0
        if len(self.label_order) != config.num_labels:
            raise ValidationError(
                f"label_order has {len(self.label_order)} labels, config says {config.num_labels}"
            )

    def weight_names(self) -> list[str]:
        return [n for n in self.tensors if n in _WEIGHT_NAMES]

    def l2_penalty(self) -> float:
        lam = self.config.l2
        if lam == 0.0:
            return 0.0
        return 0.5 * lam * sum(float(np.sum(self.tensors[n] ** 2)) for n in self.weight_names())

    def output_mask(self) -> np.ndarray | None:
        """Column mask over w_out enforcing the configured ablation."""
        cfg = self.config
        if cfg.ablation == "none":
            return None
        mask = np.ones((cfg.num_labels, cfg.d_r + 2 * cfg.d_c))
        if cfg.ablation == "text_only":
            mask[:, cfg.d_r :] = 0.0
        else:  # cui_only
            mask[:, : cfg.d_r] = 0.0
        return mask

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {n: np.zeros_like(t) for n, t in self.tensors.items()}


def _expected_shapes(config: ModelConfig, vocab_size: int | None, n_special: int) -> dict:
    shapes = {
        "v_ep": (config.d_r,),
        "w_ent1": (config.d_c, config.d_k),
        "b_ent1": (config.d_c,),
        "w_ent2": (config.d_c, config.d_k),
        "b_ent2": (config.d_c,),
        "w_out": (config.num_labels, config.d_r + 2 * config.d_c),
        "b_out": (config.num_labels,),
    }
    if config.encoder_variant == "bow_linear":
        shapes["w_bow"] = (config.d_r, vocab_size)
    else:
        shapes["special_emb"] = (n_special, config.d_e)
        shapes["w_proj"] = (config.d_r, config.d_e)
        shapes["b_proj"] = (config.d_r,)
        if config.encoder_variant == "token_attention":
            shapes["q_attn"] = (config.d_e,)
    return shapes


def init_params(config: ModelConfig, word_table, semantic_groups, label_order) -> ModelParams:
    """Fresh parameters, uniform(-0.05, 0.05) from the config seed.

    Special tokens get dedicated learned rows: the separator plus one
    group mask token per semantic group.
    """
    special = [SEP_TOKEN] + [group_mask_token(g) for g in sorted(set(semantic_groups))]
    vocab = None
    if config.encoder_variant == "bow_linear":
        vocab = sorted(word_table.vectors) + special
    shapes = _expected_shapes(config, len(vocab) if vocab else None, len(special))
    rng = np.random.default_rng(config.seed)
    tensors = {
        name: rng.uniform(-0.05, 0.05, size=shape) for name, shape in sorted(shapes.items())
    }
    params = ModelParams(config, label_order, special, tensors, word_table, vocab)
    mask = params.output_mask()
    if mask is not None:
        tensors["w_out"] *= mask
    return params


def encoder_input(instance: Instance) -> list[str]:
    """Assemble the masked encoder sequence:
    title + masked sentence + separator + heading tokens. For
    long-distance instances the title mention is masked and the masked
    title entity is prefixed to the sentence (via the decomposition)."""
    title = list(instance.title_tokens)
    if instance.distance == LONG:
        s, e = instance.e1.token_span
        title = title[:s] + [group_mask_token(instance.e1_group)] + title[e:]
    head, _, middle, _, tail = instance.decomposition
    masked = (
        list(head)
        + [group_mask_token(instance.e1_group)]
        + list(middle)
        + [group_mask_token(instance.e2_group)]
        + list(tail)
    )
    return title + masked + [SEP_TOKEN] + list(instance.heading_tokens)


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x)
    e = np.exp(shifted)
    return e / np.sum(e)


def _gather_rows(tokens, params: ModelParams):
    """Token vectors for the embedding-based encoders.

    Returns (rows, special_ids) where rows[i] is the vector of the i-th
    covered token and special_ids[i] is its learned-row index or None
    for frozen word-table vectors. Out-of-vocabulary tokens are skipped.
    """
    rows = []
    special_ids = []
    emb = params.tensors["special_emb"]
    for tok in tokens:
        si = params.special_index.get(tok)
        if si is not None:
            rows.append(emb[si])
            special_ids.append(si)
            continue
        vec = params.word_table.get(tok)
        if vec is not None:
            rows.append(vec)
            special_ids.append(None)
    return rows, special_ids


def encode_sentence(instance: Instance, params: ModelParams, cache: dict | None = None) -> np.ndarray:
    """Encode one masked instance to a d_r vector.

    Pass a dict as ``cache`` to capture the intermediates backward needs.
    """
    tokens = encoder_input(instance)
    if not tokens:
        raise ValidationError("empty encoder input")
    cfg = params.config
    variant = cfg.encoder_variant
    if variant == "bow_linear":
        counts: dict[int, int] = {}
        for tok in tokens:
            idx = params.vocab_index.get(tok)
            if idx is not None:
                counts[idx] = counts.get(idx, 0) + 1
        r = np.zeros(cfg.d_r)
        w = params.tensors["w_bow"]
        for idx, c in counts.items():
            r += c * w[:, idx]
        if cache is not None:
            cache["counts"] = counts
        return r

    rows, special_ids = _gather_rows(tokens, params)
    w = params.tensors["w_proj"]
    b = params.tensors["b_proj"]
    if variant == "avg_embed_proj":
        if rows:
            mean = np.mean(np.stack(rows), axis=0)
        else:
            mean = np.zeros(cfg.d_e)
        if cache is not None:
            cache["mean"] = mean
            cache["special_ids"] = special_ids
            cache["n_rows"] = len(rows)
        return w @ mean + b

    # token_attention
    q = params.tensors["q_attn"]
    if rows:
        matrix = np.stack(rows)  # (L, d_e)
        logits = matrix @ q
        alpha = _softmax(logits)
        pooled = alpha @ matrix
    else:
        matrix = np.zeros((0, cfg.d_e))
        alpha = np.zeros(0)
        pooled = np.zeros(cfg.d_e)
    if cache is not None:
        cache["matrix"] = matrix
        cache["alpha"] = alpha
        cache["pooled"] = pooled
        cache["special_ids"] = special_ids
    return w @ pooled + b


def aggregate_bag(R: np.ndarray, v_ep: np.ndarray):
    """Attention over instance encodings: alpha = softmax(R^T v), r = R alpha."""
    if R.ndim != 2 or R.shape[1] < 1:
        raise ValidationError("R must be d_r x m with m >= 1")
    alpha = _softmax(R.T @ v_ep)
    return R @ alpha, alpha


def fuse_and_classify(r: np.ndarray, k1: np.ndarray, k2: np.ndarray, params: ModelParams):
    """Project both entity embeddings, concatenate with the bag vector,
    and classify: yhat = softmax(W f + b). Returns (yhat, cache dict)."""
    cfg = params.config
    if r.shape != (cfg.d_r,):
        raise ValidationError(f"bag vector has shape {r.shape}, expected ({cfg.d_r},)")
    if k1.shape != (cfg.d_k,) or k2.shape != (cfg.d_k,):
        raise ValidationError(f"entity embeddings must have shape ({cfg.d_k},)")
    t = params.tensors
    c1 = t["w_ent1"] @ k1 + t["b_ent1"]
    c2 = t["w_ent2"] @ k2 + t["b_ent2"]
    f = np.concatenate([r, c1, c2])
    logits = t["w_out"] @ f + t["b_out"]
    yhat = _softmax(logits)
    return yhat, {"c1": c1, "c2": c2, "f": f, "logits": logits, "k1": k1, "k2": k2}


@dataclass
class ForwardTrace:
    """Intermediates of one forward pass, sufficient for exact gradients."""

    params_version: int
    label_index: int
    instances: list[Instance]
    encoder_caches: list[dict]
    R: np.ndarray
    alpha: np.ndarray
    r: np.ndarray
    fuse_cache: dict = field(repr=False, default_factory=dict)
    yhat: np.ndarray = field(default_factory=lambda: np.zeros(0))
    loss: float = 0.0


def _sample_instances(bag: Bag, n_s: int, rng) -> list[Instance]:
    if len(bag.instances) <= n_s:
        return list(bag.instances)
    idx = sorted(rng.choice(len(bag.instances), size=n_s, replace=False).tolist())
    return [bag.instances[i] for i in idx]


def forward_loss(
    bag: Bag,
    label_index: int,
    k1: np.ndarray,
    k2: np.ndarray,
    params: ModelParams,
    rng,
) -> tuple[float, ForwardTrace]:
    """Loss on one bag: cross-entropy on the attended, fused prediction
    plus (l2/2) * squared norm of the weights (biases excluded).

    Training subsamples min(n_s, |bag|) instances without replacement
    from ``rng``; the trace retains everything backward() needs.
    """
    instances = _sample_instances(bag, params.config.n_s, rng)
    caches: list[dict] = []
    columns = []
    for inst in instances:
        cache: dict = {}
        columns.append(encode_sentence(inst, params, cache))
        caches.append(cache)
    R = np.stack(columns, axis=1)
    r, alpha = aggregate_bag(R, params.tensors["v_ep"])
    yhat, fuse_cache = fuse_and_classify(r, k1, k2, params)
    logits = fuse_cache["logits"]
    ce = float(np.log(np.sum(np.exp(logits - np.max(logits)))) + np.max(logits) - logits[label_index])
    loss = ce + params.l2_penalty()
    trace = ForwardTrace(
        params_version=params.version,
        label_index=label_index,
        instances=instances,
        encoder_caches=caches,
        R=R,
        alpha=alpha,
        r=r,
        fuse_cache=fuse_cache,
        yhat=yhat,
        loss=loss,
    )
    return loss, trace


def _encoder_backward(dr_i: np.ndarray, cache: dict, params: ModelParams, grads: dict) -> None:
    variant = params.config.encoder_variant
    t = params.tensors
    if variant == "bow_linear":
        gw = grads["w_bow"]
        for idx, c in cache["counts"].items():
            gw[:, idx] += c * dr_i
        return
    if variant == "avg_embed_proj":
        grads["w_proj"] += np.outer(dr_i, cache["mean"])
        grads["b_proj"] += dr_i
        n = cache["n_rows"]
        if n:
            dmean = t["w_proj"].T @ dr_i
            gemb = grads["special_emb"]
            for si in cache["special_ids"]:
                if si is not None:
                    gemb[si] += dmean / n
        return
    # token_attention
    grads["w_proj"] += np.outer(dr_i, cache["pooled"])
    grads["b_proj"] += dr_i
    matrix = cache["matrix"]
    if matrix.shape[0] == 0:
        return
    alpha = cache["alpha"]
    dpooled = t["w_proj"].T @ dr_i
    dalpha = matrix @ dpooled
    drows = np.outer(alpha, dpooled)
    dlogits = alpha * (dalpha - float(alpha @ dalpha))
    grads["q_attn"] += matrix.T @ dlogits
    drows += np.outer(dlogits, t["q_attn"])
    gemb = grads["special_emb"]
    for j, si in enumerate(cache["special_ids"]):
        if si is not None:
            gemb[si] += drows[j]


def backward(trace: ForwardTrace, params: ModelParams) -> dict[str, np.ndarray]:
    """Exact gradients of the traced loss for every learned tensor."""
    if trace.params_version != params.version:
        raise ValidationError("stale trace: parameters changed since the forward pass")
    cfg = params.config
    t = params.tensors
    grads = params.zero_grads()

    dz = trace.yhat.copy()
    dz[trace.label_index] -= 1.0
    f = trace.fuse_cache["f"]
    grads["w_out"] += np.outer(dz, f)
    grads["b_out"] += dz
    df = t["w_out"].T @ dz
    dr = df[: cfg.d_r]
    dc1 = df[cfg.d_r : cfg.d_r + cfg.d_c]
    dc2 = df[cfg.d_r + cfg.d_c :]
    grads["w_ent1"] += np.outer(dc1, trace.fuse_cache["k1"])
    grads["b_ent1"] += dc1
    grads["w_ent2"] += np.outer(dc2, trace.fuse_cache["k2"])
    grads["b_ent2"] += dc2

    R, alpha = trace.R, trace.alpha
    dalpha = R.T @ dr
    dR = np.outer(dr, alpha)
    ds = alpha * (dalpha - float(alpha @ dalpha))
    grads["v_ep"] += R @ ds
    dR += np.outer(t["v_ep"], ds)
    for i, cache in enumerate(trace.encoder_caches):
        _encoder_backward(dR[:, i], cache, params, grads)

    lam = cfg.l2
    if lam:
        for name in params.weight_names():
            grads[name] += lam * t[name]
    mask = params.output_mask()
    if mask is not None:
        grads["w_out"] *= mask
    return grads


def predict_bag(bag: Bag, k1: np.ndarray, k2: np.ndarray, params: ModelParams):
    """Deterministic prediction over all instances of the bag.

    Returns (label, yhat); argmax ties resolve to the lowest label index.
    """
    columns = [encode_sentence(inst, params) for inst in bag.instances]
    R = np.stack(columns, axis=1)
    r, _ = aggregate_bag(R, params.tensors["v_ep"])
    yhat, _ = fuse_and_classify(r, k1, k2, params)
    return params.label_order[int(np.argmax(yhat))], yhat


def save_checkpoint(params: ModelParams, path) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": params.config.to_dict(),
        "label_order": list(params.label_order),
        "special_tokens": list(params.special_tokens),
        "vocab": list(params.vocab) if params.vocab is not None else None,
        "tensors": {
            name: {"shape": list(t.shape), "data": t.ravel().tolist()}
            for name, t in sorted(params.tensors.items())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path, word_table) -> ModelParams:
    """Load a checkpoint, rejecting any tensor whose shape disagrees with
    the stored config."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValidationError(
            f"unsupported checkpoint format_version {payload.get('format_version')}"
        )
    config = ModelConfig.from_dict(payload["config"])
    vocab = payload["vocab"]
    special = payload["special_tokens"]
    expected = _expected_shapes(config, len(vocab) if vocab else None, len(special))
    tensors = {}
    for name, entry in payload["tensors"].items():
        if name not in expected:
            raise ValidationError(f"unexpected tensor '{name}' in checkpoint")
        shape = tuple(entry["shape"])
        if shape != expected[name]:
            raise ValidationError(
                f"tensor '{name}' has shape {shape}, expected {expected[name]}"
            )
        tensors[name] = np.array(entry["data"], dtype=np.float64).reshape(shape)
    missing = set(expected) - set(tensors)
    if missing:
        raise ValidationError(f"checkpoint missing tensor(s): {sorted(missing)}")
    return ModelParams(config, payload["label_order"], special, tensors, word_table, vocab)
