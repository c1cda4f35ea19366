"""Masked color model: a small transformer encoder over palette sequences.

Implemented directly on numpy with hand-written backpropagation so the
analytic gradients can be checked against finite differences, and so that
training is bitwise reproducible for a fixed seed.  Hidden math runs in
float64; checkpoints store float32 tensors, and a freshly trained model is
snapped to float32 precision so save/load round trips are exact.

The token table is laid out with the three specials (PAD=0, SEP=1, MASK=2)
first and color codes from id 3 upward, so the candidate slice of the
output head is simply logits[..., 3:].
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .color import Vocabulary, build_vocabulary
from .sequence import MaskedSequence, SEQUENCE_LENGTH, apply_masking, token_ids

__all__ = [
    "ModelConfig",
    "TrainSettings",
    "Batch",
    "Checkpoint",
    "TrainingDiverged",
    "CheckpointError",
    "init_params",
    "build_batch",
    "loss_and_grads",
    "sequence_loss",
    "predict_batch",
    "predict_topn",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

_MAGIC = b"CRMCKPT1"
_VERSION = 1
_NEG_INF = -1e9
_LN_EPS = 1e-5
_GELU_C0 = 0.7978845608028654  # sqrt(2/pi)
_GELU_C1 = 0.044715


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries where it happened."""


class CheckpointError(ValueError):
    """Checkpoint bytes are not a readable model."""


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 256
    max_len: int = SEQUENCE_LENGTH
    n_segments: int = 4  # ids 1..3 used, 0 reserved
    use_segment_embeddings: bool = True
    use_position_embeddings: bool = False
    dropout: float = 0.1

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")


@dataclass(frozen=True)
class TrainSettings:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 30
    mask_rate: float = 0.10
    seed: int = 0
    val_fraction: float = 0.1
    restarts: int = 1


@dataclass
class Batch:
    """Padded id arrays plus the flattened masked-position index."""

    tokens: np.ndarray  # (B, T) int64
    segments: np.ndarray  # (B, T) int64
    rows: np.ndarray  # (M,) batch row of each masked slot
    cols: np.ndarray  # (M,) sequence position of each masked slot
    targets: np.ndarray  # (M,) vocabulary ids of the true codes


def build_batch(masked: list[MaskedSequence], vocab: Vocabulary) -> Batch:
    b = len(masked)
    tokens = np.empty((b, SEQUENCE_LENGTH), dtype=np.int64)
    segments = np.empty((b, SEQUENCE_LENGTH), dtype=np.int64)
    rows, cols, targets = [], [], []
    for i, ms in enumerate(masked):
        tokens[i] = token_ids(ms.tokens, vocab)
        segments[i] = ms.segments
        for pos, truth in zip(ms.mask_positions, ms.targets):
            rows.append(i)
            cols.append(pos)
            targets.append(vocab.id_of_nearest(truth))
    return Batch(
        tokens,
        segments,
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(targets, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def init_params(config: ModelConfig, vocab_size: int, rng: np.random.Generator) -> dict:
    """Fresh parameter tensors, keyed by name.  Output head starts at zero."""
    d, ff = config.d_model, config.d_ff

    def normal(*shape):
        return rng.normal(0.0, 0.02, size=shape)

    params = {"tok_emb": normal(vocab_size, d)}
    if config.use_segment_embeddings:
        params["seg_emb"] = normal(config.n_segments, d)
    if config.use_position_embeddings:
        params["pos_emb"] = normal(config.max_len, d)
    for i in range(config.n_layers):
        p = f"layer{i}."
        params[p + "ln1_g"] = np.ones(d)
        params[p + "ln1_b"] = np.zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            params[p + name] = normal(d, d)
        for name in ("bq", "bk", "bv", "bo"):
            params[p + name] = np.zeros(d)
        params[p + "ln2_g"] = np.ones(d)
        params[p + "ln2_b"] = np.zeros(d)
        params[p + "w1"] = normal(d, ff)
        params[p + "b1"] = np.zeros(ff)
        params[p + "w2"] = normal(ff, d)
        params[p + "b2"] = np.zeros(d)
    params["lnf_g"] = np.ones(d)
    params["lnf_b"] = np.zeros(d)
    params["head_w"] = np.zeros((d, vocab_size))
    params["head_b"] = np.zeros(vocab_size)
    return params


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def _gelu(x):
    u = _GELU_C0 * (x + _GELU_C1 * x ** 3)
    return 0.5 * x * (1.0 + np.tanh(u))


def _gelu_grad(x):
    u = _GELU_C0 * (x + _GELU_C1 * x ** 3)
    t = np.tanh(u)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * _GELU_C0 * (1.0 + 3.0 * _GELU_C1 * x ** 2)


def _layernorm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return g * xhat + b, (xhat, inv, g)


def _layernorm_grad(dy, cache):
    xhat, inv, g = cache
    n = xhat.shape[-1]
    dxhat = dy * g
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dx = (inv / n) * (
        n * dxhat
        - dxhat.sum(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _split_heads(x, n_heads):
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def _matgrad(inp, dout):
    """Gradient of y = inp @ w for (..., d) @ (d, k)."""
    return inp.reshape(-1, inp.shape[-1]).T @ dout.reshape(-1, dout.shape[-1])


def _forward(params, config, batch, train=False, rng=None):
    """Run the encoder; returns logits plus everything backward needs."""
    d = config.d_model
    scale = 1.0 / np.sqrt(d // config.n_heads)
    keep = 1.0 - config.dropout
    use_dropout = train and config.dropout > 0.0
    if use_dropout and rng is None:
        raise ValueError("training forward with dropout needs an rng")

    x = params["tok_emb"][batch.tokens]
    if config.use_segment_embeddings:
        x = x + params["seg_emb"][batch.segments]
    if config.use_position_embeddings:
        x = x + params["pos_emb"][np.arange(batch.tokens.shape[1])]

    # keys at padding positions are unreachable
    bias = np.where(batch.tokens == 0, _NEG_INF, 0.0)[:, None, None, :]

    cache = {"x0": x, "layers": [], "bias": bias}
    for i in range(config.n_layers):
        p = f"layer{i}."
        lc = {"x_in": x}
        a, lc["ln1"] = _layernorm(x, params[p + "ln1_g"], params[p + "ln1_b"])
        lc["a"] = a
        q = _split_heads(a @ params[p + "wq"] + params[p + "bq"], config.n_heads)
        k = _split_heads(a @ params[p + "wk"] + params[p + "bk"], config.n_heads)
        v = _split_heads(a @ params[p + "wv"] + params[p + "bv"], config.n_heads)
        scores = q @ k.transpose(0, 1, 3, 2) * scale + bias
        scores -= scores.max(axis=-1, keepdims=True)
        e = np.exp(scores)
        attn = e / e.sum(axis=-1, keepdims=True)
        ctx = _merge_heads(attn @ v)
        o = ctx @ params[p + "wo"] + params[p + "bo"]
        if use_dropout:
            m1 = (rng.random(o.shape) >= config.dropout) / keep
            o = o * m1
            lc["drop1"] = m1
        lc.update(q=q, k=k, v=v, attn=attn, ctx=ctx)
        x = x + o

        lc["f_in"] = x
        f, lc["ln2"] = _layernorm(x, params[p + "ln2_g"], params[p + "ln2_b"])
        h1 = f @ params[p + "w1"] + params[p + "b1"]
        g = _gelu(h1)
        h2 = g @ params[p + "w2"] + params[p + "b2"]
        if use_dropout:
            m2 = (rng.random(h2.shape) >= config.dropout) / keep
            h2 = h2 * m2
            lc["drop2"] = m2
        lc.update(f=f, h1=h1, g=g)
        x = x + h2
        cache["layers"].append(lc)

    y, cache["lnf"] = _layernorm(x, params["lnf_g"], params["lnf_b"])
    cache["y"] = y
    logits = y @ params["head_w"] + params["head_b"]
    return logits, cache


def _backward(params, config, cache, dlogits):
    grads = {}
    y = cache["y"]
    grads["head_w"] = _matgrad(y, dlogits)
    grads["head_b"] = dlogits.sum(axis=(0, 1))
    dy = dlogits @ params["head_w"].T
    dx, grads["lnf_g"], grads["lnf_b"] = _layernorm_grad(dy, cache["lnf"])

    for i in reversed(range(config.n_layers)):
        p = f"layer{i}."
        lc = cache["layers"][i]
        scale = 1.0 / np.sqrt(config.d_model // config.n_heads)

        # feed-forward branch
        dh2 = dx if "drop2" not in lc else dx * lc["drop2"]
        grads[p + "w2"] = _matgrad(lc["g"], dh2)
        grads[p + "b2"] = dh2.sum(axis=(0, 1))
        dg = dh2 @ params[p + "w2"].T
        dh1 = dg * _gelu_grad(lc["h1"])
        grads[p + "w1"] = _matgrad(lc["f"], dh1)
        grads[p + "b1"] = dh1.sum(axis=(0, 1))
        df = dh1 @ params[p + "w1"].T
        dres, grads[p + "ln2_g"], grads[p + "ln2_b"] = _layernorm_grad(df, lc["ln2"])
        dx = dx + dres

        # attention branch
        do = dx if "drop1" not in lc else dx * lc["drop1"]
        grads[p + "wo"] = _matgrad(lc["ctx"], do)
        grads[p + "bo"] = do.sum(axis=(0, 1))
        dctx = _split_heads(do @ params[p + "wo"].T, config.n_heads)
        dattn = dctx @ lc["v"].transpose(0, 1, 3, 2)
        dv = lc["attn"].transpose(0, 1, 3, 2) @ dctx
        dscores = lc["attn"] * (dattn - (dattn * lc["attn"]).sum(axis=-1, keepdims=True))
        dq = dscores @ lc["k"] * scale
        dk = dscores.transpose(0, 1, 3, 2) @ lc["q"] * scale
        da = np.zeros_like(lc["a"])
        for name, grad in (("wq", dq), ("wk", dk), ("wv", dv)):
            merged = _merge_heads(grad)
            grads[p + name] = _matgrad(lc["a"], merged)
            grads[p + "b" + name[1]] = merged.sum(axis=(0, 1))
            da = da + merged @ params[p + name].T
        dres, grads[p + "ln1_g"], grads[p + "ln1_b"] = _layernorm_grad(da, lc["ln1"])
        dx = dx + dres

    dx0 = dx
    grads["tok_emb"] = np.zeros_like(params["tok_emb"])
    flat = dx0.reshape(-1, dx0.shape[-1])
    np.add.at(grads["tok_emb"], cache["tokens_flat"], flat)
    if config.use_segment_embeddings:
        grads["seg_emb"] = np.zeros_like(params["seg_emb"])
        np.add.at(grads["seg_emb"], cache["segments_flat"], flat)
    if config.use_position_embeddings:
        grads["pos_emb"] = dx0.sum(axis=0)
    return grads


def _masked_log_probs(logits, batch):
    """Log distribution over color codes at each masked slot."""
    z = logits[batch.rows, batch.cols][:, 3:]  # specials excluded
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    return z - log_norm


def sequence_loss(params, config, batch, train=False, rng=None):
    """Mean negative log-likelihood of the true codes at masked slots."""
    logits, _ = _forward(params, config, batch, train=train, rng=rng)
    logp = _masked_log_probs(logits, batch)
    return float(-logp[np.arange(len(batch.targets)), batch.targets - 3].mean())


def loss_and_grads(params, config, batch, train=False, rng=None):
    logits, cache = _forward(params, config, batch, train=train, rng=rng)
    cache["tokens_flat"] = batch.tokens.reshape(-1)
    cache["segments_flat"] = batch.segments.reshape(-1)

    m = len(batch.targets)
    z = logits[batch.rows, batch.cols][:, 3:]
    z = z - z.max(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        e = np.exp(z)
        probs = e / e.sum(axis=1, keepdims=True)
        idx = batch.targets - 3
        loss = float(-np.log(probs[np.arange(m), idx]).mean())

    dz = probs.copy()
    dz[np.arange(m), idx] -= 1.0
    dz /= m
    dlogits = np.zeros_like(logits)
    dlogits[batch.rows, batch.cols, 3:] = dz
    grads = _backward(params, config, cache, dlogits)
    return loss, grads


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    config: ModelConfig
    vocab: Vocabulary
    params: dict = field(repr=False)

    @property
    def vocab_size(self) -> int:
        return self.vocab.size


def _code_probs(checkpoint: Checkpoint, batch: Batch) -> np.ndarray:
    logits, _ = _forward(checkpoint.params, checkpoint.config, batch)
    return np.exp(_masked_log_probs(logits, batch))


def predict_batch(checkpoint: Checkpoint, masked: list[MaskedSequence], n: int):
    """Top-n candidates per masked slot for a batch of sequences.

    Returns one list per sequence, one ranked [(code, probability), ...]
    per masked position.  Ties break toward the smaller code id.
    """
    if not masked:
        return []
    batch = build_batch(masked, checkpoint.vocab)
    probs = _code_probs(checkpoint, batch)
    codes = checkpoint.vocab.codes
    n = min(n, len(codes))
    out = [[] for _ in masked]
    for j in range(len(batch.rows)):
        p = probs[j]
        order = np.lexsort((np.arange(len(p)), -p))[:n]
        out[batch.rows[j]].append([(codes[i], float(p[i])) for i in order])
    return out


def predict_topn(checkpoint: Checkpoint, masked: MaskedSequence, n: int):
    """Top-n candidates per masked slot of one sequence."""
    return predict_batch(checkpoint, [masked], n)[0]


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _snap_to_f32(params: dict) -> dict:
    return {k: v.astype(np.float32).astype(np.float64) for k, v in params.items()}


def _rng_for(run_seed, *key):
    return np.random.default_rng(np.random.SeedSequence(entropy=run_seed, spawn_key=key))


def _run_training(sequences, config, settings, vocab, val_sequences, run_seed):
    params = init_params(config, vocab.size, _rng_for(run_seed, 0))

    if val_sequences is None:
        n_val = max(1, int(round(settings.val_fraction * len(sequences))))
        order = _rng_for(run_seed, 2).permutation(len(sequences))
        val_sequences = [sequences[i] for i in order[:n_val]]
        train_sequences = [sequences[i] for i in order[n_val:]]
    else:
        train_sequences = list(sequences)
    if not train_sequences:
        raise ValueError("no training sequences left after the validation split")

    val_rng = _rng_for(run_seed, 90)
    val_masked = [apply_masking(s, vocab, val_rng, settings.mask_rate) for s in val_sequences]
    val_batch = build_batch(val_masked, vocab)

    adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    step = 0
    history = []

    for epoch in range(settings.epochs):
        epoch_rng = _rng_for(run_seed, 1, epoch)
        order = epoch_rng.permutation(len(train_sequences))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), settings.batch_size):
            chosen = order[start:start + settings.batch_size]
            masked = [
                apply_masking(train_sequences[i], vocab, epoch_rng, settings.mask_rate)
                for i in chosen
            ]
            batch = build_batch(masked, vocab)
            loss, grads = loss_and_grads(
                params, config, batch, train=True, rng=epoch_rng
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {n_batches}"
                )
            step += 1
            lr_t = settings.learning_rate * (
                np.sqrt(1.0 - settings.beta2 ** step) / (1.0 - settings.beta1 ** step)
            )
            for key in params:
                gr = grads[key]
                adam_m[key] = settings.beta1 * adam_m[key] + (1 - settings.beta1) * gr
                adam_v[key] = settings.beta2 * adam_v[key] + (1 - settings.beta2) * gr ** 2
                params[key] -= lr_t * adam_m[key] / (np.sqrt(adam_v[key]) + settings.adam_eps)
            epoch_loss += loss
            n_batches += 1

        val_loss = sequence_loss(params, config, val_batch)
        history.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / n_batches,
                "val_loss": val_loss,
            }
        )
    return params, history


def train(sequences, config: ModelConfig, settings: TrainSettings = TrainSettings(),
          vocab: Vocabulary | None = None, val_sequences=None):
    """Train a masked color model from scratch.

    Returns (checkpoint, history); history holds one record per epoch with
    train and validation loss.  With settings.restarts > 1 the run with the
    best final validation loss wins.  Identical seeds produce bitwise
    identical checkpoints.
    """
    if not sequences:
        raise ValueError("empty training corpus")
    if vocab is None:
        vocab = build_vocabulary(sequences)
    if not vocab.codes:
        raise ValueError("vocabulary has no color codes")

    best = None
    for run in range(max(1, settings.restarts)):
        run_seed = settings.seed + 7919 * run
        params, history = _run_training(
            sequences, config, settings, vocab, val_sequences, run_seed
        )
        final_val = history[-1]["val_loss"] if history else np.inf
        if best is None or final_val < best[0]:
            best = (final_val, params, history)

    _, params, history = best
    checkpoint = Checkpoint(config=config, vocab=vocab, params=_snap_to_f32(params))
    return checkpoint, history


# ---------------------------------------------------------------------------
# Checkpoint file format (little-endian, float32 tensors)
# ---------------------------------------------------------------------------

def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    names = sorted(checkpoint.params)
    header = {
        "config": asdict(checkpoint.config),
        "vocab": json.loads(checkpoint.vocab.to_json()),
        "tensors": [
            {"name": k, "shape": list(checkpoint.params[k].shape)} for k in names
        ],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for k in names:
            fh.write(np.ascontiguousarray(checkpoint.params[k], dtype="<f4").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise CheckpointError(f"bad magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        try:
            header = json.loads(fh.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt header: {exc}") from exc
        config = ModelConfig(**header["config"])
        vocab = Vocabulary.from_json(json.dumps(header["vocab"]))
        params = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 4)
            if len(raw) != count * 4:
                raise CheckpointError(f"tensor {spec['name']} truncated")
            params[spec["name"]] = (
                np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
            )
        if fh.read(1):
            raise CheckpointError("trailing bytes after tensors")
    return Checkpoint(config=config, vocab=vocab, params=params)
