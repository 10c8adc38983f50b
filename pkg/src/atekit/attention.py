"""Rating-prediction network with multi-hop attention over sentence embeddings.

Forward pass per review (n = padded sentence count, d = embedding dim):

    A = softmax(W_a2 tanh(W_a1 S'^T))        # r x n, softmax along sentences
    M = A S'                                  # r x d
    p = softmax(W_o tanh(W_h flat(M) + b_h) + b_o)

Pad positions are masked to -inf before the attention softmax, so pad columns
of A are exactly zero and pad rows of S' receive zero gradient.  All gradients
are computed analytically; the optimizer is adaptive-moment gradient descent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

__all__ = [
    "AttentionParams",
    "ClassifierHead",
    "ModelConfig",
    "ReviewMatrix",
    "TrainLogEntry",
    "init_model",
    "attention_matrix",
    "review_representation",
    "predict_rating",
    "loss_and_gradients",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = "atekit-attention-checkpoint-v1"


@dataclass
class ModelConfig:
    d: int = 600
    r: int = 30
    d_a: int = 350
    h: int = 512
    n_max: int = 10
    classes: int = 5
    learning_rate: float = 0.001
    batch_size: int = 32
    max_epochs: int = 20
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("d", "r", "d_a", "h", "n_max", "classes", "batch_size", "max_epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.patience <= self.max_epochs):
            raise ValueError("need 0 <= patience <= max_epochs")


@dataclass
class AttentionParams:
    w_a1: np.ndarray  # d_a x d
    w_a2: np.ndarray  # r x d_a

    def copy(self) -> "AttentionParams":
        return AttentionParams(self.w_a1.copy(), self.w_a2.copy())


@dataclass
class ClassifierHead:
    w_h: np.ndarray  # h x (r*d)
    b_h: np.ndarray  # h
    w_o: np.ndarray  # classes x h
    b_o: np.ndarray  # classes

    def copy(self) -> "ClassifierHead":
        return ClassifierHead(self.w_h.copy(), self.b_h.copy(), self.w_o.copy(), self.b_o.copy())


@dataclass(frozen=True)
class ReviewMatrix:
    s_prime: np.ndarray  # n_max x d, zero rows at pad positions
    pad_mask: np.ndarray  # n_max bools, True = real sentence

    def __post_init__(self):
        if self.s_prime.shape[0] != self.pad_mask.shape[0]:
            raise ValueError("pad_mask length must match matrix rows")
        if not self.pad_mask.any():
            raise ValueError("review matrix needs at least one unmasked row")


def _uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_model(cfg: ModelConfig, rng: np.random.Generator) -> tuple[AttentionParams, ClassifierHead]:
    params = AttentionParams(
        w_a1=_uniform_init(rng, (cfg.d_a, cfg.d), cfg.d),
        w_a2=_uniform_init(rng, (cfg.r, cfg.d_a), cfg.d_a),
    )
    head = ClassifierHead(
        w_h=_uniform_init(rng, (cfg.h, cfg.r * cfg.d), cfg.r * cfg.d),
        b_h=np.zeros(cfg.h),
        w_o=_uniform_init(rng, (cfg.classes, cfg.h), cfg.h),
        b_o=np.zeros(cfg.classes),
    )
    return params, head


# ---------------------------------------------------------------------------
# Batched forward/backward over stacked arrays S (B,n,d), mask (B,n), y (B,)
# ---------------------------------------------------------------------------


def _attend(S: np.ndarray, mask: np.ndarray, p: AttentionParams) -> tuple[np.ndarray, np.ndarray]:
    H = np.einsum("kd,bnd->bkn", p.w_a1, S)
    T = np.tanh(H)
    Z = np.einsum("rk,bkn->brn", p.w_a2, T)
    Z = np.where(mask[:, None, :], Z, -np.inf)
    Z_shift = Z - Z.max(axis=2, keepdims=True)
    E = np.exp(Z_shift)  # exp(-inf) = 0 exactly at pads
    A = E / E.sum(axis=2, keepdims=True)
    return T, A


def _forward(S: np.ndarray, mask: np.ndarray, p: AttentionParams, head: ClassifierHead) -> dict:
    T, A = _attend(S, mask, p)
    M = np.einsum("brn,bnd->brd", A, S)
    flat = M.reshape(M.shape[0], -1)
    U = flat @ head.w_h.T + head.b_h
    V = np.tanh(U)
    logits = V @ head.w_o.T + head.b_o
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return {"T": T, "A": A, "M": M, "flat": flat, "V": V, "probs": probs}


def _loss_and_grads_arrays(
    S: np.ndarray,
    mask: np.ndarray,
    y: np.ndarray,
    p: AttentionParams,
    head: ClassifierHead,
    return_input_grads: bool = False,
):
    B = S.shape[0]
    cache = _forward(S, mask, p, head)
    probs, V, flat, M, A, T = (
        cache["probs"], cache["V"], cache["flat"], cache["M"], cache["A"], cache["T"],
    )
    loss = float(-np.mean(np.log(probs[np.arange(B), y])))

    d_logits = probs.copy()
    d_logits[np.arange(B), y] -= 1.0
    d_logits /= B
    g_w_o = d_logits.T @ V
    g_b_o = d_logits.sum(axis=0)
    dV = d_logits @ head.w_o
    dU = dV * (1.0 - V * V)
    g_w_h = dU.T @ flat
    g_b_h = dU.sum(axis=0)
    d_flat = dU @ head.w_h
    dM = d_flat.reshape(M.shape)
    dA = np.einsum("brd,bnd->brn", dM, S)
    dS = np.einsum("brn,brd->bnd", A, dM)
    # softmax backward per hop row; pad columns of A are 0, so dZ is 0 there
    dZ = A * (dA - np.sum(dA * A, axis=2, keepdims=True))
    g_w_a2 = np.einsum("brn,bkn->rk", dZ, T)
    dT = np.einsum("rk,brn->bkn", p.w_a2, dZ)
    dH = dT * (1.0 - T * T)
    g_w_a1 = np.einsum("bkn,bnd->kd", dH, S)
    grads = {
        "w_a1": g_w_a1, "w_a2": g_w_a2,
        "w_h": g_w_h, "b_h": g_b_h, "w_o": g_w_o, "b_o": g_b_o,
    }
    if return_input_grads:
        dS += np.einsum("bkn,kd->bnd", dH, p.w_a1)
        return loss, grads, dS
    return loss, grads


# ---------------------------------------------------------------------------
# Public single-review operations
# ---------------------------------------------------------------------------


def attention_matrix(review_mat: ReviewMatrix, p: AttentionParams) -> np.ndarray:
    """Multi-hop attention matrix (r x n_max); each hop row sums to 1 and pad
    columns are exactly zero."""
    if p.w_a1.shape[1] != review_mat.s_prime.shape[1]:
        raise ValueError(
            f"embedding dim mismatch: params expect {p.w_a1.shape[1]}, matrix has {review_mat.s_prime.shape[1]}"
        )
    _, A = _attend(review_mat.s_prime[None], review_mat.pad_mask[None], p)
    return A[0]


def review_representation(A: np.ndarray, review_mat: ReviewMatrix) -> np.ndarray:
    """M = A S' (r x d)."""
    if A.shape[1] != review_mat.s_prime.shape[0]:
        raise ValueError(f"A has {A.shape[1]} columns, matrix has {review_mat.s_prime.shape[0]} rows")
    return A @ review_mat.s_prime


def predict_rating(M: np.ndarray, head: ClassifierHead) -> np.ndarray:
    """Probability distribution over the star classes."""
    flat = M.reshape(-1)
    if head.w_h.shape[1] != flat.shape[0]:
        raise ValueError(f"head expects flattened size {head.w_h.shape[1]}, got {flat.shape[0]}")
    V = np.tanh(head.w_h @ flat + head.b_h)
    logits = head.w_o @ V + head.b_o
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def loss_and_gradients(
    batch: list[tuple[ReviewMatrix, int]],
    p: AttentionParams,
    head: ClassifierHead,
    return_input_grads: bool = False,
):
    """Mean cross-entropy of the batch plus analytic gradients for every
    parameter tensor.  Star labels are 1..5."""
    if not batch:
        raise ValueError("empty batch")
    S = np.stack([rm.s_prime for rm, _ in batch])
    mask = np.stack([rm.pad_mask for rm, _ in batch])
    y = np.array([stars - 1 for _, stars in batch])
    return _loss_and_grads_arrays(S, mask, y, p, head, return_input_grads)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainLogEntry:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


class _Adam:
    def __init__(self, shapes: dict[str, tuple[int, ...]], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.t = 0

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * (g * g)
            tensors[k] -= self.lr * (self.m[k] / b1t) / (np.sqrt(self.v[k] / b2t) + self.eps)


def _tensors(p: AttentionParams, head: ClassifierHead) -> dict[str, np.ndarray]:
    return {"w_a1": p.w_a1, "w_a2": p.w_a2,
            "w_h": head.w_h, "b_h": head.b_h, "w_o": head.w_o, "b_o": head.b_o}


def _shuffle_sentences(S: np.ndarray, mask: np.ndarray, rng: np.random.Generator):
    """Independently permute the real sentences of every review; pads stay at
    the tail and the mask is rebuilt accordingly."""
    out_S = np.zeros_like(S)
    out_mask = np.zeros_like(mask)
    for i in range(S.shape[0]):
        real = np.flatnonzero(mask[i])
        perm = rng.permutation(len(real))
        out_S[i, : len(real)] = S[i, real[perm]]
        out_mask[i, : len(real)] = True
    return out_S, out_mask


def _eval_arrays(S, mask, y, p, head) -> tuple[float, float]:
    cache = _forward(S, mask, p, head)
    probs = cache["probs"]
    loss = float(-np.mean(np.log(probs[np.arange(len(y)), y])))
    acc = float(np.mean(probs.argmax(axis=1) == y))
    return loss, acc


def train(
    train_data: list[tuple[ReviewMatrix, int]],
    val_data: list[tuple[ReviewMatrix, int]],
    cfg: ModelConfig,
) -> tuple[AttentionParams, ClassifierHead, list[TrainLogEntry]]:
    """Mini-batch training with per-epoch sentence shuffling inside every
    review and early stopping on validation accuracy.

    Deterministic for a fixed config seed; returns the parameters of the best
    validation epoch.
    """
    if not train_data:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    params, head = init_model(cfg, rng)
    tensors = _tensors(params, head)
    opt = _Adam({k: t.shape for k, t in tensors.items()}, lr=cfg.learning_rate)

    S_tr = np.stack([rm.s_prime for rm, _ in train_data])
    m_tr = np.stack([rm.pad_mask for rm, _ in train_data])
    y_tr = np.array([stars - 1 for _, stars in train_data])
    if val_data:
        S_va = np.stack([rm.s_prime for rm, _ in val_data])
        m_va = np.stack([rm.pad_mask for rm, _ in val_data])
        y_va = np.array([stars - 1 for _, stars in val_data])

    log: list[TrainLogEntry] = []
    best_score = -np.inf
    best = (params.copy(), head.copy())
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        S_ep, m_ep = _shuffle_sentences(S_tr, m_tr, rng)
        order = rng.permutation(len(train_data))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grads = _loss_and_grads_arrays(S_ep[idx], m_ep[idx], y_tr[idx], params, head)
            opt.step(tensors, grads)
        train_loss, train_acc = _eval_arrays(S_ep, m_ep, y_tr, params, head)
        if val_data:
            val_loss, val_acc = _eval_arrays(S_va, m_va, y_va, params, head)
            score = val_acc
        else:
            val_loss, val_acc = train_loss, train_acc
            score = -train_loss
        log.append(TrainLogEntry(epoch, train_loss, train_acc, val_loss, val_acc))
        if score > best_score:
            best_score = score
            best = (params.copy(), head.copy())
            stale = 0
        else:
            stale += 1
        if stale >= cfg.patience:
            break
    return best[0], best[1], log


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, cfg: ModelConfig, params: AttentionParams,
                    head: ClassifierHead, log: list[TrainLogEntry]) -> None:
    payload = {
        "magic": CHECKPOINT_MAGIC,
        "config": asdict(cfg),
        "params": {k: t.tolist() for k, t in _tensors(params, head).items()},
        "log": [asdict(entry) for entry in log],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True)
        f.write("\n")


def load_checkpoint(path) -> tuple[ModelConfig, AttentionParams, ClassifierHead, list[TrainLogEntry]]:
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("magic") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an attention checkpoint (magic mismatch)")
    cfg = ModelConfig(**payload["config"])
    t = {k: np.asarray(v, dtype=np.float64) for k, v in payload["params"].items()}
    params = AttentionParams(w_a1=t["w_a1"], w_a2=t["w_a2"])
    head = ClassifierHead(w_h=t["w_h"], b_h=t["b_h"], w_o=t["w_o"], b_o=t["b_o"])
    log = [TrainLogEntry(**entry) for entry in payload["log"]]
    return cfg, params, head, log
