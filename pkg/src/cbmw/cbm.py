"""Concept bottleneck models over preprocessed cohorts.

Two variants share one concept predictor shape:

  vanilla:       x --g--> c_hat (tabular concepts) --f--> p(y)
  context-aware: x --g--> c_hat ; f consumes [c_hat, c_text] where c_text are
                 observed text concepts appended to the bottleneck.

The joint objective is the label loss plus lambda times the summed per-concept
losses (BCE for binary concepts, MSE for continuous). Text concepts are inputs,
not predictions: gradient from f is cut before it reaches the text block, so
training never backpropagates into observed text values.

Sequential training fits g on concepts first, then fits f on g's frozen
predictions (plus text context when enabled).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .nn import MLP, Adam, bce_loss, concept_loss
from .schema import BINARY, Cohort

MODES = ("joint", "sequential")


@dataclass(frozen=True)
class TrainConfig:
    context: bool = True
    mode: str = "joint"
    lam: float = 1.0
    hidden_g: int = 64
    hidden_f: int = 32
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if min(self.hidden_g, self.hidden_f, self.epochs, self.batch_size) < 1:
            raise ValueError("hidden sizes, epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")

    def to_dict(self) -> dict:
        return {
            "context": self.context, "mode": self.mode, "lam": self.lam,
            "hidden_g": self.hidden_g, "hidden_f": self.hidden_f,
            "lr": self.lr, "epochs": self.epochs,
            "batch_size": self.batch_size, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        return cls(**{k: doc[k] for k in cls().to_dict() if k in doc})


class CbmModel:
    def __init__(self, g: MLP, f: MLP, concept_names: tuple[str, ...],
                 n_tabular: int, binary_mask: np.ndarray, context: bool,
                 schema_hash: str, train_config: TrainConfig):
        self.g = g
        self.f = f
        self.concept_names = tuple(concept_names)  # tabular then text
        self.n_tabular = n_tabular
        self.binary_mask = np.asarray(binary_mask, dtype=bool)
        self.context = context
        self.schema_hash = schema_hash
        self.train_config = train_config

    @property
    def tabular_names(self) -> tuple[str, ...]:
        return self.concept_names[:self.n_tabular]

    @property
    def text_names(self) -> tuple[str, ...]:
        return self.concept_names[self.n_tabular:]

    def predict_concepts(self, x: np.ndarray) -> np.ndarray:
        return self.g.forward(np.atleast_2d(x))

    def bottleneck(self, x: np.ndarray, c_text: np.ndarray | None) -> np.ndarray:
        c_hat = self.predict_concepts(x)
        if not self.context:
            return c_hat
        if c_text is None:
            raise ValueError("context-aware model needs observed text concepts")
        return np.hstack([c_hat, np.atleast_2d(c_text)])

    def predict_from_bottleneck(self, b: np.ndarray) -> np.ndarray:
        """Label probabilities from a (possibly edited) bottleneck matrix."""
        b = np.atleast_2d(b)
        if b.shape[1] != self.f.in_dim:
            raise ValueError(f"bottleneck width {b.shape[1]} != {self.f.in_dim}")
        return self.f.forward(b)[:, 0]

    def predict(self, x: np.ndarray, c_text: np.ndarray | None = None):
        """Returns (label probabilities, bottleneck matrix)."""
        b = self.bottleneck(x, c_text)
        return self.predict_from_bottleneck(b), b

    def to_dict(self) -> dict:
        return {
            "g": self.g.to_dict(), "f": self.f.to_dict(),
            "concept_names": list(self.concept_names),
            "n_tabular": self.n_tabular,
            "binary_mask": [bool(v) for v in self.binary_mask],
            "context": self.context, "schema_hash": self.schema_hash,
            "train_config": self.train_config.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CbmModel":
        return cls(
            g=MLP.from_dict(doc["g"]), f=MLP.from_dict(doc["f"]),
            concept_names=tuple(doc["concept_names"]),
            n_tabular=int(doc["n_tabular"]),
            binary_mask=np.array(doc["binary_mask"], dtype=bool),
            context=bool(doc["context"]), schema_hash=doc["schema_hash"],
            train_config=TrainConfig.from_dict(doc["train_config"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CbmModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def tabular_concept_matrix(cohort: Cohort, split: str | None = None) -> np.ndarray:
    names = [c.name for c in cohort.concept_schema.tabular]
    recs = cohort.records if split is None else cohort.split_records(split)
    return np.array([[r.c_true[n] for n in names] for r in recs])


def text_concept_matrix(cohort: Cohort, split: str | None = None) -> np.ndarray:
    """Observed text concepts (extracted values, falling back to ground truth
    when no extraction has been attached)."""
    names = [c.name for c in cohort.concept_schema.text]
    recs = cohort.records if split is None else cohort.split_records(split)
    out = np.empty((len(recs), len(names)))
    for i, r in enumerate(recs):
        for j, n in enumerate(names):
            if n in r.c_text:
                out[i, j] = r.c_text[n]
            elif n in r.c_true:
                out[i, j] = r.c_true[n]
            else:
                raise ValueError(f"record {r.id} has no value for text concept {n}")
    return out


def joint_loss_and_grads(g: MLP, f: MLP, x, c_text, c_tab, y, lam: float,
                         binary_mask: np.ndarray, context: bool):
    """One forward/backward pass of the joint objective. Returns (loss, grads)
    with grads aligned to g.params() + f.params()."""
    c_hat = g.forward(x)
    f_in = np.hstack([c_hat, c_text]) if context else c_hat
    p = f.forward(f_in)
    l_y, dp = bce_loss(p, y)
    d_fin = f.backward(dp)
    d_chat = d_fin[:, :c_hat.shape[1]]  # text block receives no gradient
    l_c, dc = concept_loss(c_hat, c_tab, binary_mask)
    g.backward(d_chat + lam * dc)
    return l_y + lam * l_c, g.grads() + f.grads()


def _minibatches(rng, n: int, batch_size: int):
    order = rng.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]


def train(cohort: Cohort, cfg: TrainConfig, schema_hash: str) -> CbmModel:
    """Train a CBM on the train split of a preprocessed cohort."""
    cfg.validate()
    if not cohort.preprocessed:
        raise ValueError("cohort must be preprocessed before training")
    rng = np.random.default_rng(cfg.seed)
    tab = cohort.concept_schema.tabular
    text = cohort.concept_schema.text
    binary_mask = np.array([c.kind == BINARY for c in tab])
    n_tab, n_text = len(tab), len(text)

    x = cohort.feature_matrix("train")
    c_tab = tabular_concept_matrix(cohort, "train")
    c_text = text_concept_matrix(cohort, "train") if (cfg.context and n_text) else \
        np.zeros((x.shape[0], 0))
    y = cohort.labels("train").reshape(-1, 1).astype(np.float64)

    g = MLP.init(rng, [x.shape[1], cfg.hidden_g, n_tab], ["relu", "sigmoid"])
    f_in = n_tab + (n_text if cfg.context else 0)
    f = MLP.init(rng, [f_in, cfg.hidden_f, 1], ["relu", "sigmoid"])

    if cfg.mode == "joint":
        opt = Adam(g.params() + f.params(), lr=cfg.lr)
        for _ in range(cfg.epochs):
            for idx in _minibatches(rng, x.shape[0], cfg.batch_size):
                _, grads = joint_loss_and_grads(
                    g, f, x[idx], c_text[idx], c_tab[idx], y[idx],
                    cfg.lam, binary_mask, cfg.context)
                opt.step(grads)
    else:
        opt_g = Adam(g.params(), lr=cfg.lr)
        for _ in range(cfg.epochs):
            for idx in _minibatches(rng, x.shape[0], cfg.batch_size):
                c_hat = g.forward(x[idx])
                _, dc = concept_loss(c_hat, c_tab[idx], binary_mask)
                g.backward(dc)
                opt_g.step(g.grads())
        c_hat_frozen = g.forward(x)
        f_train_in = np.hstack([c_hat_frozen, c_text]) if cfg.context else c_hat_frozen
        opt_f = Adam(f.params(), lr=cfg.lr)
        for _ in range(cfg.epochs):
            for idx in _minibatches(rng, x.shape[0], cfg.batch_size):
                p = f.forward(f_train_in[idx])
                _, dp = bce_loss(p, y[idx])
                f.backward(dp)
                opt_f.step(f.grads())

    names = tuple(c.name for c in tab) + tuple(c.name for c in text)
    return CbmModel(g, f, names, n_tab, binary_mask, cfg.context,
                    schema_hash, cfg)


def predict_split(model: CbmModel, cohort: Cohort, split: str | None = None):
    """(probabilities, bottleneck) for a cohort split."""
    x = cohort.feature_matrix(split)
    c_text = text_concept_matrix(cohort, split) if model.context and \
        model.text_names else None
    return model.predict(x, c_text)
