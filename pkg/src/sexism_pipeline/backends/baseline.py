"""Deterministic lightweight baseline: hashed bag-of-tokens softmax classifier.

Bitwise reproducible by construction: zero-initialized weights, CRC32
feature hashing, full-batch gradient steps in a fixed order. Exists so the
whole pipeline (grid search included) runs in seconds with no accelerator.
"""

from __future__ import annotations

import json
import re
import zlib
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)

# Grid learning rates are transformer-scale (2e-5..5e-5); full-batch linear
# training needs a larger step to move within eight passes.
LR_SCALE = 2.0e4


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


class HashedTextClassifier(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression over hashed token counts.

    Parameters
    ----------
    n_features : size of the hashed feature space.
    learning_rate, epochs, batch_size, seed : shared hyperparameter surface
        with the transformer backend. Training is full-batch, so
        ``batch_size`` does not affect the result; ``seed`` is recorded but
        unused (zero init leaves nothing random).
    classes : explicit class order. Fixes the probability column layout even
        when a fold's training portion misses a class.
    """

    def __init__(
        self,
        n_features: int = 4096,
        learning_rate: float = 5e-5,
        epochs: int = 4,
        batch_size: int = 32,
        seed: int = 0,
        classes: Sequence[str] | None = None,
    ):
        self.n_features = n_features
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.classes = classes

    def _featurize(self, texts: Sequence[str]) -> np.ndarray:
        X = np.zeros((len(texts), self.n_features))
        for i, text in enumerate(texts):
            tokens = _TOKEN_RE.findall(text.lower())
            for tok in tokens:
                X[i, zlib.crc32(tok.encode("utf-8")) % self.n_features] += 1.0
            if tokens:
                X[i] /= len(tokens)
        return X

    def fit(self, X: Sequence[str], y: Sequence[str], epoch_hook=None):
        texts = list(X)
        labels = list(y)
        if not texts:
            raise ValueError("empty training set")
        if self.classes is not None:
            self.classes_ = np.asarray(list(self.classes), dtype=object)
        else:
            self.classes_ = np.asarray(sorted(set(labels)), dtype=object)
        index = {c: i for i, c in enumerate(self.classes_)}
        try:
            targets = np.array([index[label] for label in labels])
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]!r} outside declared classes") from None

        n, n_classes = len(texts), len(self.classes_)
        Xf = self._featurize(texts)
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), targets] = 1.0

        lr = self.learning_rate * LR_SCALE
        W = np.zeros((n_classes, self.n_features))
        b = np.zeros(n_classes)
        for epoch in range(self.epochs):
            probs = _softmax(Xf @ W.T + b)
            grad = probs - onehot
            W -= lr * (grad.T @ Xf) / n
            b -= lr * grad.mean(axis=0)
            self.coef_ = W
            self.intercept_ = b
            if epoch_hook is not None:
                epoch_hook(epoch)
        self.coef_ = W
        self.intercept_ = b
        return self

    def predict_proba(self, X: Sequence[str]) -> np.ndarray:
        check_is_fitted(self, "coef_")
        Xf = self._featurize(list(X))
        return _softmax(Xf @ self.coef_.T + self.intercept_)

    def predict(self, X: Sequence[str]) -> np.ndarray:
        probs = self.predict_proba(X)
        return self.classes_[probs.argmax(axis=1)]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = {"params": self.get_params(), "classes": [str(c) for c in self.classes_]}
        np.savez(
            path,
            coef=self.coef_,
            intercept=self.intercept_,
            meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        )

    @classmethod
    def load(cls, path: str | Path) -> "HashedTextClassifier":
        with np.load(Path(path)) as blob:
            meta = json.loads(bytes(blob["meta"]).decode("utf-8"))
            est = cls(**meta["params"])
            est.classes_ = np.asarray(meta["classes"], dtype=object)
            est.coef_ = blob["coef"]
            est.intercept_ = blob["intercept"]
        return est
