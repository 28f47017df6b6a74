"""Fine-tunable transformer-encoder classifier.

The classification head consumes either the encoder's pooled sentence
representation (``head_source="pooler"``) or the final-layer hidden state at
the sequence-start position (``head_source="hidden"``); both feed an
identical linear head. All encoder layers are fine-tuned.

torch/transformers are imported lazily so the rest of the package works
without the ``transformer`` extra installed.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..errors import ConfigError


def _import_torch():
    try:
        import torch
        from transformers import AutoModel, AutoTokenizer
    except ImportError as exc:
        raise ConfigError(
            "the transformer backend requires the 'transformer' extra "
            "(pip install sexism-pipeline[transformer])"
        ) from exc
    return torch, AutoModel, AutoTokenizer


class TransformerTextClassifier(ClassifierMixin, BaseEstimator):
    """Encoder fine-tuning with a linear classification head.

    Deterministic for a fixed seed and single-device execution to the
    extent the numeric stack allows. The optimizer is AdamW with linear
    decay and no warmup unless ``warmup_fraction`` is set.
    """

    def __init__(
        self,
        checkpoint: str = "",
        head_source: str = "hidden",
        max_sequence_length: int = 128,
        learning_rate: float = 2e-5,
        epochs: int = 1,
        batch_size: int = 32,
        seed: int = 0,
        warmup_fraction: float = 0.0,
        device: str | None = None,
        classes: Sequence[str] | None = None,
    ):
        self.checkpoint = checkpoint
        self.head_source = head_source
        self.max_sequence_length = max_sequence_length
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.warmup_fraction = warmup_fraction
        self.device = device
        self.classes = classes

    def _resolve_device(self, torch) -> str:
        if self.device is not None:
            return self.device
        return "cuda" if torch.cuda.is_available() else "cpu"

    def _features(self, outputs):
        if self.head_source == "pooler":
            pooled = getattr(outputs, "pooler_output", None)
            if pooled is None:
                raise ConfigError(
                    f"checkpoint {self.checkpoint!r} provides no pooled output; "
                    "use head_source='hidden'"
                )
            return pooled
        return outputs.last_hidden_state[:, 0, :]

    def _encode(self, texts: list[str], device: str):
        return {
            k: v.to(device)
            for k, v in self._tokenizer(
                texts,
                return_tensors="pt",
                padding=True,
                truncation=True,
                max_length=self.max_sequence_length,
            ).items()
        }

    def fit(self, X: Sequence[str], y: Sequence[str], epoch_hook=None):
        torch, AutoModel, AutoTokenizer = _import_torch()
        if not self.checkpoint:
            raise ConfigError("transformer backend requires a checkpoint identifier")
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
            targets = torch.tensor([index[label] for label in labels])
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]!r} outside declared classes") from None

        torch.manual_seed(self.seed)
        device = self._resolve_device(torch)
        self._tokenizer = AutoTokenizer.from_pretrained(self.checkpoint)
        self._encoder = AutoModel.from_pretrained(self.checkpoint).to(device)
        self._head = torch.nn.Linear(
            self._encoder.config.hidden_size, len(self.classes_)
        ).to(device)

        n = len(texts)
        batches_per_epoch = max(1, (n + self.batch_size - 1) // self.batch_size)
        total_steps = self.epochs * batches_per_epoch
        warmup_steps = int(self.warmup_fraction * total_steps)
        optimizer = torch.optim.AdamW(
            list(self._encoder.parameters()) + list(self._head.parameters()),
            lr=self.learning_rate,
        )

        def lr_lambda(step: int) -> float:
            if warmup_steps and step < warmup_steps:
                return step / warmup_steps
            remaining = total_steps - step
            span = max(1, total_steps - warmup_steps)
            return max(0.0, remaining / span)

        scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, lr_lambda)
        loss_fn = torch.nn.CrossEntropyLoss()
        generator = torch.Generator().manual_seed(self.seed)

        self._encoder.train()
        self._head.train()
        for epoch in range(self.epochs):
            order = torch.randperm(n, generator=generator).tolist()
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                enc = self._encode([texts[i] for i in idx], device)
                feats = self._features(self._encoder(**enc))
                loss = loss_fn(self._head(feats), targets[idx].to(device))
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                scheduler.step()
            if epoch_hook is not None:
                self._encoder.eval()
                self._head.eval()
                epoch_hook(epoch)
                self._encoder.train()
                self._head.train()
        self._encoder.eval()
        self._head.eval()
        self._device = device
        return self

    def predict_proba(self, X: Sequence[str]) -> np.ndarray:
        check_is_fitted(self, "_head")
        torch, _, _ = _import_torch()
        texts = list(X)
        rows = []
        with torch.no_grad():
            for start in range(0, len(texts), self.batch_size):
                enc = self._encode(texts[start : start + self.batch_size], self._device)
                feats = self._features(self._encoder(**enc))
                probs = torch.softmax(self._head(feats), dim=1)
                rows.append(probs.cpu().double().numpy())
        return np.vstack(rows)

    def predict(self, X: Sequence[str]) -> np.ndarray:
        probs = self.predict_proba(X)
        return self.classes_[probs.argmax(axis=1)]

    def save(self, path: str | Path) -> None:
        torch, _, _ = _import_torch()
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        self._encoder.save_pretrained(path / "encoder")
        self._tokenizer.save_pretrained(path / "encoder")
        torch.save(self._head.state_dict(), path / "head.pt")
        meta = {"params": self.get_params(), "classes": [str(c) for c in self.classes_]}
        (path / "estimator.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TransformerTextClassifier":
        torch, AutoModel, AutoTokenizer = _import_torch()
        path = Path(path)
        meta = json.loads((path / "estimator.json").read_text(encoding="utf-8"))
        est = cls(**meta["params"])
        est.classes_ = np.asarray(meta["classes"], dtype=object)
        device = est._resolve_device(torch)
        est._tokenizer = AutoTokenizer.from_pretrained(path / "encoder")
        est._encoder = AutoModel.from_pretrained(path / "encoder").to(device)
        est._encoder.eval()
        est._head = torch.nn.Linear(est._encoder.config.hidden_size, len(est.classes_)).to(device)
        est._head.load_state_dict(torch.load(path / "head.pt", map_location=device))
        est._head.eval()
        est._device = device
        return est
