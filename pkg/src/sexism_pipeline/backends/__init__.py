"""Classifier backends behind a single fit/predict surface.

Two implementations share one estimator protocol (sklearn-style
``fit``/``predict_proba``/``get_params``): a fine-tunable transformer
encoder and a deterministic hashed bag-of-tokens baseline for desk-scale
runs. This module owns the hyperparameter/backend descriptors, model
persistence, and score-vector types used everywhere downstream.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

from ..corpus import Dataset, Example, SEXISM_CATEGORIES
from ..errors import ConfigError, ModelIntegrityWarning, ModelLoadError, ValidationError
from .baseline import HashedTextClassifier
from .transformer import TransformerTextClassifier

HEAD_SOURCES = ("hidden", "pooler")
BACKEND_KINDS = ("transformer", "baseline")

STORAGE_FORMAT_VERSION = "1"


@dataclass(frozen=True)
class HyperParams:
    """One point in the hyperparameter space."""

    head_source: str = "hidden"
    learning_rate: float = 5e-5
    batch_size: int = 32
    epochs: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.head_source not in HEAD_SOURCES:
            raise ValidationError(f"unknown head_source {self.head_source!r}")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValidationError("batch_size and epochs must be >= 1")


@dataclass(frozen=True)
class BackendSpec:
    """Which classifier implementation to use, and its encoder."""

    kind: str
    checkpoint: str = ""
    max_sequence_length: int = 128

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "transformer" and not self.checkpoint:
            raise ConfigError("transformer backend requires a checkpoint")


@dataclass(frozen=True)
class ScoreVector:
    """Per-label scores from one model for one example.

    ``predict_scores`` emits probability distributions; standardized
    (z-scored) vectors reuse the type for ensemble audit records.
    """

    scores: Mapping[str, float]
    label_space: tuple[str, ...]

    def __post_init__(self) -> None:
        if set(self.scores) != set(self.label_space):
            raise ValidationError("scores must cover exactly the label space")

    def argmax(self) -> str:
        """Highest-scoring label; ties break by label-space declaration order."""
        best = self.label_space[0]
        for label in self.label_space[1:]:
            if self.scores[label] > self.scores[best]:
                best = label
        return best

    def max_score(self) -> float:
        return self.scores[self.argmax()]


@dataclass(frozen=True)
class PredictionRecord:
    """One model's scored prediction for one example."""

    example_id: str
    model_id: str
    scores: ScoreVector
    predicted_label: str
    winner_member: str | None = None  # ensemble audit: which member won


@dataclass
class TrainedModel:
    """A fitted estimator plus everything needed to reload and audit it."""

    backend: BackendSpec
    hyperparams: HyperParams
    label_space: tuple[str, ...]
    fingerprint: str
    estimator: object
    storage_path: Path | None = None


def _dataset_digest(train: Dataset) -> str:
    h = hashlib.sha256()
    for ex in train:
        h.update(
            "\x1f".join(
                [ex.id, ex.language, ex.text, ex.task1 or "", ex.task2 or ""]
            ).encode("utf-8")
        )
        h.update(b"\x1e")
    return h.hexdigest()


def training_fingerprint(
    backend: BackendSpec, hp: HyperParams, label_space: Sequence[str], train: Dataset
) -> str:
    payload = json.dumps(
        {
            "backend": asdict(backend),
            "hyperparams": asdict(hp),
            "label_space": list(label_space),
            "data": _dataset_digest(train),
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def gold_label(example: Example, label_space: Sequence[str]) -> str | None:
    """Pick the task-1 or task-2 label matching the label space."""
    task2 = any(label in SEXISM_CATEGORIES for label in label_space)
    return example.task2 if task2 else example.task1


def _make_estimator(backend: BackendSpec, hp: HyperParams, label_space: Sequence[str]):
    if backend.kind == "baseline":
        return HashedTextClassifier(
            learning_rate=hp.learning_rate,
            epochs=hp.epochs,
            batch_size=hp.batch_size,
            seed=hp.seed,
            classes=tuple(label_space),
        )
    return TransformerTextClassifier(
        checkpoint=backend.checkpoint,
        head_source=hp.head_source,
        max_sequence_length=backend.max_sequence_length,
        learning_rate=hp.learning_rate,
        epochs=hp.epochs,
        batch_size=hp.batch_size,
        seed=hp.seed,
        classes=tuple(label_space),
    )


def fit(
    backend: BackendSpec,
    train: Dataset,
    hp: HyperParams,
    label_space: Sequence[str],
    *,
    epoch_hook=None,
) -> TrainedModel:
    """Train one model; baseline results are bitwise deterministic.

    ``epoch_hook(epoch, estimator)`` is invoked after every epoch with the
    partially trained estimator, which is how grid search shares one run
    across all epoch values of otherwise-identical configurations.
    """
    if len(train) == 0:
        raise ValueError("cannot fit on an empty dataset")
    label_space = tuple(label_space)
    labels: list[str] = []
    for ex in train:
        label = gold_label(ex, label_space)
        if label is None:
            raise ValidationError(f"id={ex.id}: missing gold label for training")
        if label not in label_space:
            raise ValidationError(f"id={ex.id}: label {label!r} outside label space")
        labels.append(label)
    texts = [ex.text for ex in train]
    estimator = _make_estimator(backend, hp, label_space)
    hook = None
    if epoch_hook is not None:
        hook = lambda epoch: epoch_hook(epoch, estimator)  # noqa: E731
    estimator.fit(texts, labels, epoch_hook=hook)
    return TrainedModel(
        backend=backend,
        hyperparams=hp,
        label_space=label_space,
        fingerprint=training_fingerprint(backend, hp, label_space, train),
        estimator=estimator,
    )


def predict_scores(model: TrainedModel, batch: Sequence[Example]) -> list[ScoreVector]:
    """One probability distribution over the model's label space per example."""
    if not batch:
        raise ValueError("empty batch")
    probs = model.estimator.predict_proba([ex.text for ex in batch])
    out = []
    for row in probs:
        out.append(
            ScoreVector(
                scores={label: float(p) for label, p in zip(model.estimator.classes_, row)},
                label_space=model.label_space,
            )
        )
    return out


def predict_labels(
    model: TrainedModel, batch: Sequence[Example], model_id: str = "model"
) -> list[tuple[str, PredictionRecord]]:
    """Argmax labels with full score vectors retained for audit."""
    out = []
    for ex, vector in zip(batch, predict_scores(model, batch)):
        label = vector.argmax()
        out.append(
            (label, PredictionRecord(example_id=ex.id, model_id=model_id,
                                     scores=vector, predicted_label=label))
        )
    return out


# --- persistence ---------------------------------------------------------

_MANIFEST = "manifest.txt"


def _manifest_lines(model: TrainedModel) -> list[str]:
    hp, backend = model.hyperparams, model.backend
    return [
        f"format_version={STORAGE_FORMAT_VERSION}",
        f"backend_kind={backend.kind}",
        f"checkpoint={backend.checkpoint}",
        f"max_sequence_length={backend.max_sequence_length}",
        f"head_source={hp.head_source}",
        f"learning_rate={hp.learning_rate!r}",
        f"batch_size={hp.batch_size}",
        f"epochs={hp.epochs}",
        f"seed={hp.seed}",
        f"label_space={','.join(model.label_space)}",
        f"fingerprint={model.fingerprint}",
    ]


def _integrity_digest(path: Path, manifest_body: str) -> str:
    h = hashlib.sha256(manifest_body.encode("utf-8"))
    for file in sorted(p for p in path.rglob("*") if p.is_file() and p.name != _MANIFEST):
        h.update(str(file.relative_to(path)).encode("utf-8"))
        h.update(file.read_bytes())
    return h.hexdigest()


def save_model(model: TrainedModel, path: str | Path) -> Path:
    """Persist manifest plus weight blobs under a directory."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if model.backend.kind == "baseline":
        model.estimator.save(path / "weights.npz")
    else:
        model.estimator.save(path / "estimator")
    body = "\n".join(_manifest_lines(model)) + "\n"
    integrity = _integrity_digest(path, body)
    (path / _MANIFEST).write_text(body + f"integrity={integrity}\n", encoding="utf-8")
    model.storage_path = path
    return path


def load_model(path: str | Path) -> TrainedModel:
    """Reload a persisted model, verifying format version and integrity."""
    path = Path(path)
    manifest_path = path / _MANIFEST
    if not manifest_path.exists():
        raise ModelLoadError(f"no model manifest at {manifest_path}")
    fields: dict[str, str] = {}
    body_lines: list[str] = []
    for line in manifest_path.read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition("=")
        fields[key] = value
        if key != "integrity":
            body_lines.append(line)
    version = fields.get("format_version")
    if version != STORAGE_FORMAT_VERSION:
        raise ModelLoadError(
            f"stored format version {version!r} unsupported "
            f"(this build reads version {STORAGE_FORMAT_VERSION!r})"
        )
    body = "\n".join(body_lines) + "\n"
    if fields.get("integrity") != _integrity_digest(path, body):
        warnings.warn(
            f"model at {path} failed its integrity check (manifest or weights modified)",
            ModelIntegrityWarning,
            stacklevel=2,
        )
    backend = BackendSpec(
        kind=fields["backend_kind"],
        checkpoint=fields["checkpoint"],
        max_sequence_length=int(fields["max_sequence_length"]),
    )
    hp = HyperParams(
        head_source=fields["head_source"],
        learning_rate=float(fields["learning_rate"]),
        batch_size=int(fields["batch_size"]),
        epochs=int(fields["epochs"]),
        seed=int(fields["seed"]),
    )
    try:
        if backend.kind == "baseline":
            estimator = HashedTextClassifier.load(path / "weights.npz")
        else:
            estimator = TransformerTextClassifier.load(path / "estimator")
    except (OSError, KeyError, ValueError) as exc:
        raise ModelLoadError(f"cannot load weights under {path}: {exc}") from exc
    return TrainedModel(
        backend=backend,
        hyperparams=hp,
        label_space=tuple(fields["label_space"].split(",")),
        fingerprint=fields["fingerprint"],
        estimator=estimator,
        storage_path=path,
    )
