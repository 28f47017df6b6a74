"""Dataset ingestion, validation, splitting, and task-2 gating.

Dataset files are header-bearing UTF-8 TSV with columns
``id  source  language  text  task1  task2``; the two label columns may be
absent for unlabeled test files. All corpus values are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from random import Random
from typing import Callable, Iterable, Iterator, Mapping

from .errors import ConsistencyError, DatasetFormatError, ValidationError

LANGUAGES = ("en", "es")
SOURCES = ("twitter", "gab")

SEXIST = "sexist"
NON_SEXIST = "non-sexist"
TASK1_LABELS = (SEXIST, NON_SEXIST)

SEXISM_CATEGORIES = (
    "ideological-inequality",
    "stereotyping-dominance",
    "objectification",
    "sexual-violence",
    "misogyny-non-sexual-violence",
)
# Six-class space used when scoring the end-to-end two-stage pipeline.
TASK2_LABELS = SEXISM_CATEGORIES + (NON_SEXIST,)

DATASET_ROLES = ("train", "validation", "test")
COLUMNS = ("id", "source", "language", "text", "task1", "task2")


@dataclass(frozen=True)
class Example:
    """One labeled social-media post."""

    id: str
    source: str
    language: str
    text: str
    task1: str | None = None
    task2: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("example id must be non-empty")
        if self.source not in SOURCES:
            raise ValidationError(f"unknown source {self.source!r} (expected one of {SOURCES})")
        if self.language not in LANGUAGES:
            raise ValidationError(
                f"unknown language {self.language!r} (expected one of {LANGUAGES})"
            )
        if not self.text.strip():
            raise ValidationError("text must be non-empty after whitespace trimming")
        if self.task1 is not None and self.task1 not in TASK1_LABELS:
            raise ValidationError(f"unknown task1 label {self.task1!r}")
        if self.task2 is not None and self.task2 not in TASK2_LABELS:
            raise ValidationError(f"unknown task2 label {self.task2!r}")
        if self.task1 is not None and self.task2 is not None:
            if (self.task2 == NON_SEXIST) != (self.task1 == NON_SEXIST):
                raise ConsistencyError(
                    f"task1={self.task1!r} is inconsistent with task2={self.task2!r}"
                )


@dataclass(frozen=True)
class Dataset:
    """Ordered, immutable collection of examples with unique ids."""

    examples: tuple[Example, ...]
    role: str
    provenance: str = "synthetic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "examples", tuple(self.examples))
        if self.role not in DATASET_ROLES:
            raise ValidationError(f"unknown dataset role {self.role!r}")
        seen: set[str] = set()
        for ex in self.examples:
            if ex.id in seen:
                raise DatasetFormatError(f"duplicate example id {ex.id!r}")
            seen.add(ex.id)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(ex.id for ex in self.examples)

    def by_id(self, example_id: str) -> Example:
        for ex in self.examples:
            if ex.id == example_id:
                return ex
        raise KeyError(example_id)

    def counts_by_language(self) -> dict[str, int]:
        counts = Counter(ex.language for ex in self.examples)
        return {lang: counts.get(lang, 0) for lang in LANGUAGES}

    def subset(self, ids: Iterable[str], provenance: str | None = None) -> "Dataset":
        """Examples whose id is in ``ids``, original order preserved."""
        wanted = set(ids)
        kept = tuple(ex for ex in self.examples if ex.id in wanted)
        return replace(self, examples=kept, provenance=provenance or self.provenance)


def _parse_header(line: str, path: Path) -> tuple[str, ...]:
    header = tuple(line.split("\t"))
    allowed = (COLUMNS[:4], COLUMNS[:5], COLUMNS)
    if header not in allowed:
        raise DatasetFormatError(
            f"{path}: bad header {header!r}; expected columns {COLUMNS} "
            "(task1/task2 optional, order fixed)"
        )
    return header


def load_dataset(path: str | Path, role: str) -> Dataset:
    """Load a TSV dataset file, validating every row.

    Row order is preserved; errors name the offending row.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"dataset file not found: {path}")
    raw = path.read_text(encoding="utf-8")
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    lines = [ln.rstrip("\r") for ln in lines]
    if not lines:
        raise DatasetFormatError(f"{path}: empty file (header row is mandatory)")

    header = _parse_header(lines[0], path)
    examples: list[Example] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(header):
            raise DatasetFormatError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(fields)}"
            )
        row = dict(zip(header, fields))
        rid = row["id"]
        if not rid:
            raise DatasetFormatError(f"{path}:{lineno}: missing id")
        if rid in seen:
            raise DatasetFormatError(f"{path}:{lineno}: duplicate id {rid!r}")
        seen.add(rid)
        try:
            examples.append(
                Example(
                    id=rid,
                    source=row["source"],
                    language=row["language"],
                    text=row["text"],
                    task1=row.get("task1") or None,
                    task2=row.get("task2") or None,
                )
            )
        except (ValidationError, ConsistencyError) as exc:
            raise type(exc)(f"{path}:{lineno} (id={rid}): {exc}") from exc
    return Dataset(examples=tuple(examples), role=role, provenance=str(path))


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset back to TSV.

    A label column is emitted when any example carries that label;
    round-trips ``load_dataset`` output byte-for-byte.
    """
    path = Path(path)
    has_task1 = any(ex.task1 is not None for ex in dataset)
    has_task2 = any(ex.task2 is not None for ex in dataset)
    header: tuple[str, ...] = COLUMNS[:4]
    if has_task1 or has_task2:
        header = COLUMNS[:5] if not has_task2 else COLUMNS
    out_lines = ["\t".join(header)]
    for ex in dataset:
        if "\t" in ex.text or "\n" in ex.text or "\r" in ex.text:
            raise ValidationError(f"id={ex.id}: text contains tab/newline, not TSV-safe")
        fields = [ex.id, ex.source, ex.language, ex.text]
        if len(header) >= 5:
            fields.append(ex.task1 or "")
        if len(header) == 6:
            fields.append(ex.task2 or "")
        out_lines.append("\t".join(fields))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out_lines) + "\n", encoding="utf-8")


def split_by_language(dataset: Dataset) -> dict[str, Dataset]:
    """Partition into one dataset per language, order preserved.

    Every known language gets a key; empty per-language datasets are fine.
    """
    out: dict[str, Dataset] = {}
    for lang in LANGUAGES:
        kept = tuple(ex for ex in dataset if ex.language == lang)
        out[lang] = replace(dataset, examples=kept)
    return out


@dataclass(frozen=True)
class SplitPlan:
    """Deterministic train/validation or k-fold assignment of example ids."""

    kind: str  # holdout | kfold
    seed: int
    train_fraction: float | None = None
    k: int | None = None
    assignments: Mapping[str, object] = field(default_factory=dict)

    def train_ids(self) -> tuple[str, ...]:
        return tuple(i for i, a in self.assignments.items() if a == "train")

    def validation_ids(self) -> tuple[str, ...]:
        return tuple(i for i, a in self.assignments.items() if a == "validation")

    def fold_ids(self, fold: int) -> tuple[str, ...]:
        return tuple(i for i, a in self.assignments.items() if a == fold)


def _strata(dataset: Dataset) -> dict[str, list[str]]:
    strata: dict[str, list[str]] = {}
    for ex in dataset:
        strata.setdefault(ex.task1 or "__unlabeled__", []).append(ex.id)
    return strata


def make_split(
    dataset: Dataset,
    kind: str,
    *,
    train_fraction: float = 0.8,
    k: int = 10,
    seed: int = 0,
) -> SplitPlan:
    """Stratified holdout or k-fold split plan.

    Pure function of (dataset ids, task-1 labels, kind, params, seed):
    the same inputs always produce identical assignments. Stratification is
    by task-1 label when present; per-stratum proportions stay within one
    example of the target.
    """
    if len(dataset) == 0:
        raise ValueError("cannot split an empty dataset")
    if kind not in ("holdout", "kfold"):
        raise ValueError(f"unknown split kind {kind!r}")
    rng = Random(seed)
    strata = _strata(dataset)
    assignments: dict[str, object] = {}

    if kind == "holdout":
        if not 0.0 < train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0,1), got {train_fraction}")
        target = round(train_fraction * len(dataset))
        quotas: dict[str, int] = {}
        remainders: list[tuple[float, str]] = []
        for label in sorted(strata):
            exact = train_fraction * len(strata[label])
            quotas[label] = int(exact)
            remainders.append((exact - int(exact), label))
        short = target - sum(quotas.values())
        # Largest-remainder top-up so the overall train size hits the target.
        for _, label in sorted(remainders, key=lambda t: (-t[0], t[1]))[:short]:
            quotas[label] += 1
        for label in sorted(strata):
            ids = list(strata[label])
            rng.shuffle(ids)
            for i, ex_id in enumerate(ids):
                assignments[ex_id] = "train" if i < quotas[label] else "validation"
        plan = SplitPlan(
            kind="holdout", seed=seed, train_fraction=train_fraction, assignments=assignments
        )
    else:
        if k < 2:
            raise ValueError(f"kfold requires k >= 2, got {k}")
        if k > len(dataset):
            raise ValueError(f"k={k} exceeds dataset size {len(dataset)}")
        loads = [0] * k
        for label in sorted(strata):
            ids = list(strata[label])
            rng.shuffle(ids)
            for ex_id in ids:
                fold = min(range(k), key=lambda f: (loads[f], f))
                assignments[ex_id] = fold
                loads[fold] += 1
        plan = SplitPlan(kind="kfold", seed=seed, k=k, assignments=assignments)

    # Re-key in dataset order so downstream iteration is stable.
    ordered = {ex.id: assignments[ex.id] for ex in dataset}
    return replace(plan, assignments=ordered)


def holdout_datasets(dataset: Dataset, plan: SplitPlan) -> tuple[Dataset, Dataset]:
    if plan.kind != "holdout":
        raise ValueError("plan is not a holdout split")
    train = dataset.subset(plan.train_ids())
    val = replace(dataset.subset(plan.validation_ids()), role="validation")
    return train, val


def kfold_datasets(dataset: Dataset, plan: SplitPlan) -> Iterator[tuple[int, Dataset, Dataset]]:
    """Yield (fold index, train portion, held-out portion) per fold."""
    if plan.kind != "kfold":
        raise ValueError("plan is not a kfold split")
    assert plan.k is not None
    for fold in range(plan.k):
        held = set(plan.fold_ids(fold))
        train = dataset.subset(i for i in dataset.ids if i not in held)
        val = replace(dataset.subset(held), role="validation")
        yield fold, train, val


def gate_for_task2_training(dataset: Dataset) -> Dataset:
    """Keep exactly the task-1-sexist examples for category training."""
    kept: list[Example] = []
    for ex in dataset:
        if ex.task1 is None:
            raise ValidationError(f"id={ex.id}: task1 label required for gating")
        if ex.task1 != SEXIST:
            continue
        if ex.task2 == NON_SEXIST:
            raise ConsistencyError(f"id={ex.id}: task1=sexist but task2=non-sexist")
        if ex.task2 is None:
            raise ConsistencyError(f"id={ex.id}: task1=sexist requires a task-2 category")
        kept.append(ex)
    if not kept:
        warnings.warn("task-2 gating produced an empty dataset", stacklevel=2)
    return replace(dataset, examples=tuple(kept), provenance=f"gated({dataset.provenance})")


def class_distribution_report(dataset: Dataset, label_of: Callable[[Example], str | None] | None = None) -> str:
    """Counts per label per language, rendered as a text table.

    Default reports both tasks' labels; pass ``label_of`` to report one
    labeling function.
    """
    sections: list[tuple[str, Callable[[Example], str | None]]]
    if label_of is not None:
        sections = [("labels", label_of)]
    else:
        sections = [("task1", lambda e: e.task1), ("task2", lambda e: e.task2)]

    lines: list[str] = []
    header = f"{'label':<32}" + "".join(f"{lang:>8}" for lang in LANGUAGES) + f"{'total':>8}"
    for name, getter in sections:
        counts: dict[str, Counter] = {}
        for ex in dataset:
            label = getter(ex)
            if label is None:
                continue
            counts.setdefault(label, Counter())[ex.language] += 1
        lines.append(f"[{name}]")
        lines.append(header)
        for label in sorted(counts):
            per_lang = [counts[label].get(lang, 0) for lang in LANGUAGES]
            lines.append(
                f"{label:<32}"
                + "".join(f"{c:>8}" for c in per_lang)
                + f"{sum(per_lang):>8}"
            )
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
