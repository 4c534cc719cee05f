"""Benchmark triple ingestion, integer dictionaries, and membership indexing.

File layout is the standard benchmark distribution: ``train.txt``,
``valid.txt``, ``test.txt`` with one tab-separated (head, relation, tail)
name triple per line, plus optional ``entities.dict`` / ``relations.dict``
files (lines ``index<TAB>name``) that pin the integer assignment.
Without dictionary files, indices are assigned in first-appearance order
over train, then valid, then test, which is deterministic.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetError

Triple = tuple[int, int, int]

SPLIT_FILES = {"train": "train.txt", "valid": "valid.txt", "test": "test.txt"}


@dataclass
class LoadReport:
    """Per-split counts and out-of-vocabulary notes from one load."""

    counts: dict[str, int] = field(default_factory=dict)
    n_entities: int = 0
    n_relations: int = 0
    oov_entities: list[str] = field(default_factory=list)
    oov_relations: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"entities {self.n_entities}", f"relations {self.n_relations}"]
        for split, n in self.counts.items():
            lines.append(f"{split} {n}")
        lines.append(f"entities_only_in_valid_or_test {len(self.oov_entities)}")
        for name in self.oov_entities[:20]:
            lines.append(f"  oov_entity {name}")
        lines.append(f"relations_only_in_valid_or_test {len(self.oov_relations)}")
        for name in self.oov_relations[:20]:
            lines.append(f"  oov_relation {name}")
        return "\n".join(lines)


@dataclass
class FilterIndex:
    """Triple membership with train-only and all-splits scopes.

    ``tails_by_hr`` / ``heads_by_rt`` group the all-splits union for the
    filtered evaluation protocol; both views stay consistent with the
    flat sets by construction. Packed int64 key arrays back the
    vectorized batch lookups used by the samplers.
    """

    n_entities: int
    n_relations: int
    train_set: set[Triple]
    all_set: set[Triple]
    tails_by_hr: dict[tuple[int, int], np.ndarray]
    heads_by_rt: dict[tuple[int, int], np.ndarray]
    _train_keys: np.ndarray = field(repr=False, default=None)
    _all_keys: np.ndarray = field(repr=False, default=None)

    @classmethod
    def build(cls, train: np.ndarray, others: list[np.ndarray],
              n_entities: int, n_relations: int) -> "FilterIndex":
        train_set = {(int(h), int(r), int(t)) for h, r, t in train}
        all_set = set(train_set)
        for arr in others:
            all_set.update((int(h), int(r), int(t)) for h, r, t in arr)
        tails: dict[tuple[int, int], list[int]] = {}
        heads: dict[tuple[int, int], list[int]] = {}
        for h, r, t in all_set:
            tails.setdefault((h, r), []).append(t)
            heads.setdefault((r, t), []).append(h)
        tails_by_hr = {k: np.array(sorted(v), dtype=np.int64) for k, v in tails.items()}
        heads_by_rt = {k: np.array(sorted(v), dtype=np.int64) for k, v in heads.items()}
        fi = cls(n_entities, n_relations, train_set, all_set, tails_by_hr, heads_by_rt)
        fi._train_keys = np.sort(fi._pack(*zip(*train_set)) if train_set else np.empty(0, np.int64))
        fi._all_keys = np.sort(fi._pack(*zip(*all_set)) if all_set else np.empty(0, np.int64))
        return fi

    def _pack(self, heads, relations, tails) -> np.ndarray:
        return (
            np.asarray(heads, dtype=np.int64) * self.n_relations
            + np.asarray(relations, dtype=np.int64)
        ) * self.n_entities + np.asarray(tails, dtype=np.int64)

    def contains_batch(self, heads, relations, tails, scope: str = "all") -> np.ndarray:
        """Vectorized membership; broadcastable index arrays, boolean result."""
        keys = self._train_keys if scope == "train" else self._all_keys
        query = self._pack(*np.broadcast_arrays(heads, relations, tails))
        if len(keys) == 0:
            return np.zeros(query.shape, dtype=bool)
        idx = np.clip(np.searchsorted(keys, query), 0, len(keys) - 1)
        return keys[idx] == query


def contains(fi: FilterIndex, triple: Triple, scope: str = "all") -> bool:
    """Membership of ``triple`` in the train split or the split union.

    ``scope`` is ``"train"`` (false-negative labeling during training) or
    ``"all"`` (filtered evaluation).
    """
    key = (int(triple[0]), int(triple[1]), int(triple[2]))
    if scope == "train":
        return key in fi.train_set
    if scope == "all":
        return key in fi.all_set
    raise ValueError(f"unknown scope {scope!r}")


def candidate_filter(fi: FilterIndex, head=None, relation=None, tail=None) -> set[int]:
    """Entities completing a partial triple into a known triple (all splits).

    Exactly one of ``head`` / ``tail`` must be given alongside
    ``relation``; the missing slot is the one being completed. An unseen
    key yields the empty set.
    """
    if relation is None or (head is None) == (tail is None):
        raise ValueError("pass relation plus exactly one of head/tail")
    if tail is None:
        arr = fi.tails_by_hr.get((int(head), int(relation)))
    else:
        arr = fi.heads_by_rt.get((int(relation), int(tail)))
    return set() if arr is None else set(int(e) for e in arr)


@dataclass
class KgDataset:
    entity_to_id: dict[str, int]
    id_to_entity: list[str]
    relation_to_id: dict[str, int]
    id_to_relation: list[str]
    splits: dict[str, np.ndarray]  # each (M, 3) int64
    filter: FilterIndex
    report: LoadReport

    @property
    def n_entities(self) -> int:
        return len(self.id_to_entity)

    @property
    def n_relations(self) -> int:
        return len(self.id_to_relation)

    @property
    def train(self) -> np.ndarray:
        return self.splits["train"]

    @property
    def valid(self) -> np.ndarray:
        return self.splits.get("valid", np.empty((0, 3), dtype=np.int64))

    @property
    def test(self) -> np.ndarray:
        return self.splits.get("test", np.empty((0, 3), dtype=np.int64))


def _read_dict_file(path: str) -> dict[str, int]:
    mapping: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 'index<TAB>name'")
            idx, name = parts[0].strip(), parts[1].strip()
            try:
                mapping[name] = int(idx)
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer index {idx!r}") from None
    indices = sorted(mapping.values())
    if indices != list(range(len(indices))):
        raise DatasetError(f"{path}: indices are not dense 0..{len(indices) - 1}")
    return mapping


def _read_split(path: str) -> list[tuple[str, str, str]]:
    rows: list[tuple[str, str, str]] = []
    seen: set[tuple[str, str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip() == "":
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise DatasetError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}"
                )
            h, r, t = (p.strip() for p in parts)
            if not h or not r or not t:
                raise DatasetError(f"{path}:{lineno}: empty field")
            key = (h, r, t)
            if key in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate triple {key}")
            seen.add(key)
            rows.append(key)
    if not rows:
        raise DatasetError(f"empty split: {path}")
    return rows


def load_dataset(directory: str, splits=("train", "valid", "test")) -> KgDataset:
    """Load a benchmark directory into an integer-indexed dataset.

    Entity and relation indices are assigned in first-appearance order
    across the selected splits (train first), unless ``entities.dict`` /
    ``relations.dict`` files are present, which then fix the assignment.
    Names appearing only outside train are loaded normally but flagged
    in the report.
    """
    if "train" not in splits:
        raise DatasetError("the train split is required")
    raw: dict[str, list[tuple[str, str, str]]] = {}
    for split in splits:
        path = os.path.join(directory, SPLIT_FILES[split])
        if not os.path.exists(path):
            raise DatasetError(f"missing file: {path}")
        raw[split] = _read_split(path)

    ent_dict_path = os.path.join(directory, "entities.dict")
    rel_dict_path = os.path.join(directory, "relations.dict")
    fixed_entities = _read_dict_file(ent_dict_path) if os.path.exists(ent_dict_path) else None
    fixed_relations = _read_dict_file(rel_dict_path) if os.path.exists(rel_dict_path) else None

    entity_to_id: dict[str, int] = dict(fixed_entities) if fixed_entities else {}
    relation_to_id: dict[str, int] = dict(fixed_relations) if fixed_relations else {}
    train_entities: set[str] = set()
    train_relations: set[str] = set()
    oov_entities: list[str] = []
    oov_relations: list[str] = []

    encoded: dict[str, np.ndarray] = {}
    for split in splits:
        rows = np.empty((len(raw[split]), 3), dtype=np.int64)
        for i, (h, r, t) in enumerate(raw[split]):
            for name, is_entity in ((h, True), (r, False), (t, True)):
                table = entity_to_id if is_entity else relation_to_id
                fixed = fixed_entities if is_entity else fixed_relations
                if name not in table:
                    if fixed is not None:
                        kind = "entity" if is_entity else "relation"
                        raise DatasetError(f"{kind} {name!r} missing from dictionary file")
                    table[name] = len(table)
                if split == "train":
                    (train_entities if is_entity else train_relations).add(name)
                elif is_entity and name not in train_entities and name not in oov_entities:
                    oov_entities.append(name)
                elif not is_entity and name not in train_relations and name not in oov_relations:
                    oov_relations.append(name)
            rows[i] = (entity_to_id[h], relation_to_id[r], entity_to_id[t])
        encoded[split] = rows

    id_to_entity = [""] * len(entity_to_id)
    for name, idx in entity_to_id.items():
        id_to_entity[idx] = name
    id_to_relation = [""] * len(relation_to_id)
    for name, idx in relation_to_id.items():
        id_to_relation[idx] = name

    fi = FilterIndex.build(
        encoded["train"],
        [encoded[s] for s in splits if s != "train"],
        n_entities=len(entity_to_id),
        n_relations=len(relation_to_id),
    )
    report = LoadReport(
        counts={s: len(encoded[s]) for s in splits},
        n_entities=len(id_to_entity),
        n_relations=len(id_to_relation),
        oov_entities=oov_entities,
        oov_relations=oov_relations,
    )
    return KgDataset(
        entity_to_id=entity_to_id,
        id_to_entity=id_to_entity,
        relation_to_id=relation_to_id,
        id_to_relation=id_to_relation,
        splits=encoded,
        filter=fi,
        report=report,
    )


