"""Deterministic generator for the bundled desk-scale benchmark.

Produces a typed knowledge graph in the standard benchmark layout:
entities belong to semantic types, each relation connects two (or one)
types, and each participating head links to a small subset of the range
type. Splitting the triples 80/10/10 guarantees corruptions that are
true in train (in-train false negatives) and corruptions that are true
only in valid/test (eval-only false negatives), which the substitution
diagnostics rely on. Entities of one type are mutually substitutable,
so embedding clusters have real structure to find.
"""

from __future__ import annotations

import os

import numpy as np

from . import rng as rng_streams

DEFAULTS = dict(n_types=9, per_type=15, n_relations=46)


def generate_toy_kg(seed: int = 0, n_types: int = 9, per_type: int = 15,
                    n_relations: int = 46):
    """Build the triple lists; returns {split: [(h, r, t) name tuples]}."""
    gen = rng_streams.stream(seed, rng_streams.TOYDATA)
    entities = [f"t{ty:02d}_e{i:02d}" for ty in range(n_types) for i in range(per_type)]
    by_type = [entities[ty * per_type:(ty + 1) * per_type] for ty in range(n_types)]

    triples: list[tuple[str, str, str]] = []
    seen: set[tuple[str, str, str]] = set()
    for rel_id in range(n_relations):
        rel = f"r{rel_id:02d}"
        domain = [int(gen.integers(n_types)), int(gen.integers(n_types))]
        range_ty = int(gen.integers(n_types))
        heads = [e for ty in sorted(set(domain)) for e in by_type[ty]]
        for head in heads:
            if gen.random() > 0.9:
                continue
            degree = int(gen.integers(3, 8))
            tails = gen.choice(per_type, size=min(degree, per_type), replace=False)
            for tail_i in tails:
                tail = by_type[range_ty][int(tail_i)]
                key = (head, rel, tail)
                if head != tail and key not in seen:
                    seen.add(key)
                    triples.append(key)

    order = gen.permutation(len(triples))
    triples = [triples[i] for i in order]
    n_valid = len(triples) // 10
    n_test = len(triples) // 10
    split = {
        "valid": triples[:n_valid],
        "test": triples[n_valid:n_valid + n_test],
        "train": triples[n_valid + n_test:],
    }

    # every entity and relation must appear in train (dense index contract)
    in_train_e = {x for h, _, t in split["train"] for x in (h, t)}
    in_train_r = {r for _, r, _ in split["train"]}
    for name in ("valid", "test"):
        moved = []
        for trip in split[name]:
            h, r, t = trip
            if h not in in_train_e or t not in in_train_e or r not in in_train_r:
                split["train"].append(trip)
                in_train_e.update((h, t))
                in_train_r.add(r)
                moved.append(trip)
        for trip in moved:
            split[name].remove(trip)
    return split


def write_toy_dataset(directory: str, seed: int = 0, **kwargs) -> dict[str, int]:
    """Write train/valid/test files; returns the per-split triple counts."""
    split = generate_toy_kg(seed=seed, **kwargs)
    os.makedirs(directory, exist_ok=True)
    for name in ("train", "valid", "test"):
        with open(os.path.join(directory, f"{name}.txt"), "w", encoding="utf-8") as fh:
            for h, r, t in split[name]:
                fh.write(f"{h}\t{r}\t{t}\n")
    return {name: len(rows) for name, rows in split.items()}
