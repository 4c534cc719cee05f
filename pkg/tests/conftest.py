import numpy as np
import pytest

from eans.dataset import load_dataset
from eans.toydata import write_toy_dataset


@pytest.fixture(scope="session")
def toy_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("toykg")
    write_toy_dataset(str(path), seed=0)
    return str(path)


@pytest.fixture(scope="session")
def toy_dataset(toy_dir):
    return load_dataset(toy_dir)


def write_kg(directory, train, valid=None, test=None):
    """Write name-triple lists as benchmark files; returns the directory."""
    directory.mkdir(parents=True, exist_ok=True)
    for name, rows in (("train", train), ("valid", valid), ("test", test)):
        if rows is None:
            continue
        with open(directory / f"{name}.txt", "w", encoding="utf-8") as fh:
            for h, r, t in rows:
                fh.write(f"{h}\t{r}\t{t}\n")
    return directory


def random_kg_arrays(rng, n_entities, n_relations, n_triples):
    """Distinct random integer triples as an (n, 3) array."""
    seen = set()
    rows = []
    while len(rows) < n_triples:
        h = int(rng.integers(n_entities))
        r = int(rng.integers(n_relations))
        t = int(rng.integers(n_entities))
        if (h, r, t) not in seen:
            seen.add((h, r, t))
            rows.append((h, r, t))
    return np.array(rows, dtype=np.int64)
