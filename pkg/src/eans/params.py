"""Learnable parameter tables, sparse Adam updates, and checkpoint IO.

Every model owns one or more entity tables of shape (E, d) and relation
tables of shape (R+1, d); row R of each relation table is the learned
substitution relation. Table order below is the fixed concatenation
order used by :func:`entity_repr`.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError
from . import rng as rng_streams

MODEL_KINDS = ("transe", "transd", "distmult", "complex", "rotate")

# kind -> (entity table names, relation table names)
TABLE_LAYOUT = {
    "transe": (("ent",), ("rel",)),
    "transd": (("ent", "ent_p"), ("rel", "rel_p")),
    "distmult": (("ent",), ("rel",)),
    "complex": (("ent_re", "ent_im"), ("rel_re", "rel_im")),
    "rotate": (("ent_re", "ent_im"), ("rel_phase",)),
}

# Distance models start inside the margin; bilinear models at 1/sqrt(d).
UNIFORM_MARGIN_MODELS = ("transe", "transd", "rotate")

CHECKPOINT_MAGIC = "eans checkpoint 1"


@dataclass
class ModelParams:
    kind: str
    n_entities: int
    n_relations: int  # original relation count; tables carry one extra row
    dim: int
    tables: dict[str, np.ndarray]
    options: dict[str, str] = field(default_factory=dict)  # e.g. transe_norm=l2

    @property
    def dtype(self):
        return next(iter(self.tables.values())).dtype

    @property
    def entity_tables(self) -> tuple[str, ...]:
        return TABLE_LAYOUT[self.kind][0]

    @property
    def relation_tables(self) -> tuple[str, ...]:
        return TABLE_LAYOUT[self.kind][1]

    @property
    def r_sub(self) -> int:
        """Row index of the substitution relation."""
        return self.n_relations

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.kind,
            self.n_entities,
            self.n_relations,
            self.dim,
            {k: v.copy() for k, v in self.tables.items()},
            dict(self.options),
        )


@dataclass
class OptimizerState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ModelParams, lr: float, **kw) -> "OptimizerState":
        state = cls(lr=lr, **kw)
        for name, table in params.tables.items():
            state.m[name] = np.zeros_like(table)
            state.v[name] = np.zeros_like(table)
        return state

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            self.lr,
            self.beta1,
            self.beta2,
            self.eps,
            self.step,
            {k: a.copy() for k, a in self.m.items()},
            {k: a.copy() for k, a in self.v.items()},
        )


def init_params(model_kind, n_entities, n_relations, dim, margin, seed,
                dtype=np.float32, options=None) -> ModelParams:
    """Fresh tables for one model, deterministic in ``seed``.

    Entity and relation values are uniform(-b, b) with b = (margin+2)/dim
    for distance models and b = 1/sqrt(dim) for the bilinear ones; RotatE
    relation coordinates are phases drawn from [-pi, pi).
    """
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {model_kind!r}")
    if dim < 1 or n_entities < 1 or n_relations < 1:
        raise ValueError("dimensions must be positive")
    gen = rng_streams.stream(seed, rng_streams.INIT)
    if model_kind in UNIFORM_MARGIN_MODELS:
        bound = (margin + 2.0) / dim
    else:
        bound = 1.0 / np.sqrt(dim)
    ent_names, rel_names = TABLE_LAYOUT[model_kind]
    tables: dict[str, np.ndarray] = {}
    for name in ent_names:
        tables[name] = gen.uniform(-bound, bound, size=(n_entities, dim)).astype(dtype)
    for name in rel_names:
        if name == "rel_phase":
            tables[name] = gen.uniform(-np.pi, np.pi, size=(n_relations + 1, dim)).astype(dtype)
        else:
            tables[name] = gen.uniform(-bound, bound, size=(n_relations + 1, dim)).astype(dtype)
    return ModelParams(model_kind, n_entities, n_relations, dim, tables, dict(options or {}))


def entity_repr(params: ModelParams, i: int) -> np.ndarray:
    """Concatenated entity-specific parameters of entity ``i`` (float64)."""
    return np.concatenate(
        [params.tables[name][i].astype(np.float64) for name in params.entity_tables]
    )


def entity_repr_all(params: ModelParams) -> np.ndarray:
    """(E, D) matrix of all entity representations, rows match entity ids."""
    return np.concatenate(
        [params.tables[name].astype(np.float64) for name in params.entity_tables], axis=1
    )


def _sum_duplicate_rows(idx: np.ndarray, rows: np.ndarray):
    """Collapse duplicate row indices by summing their gradient rows."""
    uniq, inverse = np.unique(idx, return_inverse=True)
    acc = np.zeros((len(uniq), rows.shape[1]), dtype=np.float64)
    order = np.argsort(inverse, kind="stable")
    sorted_rows = rows[order]
    boundaries = np.searchsorted(inverse[order], np.arange(len(uniq)))
    acc += np.add.reduceat(sorted_rows, boundaries, axis=0)
    return uniq, acc


def adam_step(state: OptimizerState, params: ModelParams, sparse_grads) -> None:
    """One Adam update restricted to the touched rows.

    ``sparse_grads`` maps a table name to ``(indices, rows)`` where
    ``rows[j]`` is the gradient contribution for table row ``indices[j]``;
    duplicate indices are summed before the update. Bias correction uses
    the global step counter. Untouched rows and their moments never move.
    """
    summed = {}
    for table, (idx, rows) in sparse_grads.items():
        if table not in params.tables:
            raise KeyError(f"unknown table {table!r}")
        idx = np.asarray(idx, dtype=np.int64)
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim == 1:
            rows = rows[None, :]
            idx = idx.reshape(1)
        if rows.shape[1] != params.tables[table].shape[1]:
            raise ValueError(f"gradient width mismatch for table {table!r}")
        bad = ~np.isfinite(rows).all(axis=1)
        if bad.any():
            row = int(idx[np.argmax(bad)])
            raise ValueError(f"non-finite gradient for {table}[{row}]; update aborted")
        if len(idx):
            summed[table] = _sum_duplicate_rows(idx, rows)

    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for table, (uniq, g) in summed.items():
        p = params.tables[table]
        m = state.m[table][uniq].astype(np.float64)
        v = state.v[table][uniq].astype(np.float64)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[table][uniq] = m.astype(p.dtype)
        state.v[table][uniq] = v.astype(p.dtype)
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p[uniq] = (p[uniq].astype(np.float64) - update).astype(p.dtype)


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _dtype_name(arr: np.ndarray) -> str:
    return {np.dtype(np.float32): "float32",
            np.dtype(np.float64): "float64",
            np.dtype(np.int32): "int32"}[arr.dtype]


_DTYPES = {"float32": np.float32, "float64": np.float64, "int32": np.int32}


@dataclass
class Checkpoint:
    params: ModelParams
    state: OptimizerState
    step: int
    seed: int
    config_digest: str
    substitution_trained: bool
    strategy: str = "-"
    virt_to_real: np.ndarray | None = None  # current virtual index map, if any


def save_checkpoint(params: ModelParams, state: OptimizerState, digest: str, path,
                    *, seed: int = 0, substitution_trained: bool = False,
                    strategy: str = "-", virt_to_real=None) -> None:
    """Write a manifest + raw little-endian payload file; round trip is bit-exact."""
    arrays: list[tuple[str, np.ndarray]] = []
    for name, table in params.tables.items():
        arrays.append((name, table))
    for name in params.tables:
        arrays.append((f"m.{name}", state.m[name]))
        arrays.append((f"v.{name}", state.v[name]))
    if virt_to_real is not None:
        arrays.append(("virt_to_real", np.asarray(virt_to_real, dtype=np.int32)))

    header = io.StringIO()
    header.write(CHECKPOINT_MAGIC + "\n")
    header.write(f"model {params.kind}\n")
    header.write(f"entities {params.n_entities}\n")
    header.write(f"relations {params.n_relations}\n")
    header.write(f"dim {params.dim}\n")
    header.write(f"step {state.step}\n")
    header.write(f"seed {seed}\n")
    header.write(f"config_digest {digest or '-'}\n")
    header.write(f"substitution {'true' if substitution_trained else 'false'}\n")
    header.write(f"strategy {strategy}\n")
    header.write(f"adam {state.lr!r} {state.beta1!r} {state.beta2!r} {state.eps!r}\n")
    for key, value in sorted(params.options.items()):
        header.write(f"option {key} {value}\n")
    for name, arr in arrays:
        shape = " ".join(str(s) for s in arr.shape)
        header.write(f"array {name} {_dtype_name(arr)} {arr.nbytes} {shape}\n")
    header.write("end\n")

    with open(path, "wb") as fh:
        fh.write(header.getvalue().encode("utf-8"))
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path, expect_model: str | None = None) -> Checkpoint:
    """Read a checkpoint; rejects truncation, unknown layout, or model mismatch."""
    with open(path, "rb") as fh:
        blob = fh.read()
    sep = blob.find(b"end\n")
    if sep < 0 or not blob.startswith(CHECKPOINT_MAGIC.encode()):
        raise CheckpointError(f"{path}: not a checkpoint file")
    header_lines = blob[:sep].decode("utf-8").splitlines()[1:]
    payload = blob[sep + 4:]

    meta: dict[str, str] = {}
    options: dict[str, str] = {}
    specs: list[tuple[str, str, int, tuple[int, ...]]] = []
    for line in header_lines:
        parts = line.split()
        if parts[0] == "array":
            specs.append((parts[1], parts[2], int(parts[3]), tuple(int(s) for s in parts[4:])))
        elif parts[0] == "option":
            options[parts[1]] = parts[2]
        else:
            meta[parts[0]] = line.split(" ", 1)[1]

    kind = meta["model"]
    if expect_model is not None and kind != expect_model:
        raise CheckpointError(f"model kind mismatch: checkpoint has {kind!r}, expected {expect_model!r}")
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"unknown model kind {kind!r}")

    total = sum(nbytes for _, _, nbytes, _ in specs)
    if len(payload) != total:
        raise CheckpointError(f"{path}: payload length mismatch (have {len(payload)}, manifest says {total})")

    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for name, dtype_name, nbytes, shape in specs:
        dtype = np.dtype(_DTYPES[dtype_name]).newbyteorder("<")
        arr = np.frombuffer(payload[offset:offset + nbytes], dtype=dtype).astype(_DTYPES[dtype_name])
        arrays[name] = arr.reshape(shape)
        offset += nbytes

    n_entities = int(meta["entities"])
    n_relations = int(meta["relations"])
    dim = int(meta["dim"])
    ent_names, rel_names = TABLE_LAYOUT[kind]
    tables = {}
    for name in ent_names + rel_names:
        if name not in arrays:
            raise CheckpointError(f"{path}: missing table {name!r}")
        tables[name] = arrays[name]
    params = ModelParams(kind, n_entities, n_relations, dim, tables, options)
    for name, table in tables.items():
        expected_rows = n_entities if name in ent_names else n_relations + 1
        if table.shape != (expected_rows, dim):
            raise CheckpointError(f"{path}: table {name!r} has shape {table.shape}")

    lr_s, b1_s, b2_s, eps_s = meta["adam"].split()
    state = OptimizerState(float(lr_s), float(b1_s), float(b2_s), float(eps_s),
                           step=int(meta["step"]))
    for name in tables:
        state.m[name] = arrays[f"m.{name}"]
        state.v[name] = arrays[f"v.{name}"]

    return Checkpoint(
        params=params,
        state=state,
        step=int(meta["step"]),
        seed=int(meta["seed"]),
        config_digest="" if meta["config_digest"] == "-" else meta["config_digest"],
        substitution_trained=meta["substitution"] == "true",
        strategy=meta.get("strategy", "-"),
        virt_to_real=arrays.get("virt_to_real"),
    )
