"""Pairwise decision banks for M classes and the single-model "multimeter".

Every ordered pair ``(i, j)`` gets its own binary model with class ``i``
labeled +1, so an M-class engine holds ``M*(M-1)`` models.  The ``j``-vs-``i``
model mirrors the ``i``-vs-``j`` one; both are kept and both vote.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset
from .gaussian import make_rng
from .model import EigenlocusModel, deserialize, fit, serialize
from .solver import SolverOptions

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class DecisionBank:
    class_id: str
    members: tuple  # (opponent_id, EigenlocusModel) pairs

    def raw_margins(self, X) -> np.ndarray:
        """Per-member scores, shape (n, M-1)."""
        return np.column_stack([m.decision_function(X) for _, m in self.members])

    def score(self, X) -> np.ndarray:
        # an exact zero votes +1, matching the binary tie rule
        return np.where(self.raw_margins(X) >= 0, 1, -1).sum(axis=1)


@dataclass(frozen=True)
class DecisionEngine:
    class_ids: tuple
    banks: tuple

    def __post_init__(self):
        m = len(self.class_ids)
        if m < 2:
            raise ValueError("an engine needs at least two classes")
        if len(self.banks) != m:
            raise ValueError("one bank per class is required")
        for cid, bank in zip(self.class_ids, self.banks):
            if bank.class_id != cid:
                raise ValueError("banks must follow class_ids order")
            opp = [o for o, _ in bank.members]
            if len(opp) != m - 1 or cid in opp or set(opp) != set(self.class_ids) - {cid}:
                raise ValueError(f"bank {cid!r} must hold one model per other class")

    @property
    def n_models(self) -> int:
        return sum(len(b.members) for b in self.banks)

    @property
    def d(self) -> int:
        return self.banks[0].members[0][1].d


def train_engine(datasets, C: float = 1.0, opts: SolverOptions | None = None,
                 class_ids=None) -> DecisionEngine:
    """``datasets``: one point array per class, in class order."""
    datasets = [np.atleast_2d(np.asarray(a, dtype=float)) for a in datasets]
    if len(datasets) < 2:
        raise ValueError("train_engine needs at least two classes")
    ids = tuple(str(c) for c in (class_ids if class_ids is not None else range(len(datasets))))
    if len(ids) != len(datasets) or len(set(ids)) != len(ids):
        raise ValueError("class_ids must be unique, one per dataset")
    for cid, pts in zip(ids, datasets):
        if pts.size == 0:
            raise ValueError(f"class {cid!r} is empty")
    banks = []
    for i, cid in enumerate(ids):
        members = []
        for j, oid in enumerate(ids):
            if i == j:
                continue
            try:
                model = fit(LabeledDataset.from_classes(datasets[i], datasets[j]), C, opts)
            except ValueError as exc:
                raise ValueError(f"pair ({cid!r}, {oid!r}): {exc}") from exc
            members.append((oid, model))
        banks.append(DecisionBank(cid, tuple(members)))
    return DecisionEngine(ids, tuple(banks))


@dataclass(frozen=True)
class EngineDecision:
    class_id: str
    index: int
    bank_scores: np.ndarray
    raw_margins: np.ndarray


def _winners(scores: np.ndarray, margins: np.ndarray) -> np.ndarray:
    """Argmax of scores, then of summed margins, then lowest index, per row."""
    best = scores == scores.max(axis=1, keepdims=True)
    m = np.where(best, margins, -np.inf)
    best &= m == m.max(axis=1, keepdims=True)
    return np.argmax(best, axis=1)


def engine_scores(engine: DecisionEngine, X) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != engine.d:
        raise ValueError(f"expected {engine.d} features, got {X.shape[1]}")
    scores = np.column_stack([b.score(X) for b in engine.banks])
    margins = np.column_stack([b.raw_margins(X).sum(axis=1) for b in engine.banks])
    return scores, margins


def engine_decide(engine: DecisionEngine, x) -> EngineDecision:
    scores, margins = engine_scores(engine, np.asarray(x, dtype=float).reshape(1, -1))
    k = int(_winners(scores, margins)[0])
    return EngineDecision(engine.class_ids[k], k, scores[0], margins[0])


def engine_predict(engine: DecisionEngine, X) -> np.ndarray:
    """Winning class indices for each row of ``X``."""
    scores, margins = engine_scores(engine, X)
    return _winners(scores, margins)


def save_engine(engine: DecisionEngine, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pairs = []
    for i, bank in enumerate(engine.banks):
        for oid, model in bank.members:
            j = engine.class_ids.index(oid)
            fname = f"model_{i}_{j}.json"
            (directory / fname).write_text(serialize(model), encoding="utf-8")
            pairs.append({"class": bank.class_id, "opponent": oid, "file": fname})
    manifest = {"version": MANIFEST_VERSION, "class_ids": list(engine.class_ids), "pairs": pairs}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1), encoding="utf-8")


def load_engine(directory) -> DecisionEngine:
    directory = Path(directory)
    mpath = directory / "manifest.json"
    if not mpath.exists():
        raise FileNotFoundError(f"file not found: {mpath}")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    if manifest.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {manifest.get('version')!r}")
    ids = tuple(manifest["class_ids"])
    members = {cid: [] for cid in ids}
    for p in manifest["pairs"]:
        model = deserialize((directory / p["file"]).read_text(encoding="utf-8"))
        members[p["class"]].append((p["opponent"], model))
    return DecisionEngine(ids, tuple(DecisionBank(c, tuple(members[c])) for c in ids))


# --- multimeter -------------------------------------------------------------

@dataclass(frozen=True)
class MultimeterThresholds:
    homogeneous_error: float = 0.45
    homogeneous_sv: float = 0.90
    separable_error: float = 0.02
    min_heldout_per_class: int = 10


@dataclass(frozen=True)
class MultimeterReading:
    estimated_error: float
    sv_fraction: float
    tau_norm: float
    homogeneity_flag: bool
    separability_grade: str  # separable, overlapping or homogeneous
    n_train: int
    n_heldout: int

    def to_document(self) -> dict:
        return {
            "estimated_error": self.estimated_error,
            "sv_fraction": self.sv_fraction,
            "tau_norm": self.tau_norm,
            "homogeneity_flag": self.homogeneity_flag,
            "separability_grade": self.separability_grade,
            "n_train": self.n_train,
            "n_heldout": self.n_heldout,
        }


def grade(error: float, sv: float, th: MultimeterThresholds = MultimeterThresholds()) -> tuple[bool, str]:
    flag = error >= th.homogeneous_error and sv >= th.homogeneous_sv
    if error <= th.separable_error:
        return flag, "separable"
    return flag, "homogeneous" if flag else "overlapping"


def multimeter(data: LabeledDataset, C: float = 1.0, heldout_fraction: float = 0.3,
               seed: int = 0, opts: SolverOptions | None = None,
               thresholds: MultimeterThresholds = MultimeterThresholds()) -> MultimeterReading:
    """Fit on a stratified training split and read error, support fraction and grade."""
    if not data.has_both_classes:
        raise ValueError("multimeter needs both classes present")
    if not 0.0 < heldout_fraction <= 0.5:
        raise ValueError("heldout_fraction must lie in (0, 0.5]")
    rng = make_rng(seed)
    train_idx, test_idx = [], []
    for lab in (1.0, -1.0):
        idx = np.flatnonzero(data.y == lab)
        idx = idx[rng.permutation(idx.size)]
        k = int(math.floor(heldout_fraction * idx.size))
        if k < thresholds.min_heldout_per_class:
            raise ValueError(
                f"held-out split too small: {k} points of class {int(lab):+d} "
                f"(need >= {thresholds.min_heldout_per_class})")
        test_idx.append(idx[:k])
        train_idx.append(idx[k:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    model = fit(data.subset(tr), C, opts)
    test = data.subset(te)
    err = float(np.mean(model.predict(test.X) != test.y))
    flag, g = grade(err, model.sv_fraction, thresholds)
    return MultimeterReading(err, model.sv_fraction, model.tau_norm, flag, g, tr.size, te.size)
