"""Gaussian class pairs: sampling, the Bayes likelihood-ratio oracle and error estimates.

Random draws use numpy's ``Generator`` on the counter-based Philox
bit generator so a seed reproduces the same stream on every platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset

CONFIG_VERSION = 1
COV_EQUAL_REL_TOL = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def std_normal_cdf(z: float) -> float:
    # erfc avoids cancellation in the lower tail
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@dataclass(frozen=True)
class GaussianSpec:
    mean: np.ndarray
    covariance: np.ndarray
    prior: float = 0.5

    def __post_init__(self):
        mu = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (mu.size, mu.size):
            raise ValueError(f"covariance must be {mu.size}x{mu.size}, got {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        if not 0.0 < self.prior < 1.0:
            raise ValueError("prior must lie in (0, 1)")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "covariance", cov)

    @property
    def d(self) -> int:
        return self.mean.size

    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError:
            raise ValueError("covariance is not positive definite") from None


def sample(spec: GaussianSpec, n: int, seed: int | np.random.Generator) -> np.ndarray:
    """``n`` draws ``mean + L z`` with ``L`` the Cholesky factor and ``z`` standard normal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    L = spec.cholesky()
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    z = rng.standard_normal((n, spec.d))
    return spec.mean + z @ L.T


def sample_pair(class1: GaussianSpec, class2: GaussianSpec, n1: int, n2: int,
                seed: int) -> LabeledDataset:
    rng = make_rng(seed)
    return LabeledDataset.from_classes(sample(class1, n1, rng), sample(class2, n2, rng))


@dataclass(frozen=True)
class BayesOracle:
    """``ln Lambda(x) = x'A x + w'x + c``; decide class one when it exceeds ``eta``."""

    kind: str  # "linear" or "quadratic"
    A: np.ndarray
    w: np.ndarray
    c: float
    eta: float

    def log_ratio(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        quad = np.einsum("ij,jk,ik->i", X, self.A, X) if self.kind == "quadratic" else 0.0
        return quad + X @ self.w + self.c

    def score(self, X) -> np.ndarray:
        return self.log_ratio(X) - self.eta

    def predict(self, X) -> np.ndarray:
        return np.where(self.score(X) >= 0, 1.0, -1.0)

    def boundary_line(self) -> tuple[float, float] | None:
        """Slope and intercept of a 2-D linear boundary ``x2 = a x1 + b``.

        None when the boundary is not a non-vertical line.
        """
        if self.kind != "linear" or self.w.size != 2 or self.w[1] == 0.0:
            return None
        return -self.w[0] / self.w[1], (self.eta - self.c) / self.w[1]


def covariances_equal(s1: np.ndarray, s2: np.ndarray, rel_tol: float = COV_EQUAL_REL_TOL) -> bool:
    return float(np.linalg.norm(s1 - s2)) <= rel_tol * float(np.linalg.norm(s1))


def bayes_oracle(class1: GaussianSpec, class2: GaussianSpec) -> BayesOracle:
    if class1.d != class2.d:
        raise ValueError("class specs differ in dimension")
    s1, s2 = class1.covariance, class2.covariance
    try:
        s1i, s2i = np.linalg.inv(s1), np.linalg.inv(s2)
    except np.linalg.LinAlgError:
        raise ValueError("covariance is singular") from None
    _, ld1 = np.linalg.slogdet(s1)
    _, ld2 = np.linalg.slogdet(s2)
    m1, m2 = class1.mean, class2.mean
    w = s1i @ m1 - s2i @ m2
    c = 0.5 * m2 @ s2i @ m2 - 0.5 * m1 @ s1i @ m1
    eta = math.log(class2.prior) - math.log(class1.prior) + 0.5 * ld1 - 0.5 * ld2
    if covariances_equal(s1, s2):
        return BayesOracle("linear", np.zeros_like(s1), w, float(c), float(eta))
    return BayesOracle("quadratic", 0.5 * (s2i - s1i), w, float(c), float(eta))


def mahalanobis_sq(class1: GaussianSpec, class2: GaussianSpec) -> float:
    dm = class1.mean - class2.mean
    return float(dm @ np.linalg.solve(class1.covariance, dm))


def bayes_error(class1: GaussianSpec, class2: GaussianSpec, method: str = "analytic-linear",
                n: int = 100_000, seed: int = 0) -> float:
    """Bayes error of the pair.

    ``analytic-linear`` is ``Phi(-Delta/2)`` and needs a common covariance and
    equal priors; ``monte-carlo`` scores the oracle on ``n`` draws per class.
    """
    if method == "analytic-linear":
        if not covariances_equal(class1.covariance, class2.covariance):
            raise ValueError("analytic error requires a common covariance")
        if not math.isclose(class1.prior, class2.prior):
            raise ValueError("analytic error requires equal priors")
        return std_normal_cdf(-0.5 * math.sqrt(mahalanobis_sq(class1, class2)))
    if method == "monte-carlo":
        return classifier_error(bayes_oracle(class1, class2).predict, class1, class2, n, seed)
    raise ValueError(f"unknown method {method!r}")


def classifier_error(predict, class1: GaussianSpec, class2: GaussianSpec,
                     n: int, seed: int) -> float:
    """Error of ``predict`` on ``n`` fresh draws per class, weighted by the priors."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    X1 = sample(class1, n, rng)
    X2 = sample(class2, n, rng)
    e1 = float(np.mean(np.asarray(predict(X1)) != 1.0))
    e2 = float(np.mean(np.asarray(predict(X2)) != -1.0))
    return (class1.prior * e1 + class2.prior * e2) / (class1.prior + class2.prior)


# --- experiment configs -----------------------------------------------------

class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    class1: GaussianSpec | None
    class2: GaussianSpec | None
    n_train: int
    n_test: int
    C: float
    seed: int
    data_path: str | None = None
    extra_classes: tuple = ()  # further GaussianSpecs for multiclass configs
    heldout: float = 0.3


def _spec_from(doc, where: str) -> GaussianSpec:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    for key in ("mean", "covariance"):
        if key not in doc:
            raise ConfigError(f"{where}: missing field '{key}'")
    try:
        return GaussianSpec(doc["mean"], doc["covariance"], float(doc.get("prior", 0.5)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(doc: dict, base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigError(f"field 'version' must be {CONFIG_VERSION}")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigError("field 'name' must be a nonempty string")
    classes = doc.get("classes")
    data_path = doc.get("data")
    specs: list[GaussianSpec] = []
    if classes is not None:
        if not isinstance(classes, list) or len(classes) < 2:
            raise ConfigError("field 'classes' must list at least two class specs")
        specs = [_spec_from(c, f"classes[{k}]") for k, c in enumerate(classes)]
        if len({s.d for s in specs}) != 1:
            raise ConfigError("field 'classes': specs differ in dimension")
    elif data_path is None:
        raise ConfigError("config needs either 'classes' or 'data'")
    if data_path is not None and base_dir is not None and not Path(data_path).is_absolute():
        data_path = str(base_dir / data_path)

    def num(key, default, kind):
        v = doc.get(key, default)
        try:
            return kind(v)
        except (TypeError, ValueError):
            raise ConfigError(f"field '{key}' must be a number") from None

    n_train = num("n_train", 300, int)
    n_test = num("n_test", 100_000, int)
    C = num("C", 1.0, float) if doc.get("C", 1.0) is not None else math.inf
    seed = num("seed", 0, int)
    heldout = num("heldout", 0.3, float)
    if n_train < 2:
        raise ConfigError("field 'n_train' must be >= 2")
    if n_test < 1:
        raise ConfigError("field 'n_test' must be >= 1")
    if not C > 0:
        raise ConfigError("field 'C' must be > 0")
    return ExperimentConfig(
        name=name,
        class1=specs[0] if specs else None,
        class2=specs[1] if specs else None,
        n_train=n_train, n_test=n_test, C=C, seed=seed,
        data_path=data_path,
        extra_classes=tuple(specs[2:]),
        heldout=heldout,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    return parse_config(doc, path.parent)
