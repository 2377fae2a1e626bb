"""Active learning: n-gram featurization, a from-scratch logistic regression
classifier, and confidence-ordered queue planning.

The classifier is multinomial logistic regression over unigram + bigram
counts, fit by full-batch gradient descent (Nesterov acceleration with
function-value restarts and Armijo backtracking) on the objective

    J(W, b) = sum_i -log softmax(W x_i + b)[y_i] + (l2/2) * ||W||^2

with the bias unpenalized and l2 = 1.0. Vocabulary and class order are
sorted, weights start at zero, and the stopping rule is a fixed gradient
tolerance, so training is deterministic given the input order. Retraining
happens on a worker thread off the request path; the request path only ever
swaps a finished queue plan.
"""

from __future__ import annotations

import logging
import math
import queue
import random as random_module
import threading
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence, TYPE_CHECKING

import numpy as np
from scipy import sparse

from .tokenizer import tokenize

if TYPE_CHECKING:
    from .config import ActiveLearningConfig
    from .schemes import AnnotationScheme
    from .sessions import SessionManager

logger = logging.getLogger(__name__)

L2_PENALTY = 1.0
GRAD_TOL_PER_EXAMPLE = 1e-6
MAX_ITERATIONS = 5000


def featurize(text: str) -> dict[str, int]:
    """Sparse unigram + adjacent-bigram counts over shared-tokenizer tokens."""
    tokens = [t.text for t in tokenize(text)]
    features: dict[str, int] = {}
    for token in tokens:
        features[token] = features.get(token, 0) + 1
    for left, right in zip(tokens, tokens[1:]):
        bigram = f"{left}_{right}"
        features[bigram] = features.get(bigram, 0) + 1
    return features


@dataclass
class TextClassifier:
    """Multinomial logistic regression with a fixed, sorted vocabulary."""

    vocabulary: dict[str, int]
    class_labels: list[str]
    weights: np.ndarray  # (n_classes, n_features)
    bias: np.ndarray  # (n_classes,)
    trained_on: int = 0
    converged: bool = True

    def _vector(self, features: dict[str, int]) -> sparse.csr_matrix:
        cols = [self.vocabulary[f] for f in features if f in self.vocabulary]
        data = [features[f] for f in features if f in self.vocabulary]
        return sparse.csr_matrix(
            (data, ([0] * len(cols), cols)), shape=(1, len(self.vocabulary))
        )

    def predict_proba(self, features: dict[str, int]) -> np.ndarray:
        return self.predict_proba_matrix(self._vector(features))[0]

    def predict_proba_many(self, feature_dicts: Sequence[dict[str, int]]) -> np.ndarray:
        return self.predict_proba_matrix(_to_csr(feature_dicts, self.vocabulary))

    def predict_proba_matrix(self, x: sparse.csr_matrix) -> np.ndarray:
        scores = x @ self.weights.T + self.bias
        return _softmax(scores)


def _softmax(scores: np.ndarray) -> np.ndarray:
    scores = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(scores)
    return exp / exp.sum(axis=1, keepdims=True)


def _to_csr(
    feature_dicts: Sequence[dict[str, int]], vocabulary: dict[str, int]
) -> sparse.csr_matrix:
    rows, cols, data = [], [], []
    for i, features in enumerate(feature_dicts):
        for name, count in features.items():
            col = vocabulary.get(name)
            if col is not None:
                rows.append(i)
                cols.append(col)
                data.append(count)
    return sparse.csr_matrix(
        (data, (rows, cols)), shape=(len(feature_dicts), len(vocabulary))
    )


def loss_and_gradient(
    x: sparse.csr_matrix,
    y: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Objective value and analytic gradients (checked against finite
    differences in the test suite)."""
    scores = x @ weights.T + bias
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_z[:, None]
    n = x.shape[0]
    loss = -log_probs[np.arange(n), y].sum() + 0.5 * l2 * float((weights**2).sum())
    probs = np.exp(log_probs)
    probs[np.arange(n), y] -= 1.0
    grad_w = probs.T @ x + l2 * weights
    grad_w = np.asarray(grad_w)
    grad_b = probs.sum(axis=0)
    return float(loss), grad_w, grad_b


def train(
    labeled: Sequence[tuple[dict[str, int], str]],
    l2: float = L2_PENALTY,
    max_iterations: int = MAX_ITERATIONS,
) -> TextClassifier:
    """Fit the classifier on (feature vector, class) pairs.

    Requires at least two distinct classes; callers treat single-class data
    as "skip this round", not as a failure. Steps use Armijo backtracking on
    top of Nesterov acceleration, restarting momentum whenever the objective
    rises; iteration stops when the sup-norm of the gradient falls below
    GRAD_TOL_PER_EXAMPLE * max(1, n_examples).
    """
    classes = sorted({label for _, label in labeled})
    if len(classes) < 2:
        raise ValueError("training requires at least two distinct classes")
    class_index = {c: i for i, c in enumerate(classes)}
    vocabulary = {f: i for i, f in enumerate(sorted({
        name for features, _ in labeled for name in features
    }))}
    x = _to_csr([features for features, _ in labeled], vocabulary)
    y = np.array([class_index[label] for _, label in labeled], dtype=np.int64)

    n_classes, n_features = len(classes), len(vocabulary)
    weights = np.zeros((n_classes, n_features))
    bias = np.zeros(n_classes)
    look_w, look_b = weights, bias
    momentum = 1.0
    step = 1.0
    tol = GRAD_TOL_PER_EXAMPLE * max(1, x.shape[0])
    loss, _, _ = loss_and_gradient(x, y, weights, bias, l2)
    converged = False

    for _ in range(max_iterations):
        look_loss, grad_w, grad_b = loss_and_gradient(x, y, look_w, look_b, l2)
        grad_norm = max(float(np.abs(grad_w).max(initial=0.0)), float(np.abs(grad_b).max()))
        if grad_norm <= tol:
            weights, bias = look_w, look_b
            converged = True
            break
        grad_sq = float((grad_w**2).sum() + (grad_b**2).sum())
        step = min(step * 2.0, 1.0)
        while True:
            new_w = look_w - step * grad_w
            new_b = look_b - step * grad_b
            new_loss, _, _ = loss_and_gradient(x, y, new_w, new_b, l2)
            if new_loss <= look_loss - 1e-4 * step * grad_sq or step < 1e-12:
                break
            step *= 0.5
        if new_loss > loss:
            # Momentum overshot; restart from the last accepted point.
            look_w, look_b = weights, bias
            momentum = 1.0
            continue
        next_momentum = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum))
        look_w = new_w + ((momentum - 1.0) / next_momentum) * (new_w - weights)
        look_b = new_b + ((momentum - 1.0) / next_momentum) * (new_b - bias)
        weights, bias, loss, momentum = new_w, new_b, new_loss, next_momentum

    if not converged:
        logger.warning("classifier training stopped before reaching tolerance")
    return TextClassifier(
        vocabulary=vocabulary,
        class_labels=classes,
        weights=weights,
        bias=bias,
        trained_on=len(labeled),
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Scheme-level scoring (radio targets are one multinomial model; multiselect
# targets are binarized one-vs-rest)


class SchemeScorer:
    """Confidence scoring for the configured target scheme."""

    def __init__(self, classifiers: dict[str, TextClassifier], kind: str):
        self.classifiers = classifiers
        self.kind = kind

    @property
    def trained_on(self) -> int:
        return max(c.trained_on for c in self.classifiers.values())

    def confidence(self, text: str) -> float:
        features = featurize(text)
        if self.kind == "radio":
            probs = self.classifiers["__all__"].predict_proba(features)
            return float(probs.max())
        per_label = [
            float(clf.predict_proba(features).max()) for clf in self.classifiers.values()
        ]
        return min(per_label)


def train_scheme_scorer(
    scheme: "AnnotationScheme", labeled: Sequence[tuple[str, Any]]
) -> SchemeScorer | None:
    """Train for one target scheme from (text, canonical value) pairs.

    Returns None when the collected labels cannot support training yet
    (single class everywhere); the caller keeps the previous queue order.
    """
    if scheme.kind == "radio":
        examples = [(featurize(text), str(value)) for text, value in labeled]
        if len({label for _, label in examples}) < 2:
            return None
        return SchemeScorer({"__all__": train(examples)}, kind="radio")

    classifiers: dict[str, TextClassifier] = {}
    for option in scheme.options:
        examples = [
            (featurize(text), "1" if option.value in value else "0")
            for text, value in labeled
        ]
        if len({label for _, label in examples}) < 2:
            continue
        classifiers[option.value] = train(examples)
    if not classifiers:
        return None
    return SchemeScorer(classifiers, kind="multiselect")


# ---------------------------------------------------------------------------
# Queue planning


@dataclass(frozen=True)
class QueuePlan:
    slots: tuple[tuple[str, str], ...]  # (instance_id, "uncertain" | "random")

    def order(self) -> list[str]:
        return [instance_id for instance_id, _ in self.slots]

    def random_count(self) -> int:
        return sum(1 for _, provenance in self.slots if provenance == "random")


def random_slot_positions(n: int, random_count: int) -> set[int]:
    """Evenly interleaved slot positions for the random share of the plan."""
    return {(2 * i + 1) * n // (2 * random_count) for i in range(random_count)}


def reorder(
    unlabeled: Sequence[tuple[str, str]],
    scorer: SchemeScorer | Callable[[str], float],
    random_ratio: float,
    seed: int,
) -> QueuePlan:
    """Plan the labeling order for (instance_id, text) pairs.

    Non-random slots take the remaining lowest-confidence instance (ties by
    input order); random slots take a seeded uniform draw from whatever is
    left. round(random_ratio * n) slots are random, evenly interleaved.
    """
    if not 0 <= random_ratio <= 1:
        raise ValueError(f"random_ratio must be in [0, 1], got {random_ratio}")
    confidence = scorer.confidence if hasattr(scorer, "confidence") else scorer
    n = len(unlabeled)
    if n == 0:
        return QueuePlan(slots=())
    random_count = round(random_ratio * n)
    random_positions = random_slot_positions(n, random_count) if random_count else set()
    pool = sorted(
        ((confidence(text), i, instance_id) for i, (instance_id, text) in enumerate(unlabeled)),
    )
    rng = random_module.Random(seed)
    slots: list[tuple[str, str]] = []
    for position in range(n):
        if position in random_positions:
            _, _, instance_id = pool.pop(rng.randrange(len(pool)))
            slots.append((instance_id, "random"))
        else:
            _, _, instance_id = pool.pop(0)
            slots.append((instance_id, "uncertain"))
    return QueuePlan(slots=tuple(slots))


# ---------------------------------------------------------------------------
# Retraining orchestration


class ActiveLearningManager:
    """Owns the retrain-every-N loop and applies finished plans atomically.

    All training happens on a single worker thread; `notify_submission` (the
    request path) only inspects counters and enqueues work. A plan produced
    from stale data is still applied in arrival order, which is safe because
    completed prefixes are never touched.
    """

    def __init__(self, al_config: "ActiveLearningConfig", sessions: "SessionManager"):
        self.config = al_config
        self.sessions = sessions
        self._jobs: queue.Queue = queue.Queue()
        self._idle = threading.Event()
        self._idle.set()
        self._closed = False
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    def notify_submission(self) -> None:
        total = self.sessions.total_main_annotations()
        if total == 0 or total % self.config.retrain_every != 0:
            return
        if total < self.config.min_labels_to_start:
            return
        self._idle.clear()
        self._jobs.put("retrain")

    def wait_idle(self, timeout: float = 60.0) -> bool:
        """Block until queued retraining work has drained (used by tests and
        graceful shutdown)."""
        return self._idle.wait(timeout)

    def close(self) -> None:
        self._closed = True
        self._jobs.put(None)
        self._worker.join(timeout=5)

    def _run(self) -> None:
        while True:
            job = self._jobs.get()
            if job is None:
                return
            try:
                self._retrain_once()
            except Exception:
                logger.exception("active learning retrain failed; keeping previous order")
            finally:
                if self._jobs.empty():
                    self._idle.set()

    def _retrain_once(self) -> None:
        scheme = self.sessions.config.scheme(self.config.target_scheme)
        labeled = self.sessions.training_examples(self.config.target_scheme)
        if len(labeled) < self.config.min_labels_to_start:
            return
        scorer = train_scheme_scorer(scheme, labeled)
        if scorer is None:
            logger.info("training skipped: labels for %r are single-class so far",
                        self.config.target_scheme)
            return
        unlabeled = self.sessions.unlabeled_instances()
        if not unlabeled:
            return
        plan = reorder(
            unlabeled,
            scorer,
            self.config.random_ratio,
            seed=self.sessions.total_main_annotations(),
        )
        self.sessions.apply_queue_plan(plan)
        self._write_model_snapshot(scorer)

    def _write_model_snapshot(self, scorer: SchemeScorer) -> None:
        out_dir = self.sessions.output_dir / "models"
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"classifier_{scorer.trained_on:06d}.txt"
        with path.open("w", encoding="utf-8") as handle:
            handle.write("annobench-text-classifier v1\n")
            handle.write(f"target_scheme: {self.config.target_scheme}\n")
            for name, clf in scorer.classifiers.items():
                handle.write(f"model: {name}\n")
                handle.write("classes: " + " ".join(clf.class_labels) + "\n")
                handle.write("bias: " + " ".join(f"{b:.10g}" for b in clf.bias) + "\n")
                features = sorted(clf.vocabulary, key=clf.vocabulary.get)
                for feature in features:
                    col = clf.vocabulary[feature]
                    row = " ".join(f"{w:.10g}" for w in clf.weights[:, col])
                    handle.write(f"feature {feature} {row}\n")
        logger.info("wrote model snapshot %s", path)
