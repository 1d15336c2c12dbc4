"""Graph structure estimation by per-node neighborhood selection."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    GreedyIsingError,
    IoFailure,
    MaxIterationsExceeded,
    MissingNode,
    NodeFitError,
    StructureFitError,
)
from .greedy import GreedyConfig, GreedyTrace, run_greedy
from .ising import SampleMatrix
from .losses import NodeConditionalLogisticLoss

L1_SUPPORT_THRESHOLD = 1e-6
L1_CONSTANT_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)


class CombineRule(enum.Enum):
    OR = "or"
    AND = "and"


@dataclass(frozen=True)
class EdgeComparison:
    missed: frozenset
    extra: frozenset

    @property
    def exact(self) -> bool:
        return not self.missed and not self.extra


@dataclass(frozen=True)
class EdgeSet:
    p: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        canon = set()
        for r, t in self.edges:
            r, t = int(r), int(t)
            if r == t:
                raise ValueError(f"self-loop at node {r}")
            if not (0 <= r < self.p and 0 <= t < self.p):
                raise ValueError(f"edge {(r, t)} out of range for p={self.p}")
            canon.add((min(r, t), max(r, t)))
        object.__setattr__(self, "edges", frozenset(canon))

    def __len__(self):
        return len(self.edges)

    def __iter__(self):
        return iter(sorted(self.edges))

    def __contains__(self, edge):
        r, t = edge
        return (min(r, t), max(r, t)) in self.edges

    def compare(self, truth) -> EdgeComparison:
        """Edges of ``truth`` missing here, and edges here absent from ``truth``."""
        true_edges = getattr(truth, "edges", truth)
        true_edges = frozenset((min(r, t), max(r, t)) for r, t in true_edges)
        return EdgeComparison(true_edges - self.edges, self.edges - true_edges)

    def to_text(self) -> str:
        lines = [f"# p {self.p}"] + [f"{r} {t}" for r, t in self]
        return "\n".join(lines) + "\n"

    def save(self, path):
        try:
            Path(path).write_text(self.to_text())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def from_text(cls, text: str, p: Optional[int] = None) -> "EdgeSet":
        edges = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "p" and p is None:
                    p = int(parts[1])
                continue
            r, t = line.split()
            edges.append((int(r), int(t)))
        if p is None:
            p = 1 + max((max(e) for e in edges), default=-1)
        return cls(p, frozenset(edges))

    @classmethod
    def load(cls, path, p=None) -> "EdgeSet":
        try:
            return cls.from_text(Path(path).read_text(), p)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc


@dataclass
class NeighborhoodEstimate:
    node: int
    neighbors: frozenset
    coeffs: np.ndarray  # node-local layout
    trace: object = None  # GreedyTrace for greedy fits, L1Log for the baseline
    extra: dict = field(default_factory=dict)


def _as_samples(data) -> SampleMatrix:
    s = data if isinstance(data, SampleMatrix) else SampleMatrix(np.asarray(data))
    if s.n < 1:
        raise ValueError("need at least one sample")
    return s


def greedy_neighborhood(
    data, node: int, config: GreedyConfig, include_intercept: bool = False
) -> NeighborhoodEstimate:
    data = _as_samples(data)
    loss = NodeConditionalLogisticLoss(data, node, include_intercept)
    try:
        result = run_greedy(loss, config)
    except GreedyIsingError as exc:
        raise NodeFitError(node, exc) from exc
    return NeighborhoodEstimate(
        node,
        frozenset(loss.to_global(result.support)),
        result.theta_hat.coeffs,
        result.trace,
        {"result": result, "terminal_forward_gain": result.terminal_forward_gain},
    )


def combine(estimates, rule: CombineRule = CombineRule.OR, p: Optional[int] = None) -> EdgeSet:
    by_node = {e.node: e for e in estimates}
    if p is None:
        p = len(by_node)
    missing = sorted(set(range(p)) - set(by_node))
    if missing:
        raise MissingNode(f"no neighborhood estimate for node(s) {missing}")
    rule = CombineRule(rule)
    edges = set()
    for r, est in by_node.items():
        for t in est.neighbors:
            if rule is CombineRule.OR or r in by_node[t].neighbors:
                edges.add((min(r, t), max(r, t)))
    return EdgeSet(p, frozenset(edges))


def _fit_all(fit_node, p, workers):
    estimates, failures = {}, {}

    def attempt(r):
        try:
            return r, fit_node(r), None
        except NodeFitError as exc:
            return r, None, exc.cause
        except GreedyIsingError as exc:
            return r, None, exc

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outcomes = list(pool.map(attempt, range(p)))
    else:
        outcomes = [attempt(r) for r in range(p)]
    for r, est, err in outcomes:
        if err is not None:
            failures[r] = err
        else:
            estimates[r] = est
    if failures:
        raise StructureFitError(failures)
    return [estimates[r] for r in range(p)]


def learn_structure(
    data,
    config: GreedyConfig,
    rule: CombineRule = CombineRule.OR,
    include_intercept: bool = False,
    workers: Optional[int] = None,
):
    """Run the greedy neighborhood fit at every node and combine.

    Returns ``(edge_set, estimates)`` with estimates ordered by node.
    """
    data = _as_samples(data)
    estimates = _fit_all(
        lambda r: greedy_neighborhood(data, r, config, include_intercept), data.p, workers
    )
    return combine(estimates, rule, data.p), estimates


# ---------------------------------------------------------------------------
# l1-regularized logistic baseline


@dataclass
class L1Log:
    iterations: int
    objective: float
    optimality_gap: float
    restarts: int


def _l1_violation(grad, theta, lam, penalized):
    viol = np.abs(grad).copy()
    pen = penalized
    nz = pen & (theta != 0)
    viol[nz] = np.abs(grad[nz] + lam * np.sign(theta[nz]))
    z = pen & (theta == 0)
    viol[z] = np.maximum(np.abs(grad[z]) - lam, 0.0)
    return float(viol.max()) if viol.size else 0.0


def l1_logistic_fit(loss, lam: float, tol: float = 1e-7, max_iter: int = 5000, start=None):
    """Minimize ``loss + lam * ||theta||_1`` (fixed coordinates unpenalized).

    Accelerated proximal gradient with backtracking on the step and a
    momentum restart whenever the objective goes up. Stops once the
    subgradient optimality violation is at most ``tol``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    penalized = np.ones(loss.dim, dtype=bool)
    penalized[list(loss.fixed)] = False

    def objective(th):
        return loss.value(th) + lam * np.abs(th[penalized]).sum()

    def prox(v, step):
        out = v.copy()
        out[penalized] = np.sign(v[penalized]) * np.maximum(np.abs(v[penalized]) - lam * step, 0.0)
        return out

    col_sq = float(np.max(np.sum(loss.features**2, axis=0))) if loss.dim else 1.0
    lip = col_sq / (4.0 * loss.n)
    x = np.zeros(loss.dim) if start is None else np.array(start, dtype=float)
    y, t = x.copy(), 1.0
    f_x = objective(x)
    restarts = 0
    for it in range(1, max_iter + 1):
        g_y = loss.gradient(y)
        v_y = loss.value(y)
        while True:
            step = 1.0 / lip
            x_new = prox(y - step * g_y, step)
            d = x_new - y
            if loss.value(x_new) <= v_y + g_y @ d + 0.5 * lip * (d @ d) + 1e-15:
                break
            lip *= 2.0
        f_new = objective(x_new)
        if f_new > f_x:
            # restart momentum from the last iterate
            restarts += 1
            y, t = x.copy(), 1.0
            continue
        gap = _l1_violation(loss.gradient(x_new), x_new, lam, penalized)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, f_x, t = x_new, f_new, t_new
        if gap <= tol:
            return x, L1Log(it, f_x, gap, restarts)
    raise MaxIterationsExceeded(
        f"l1-logistic fit did not reach tolerance {tol:g} in {max_iter} iterations"
    )


def l1_logistic_neighborhood(
    data, node: int, lam: float, include_intercept: bool = False, tol: float = 1e-7,
    max_iter: int = 5000,
) -> NeighborhoodEstimate:
    data = _as_samples(data)
    loss = NodeConditionalLogisticLoss(data, node, include_intercept)
    try:
        theta, log = l1_logistic_fit(loss, lam, tol, max_iter)
    except GreedyIsingError as exc:
        raise NodeFitError(node, exc) from exc
    active = [j for j in np.flatnonzero(np.abs(theta) > L1_SUPPORT_THRESHOLD) if j not in loss.fixed]
    return NeighborhoodEstimate(node, frozenset(loss.to_global(active)), theta, log, {"lambda": lam})


def l1_lambda(constant: float, n: int, p: int) -> float:
    return constant * math.sqrt(math.log(p) / n)


def select_l1_constant(data, grid=L1_CONSTANT_GRID, include_intercept=False, holdout_every=5):
    """Pick the penalty constant maximizing held-out conditional likelihood.

    Every ``holdout_every``-th sample is held out; for each constant all node
    models are fit on the rest and scored by the summed held-out node
    log-likelihoods. Ties go to the earlier grid entry.
    Returns ``(best_constant, scores)``.
    """
    data = _as_samples(data)
    idx = np.arange(data.n)
    test = idx % holdout_every == holdout_every - 1
    train_data, test_data = data.subset(~test), data.subset(test)
    if train_data.n < 1 or test_data.n < 1:
        raise ValueError("too few samples for a held-out split")
    test_losses = [
        NodeConditionalLogisticLoss(test_data, r, include_intercept) for r in range(data.p)
    ]
    scores = {}
    for c in grid:
        lam = l1_lambda(c, train_data.n, data.p)
        total = 0.0
        for r in range(data.p):
            est = l1_logistic_neighborhood(train_data, r, lam, include_intercept)
            total -= test_losses[r].value(est.coeffs)
        scores[c] = total
    best = max(grid, key=lambda c: (scores[c], -grid.index(c)))
    return best, scores


def learn_structure_l1(
    data,
    constant="sweep",
    rule: CombineRule = CombineRule.OR,
    include_intercept: bool = False,
    workers: Optional[int] = None,
):
    """l1-logistic neighborhood selection at every node, then combine.

    ``constant`` scales ``sqrt(log p / n)``; ``"sweep"`` chooses it with
    :func:`select_l1_constant`. Returns ``(edge_set, estimates, constant)``.
    """
    data = _as_samples(data)
    if constant == "sweep":
        constant, _ = select_l1_constant(data, include_intercept=include_intercept)
    lam = l1_lambda(float(constant), data.n, data.p)
    estimates = _fit_all(
        lambda r: l1_logistic_neighborhood(data, r, lam, include_intercept), data.p, workers
    )
    return combine(estimates, rule, data.p), estimates, float(constant)
