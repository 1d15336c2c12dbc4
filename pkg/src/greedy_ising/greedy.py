"""Forward-backward greedy minimization of a smooth loss over sparse supports.

Starting from zero, each round adds the single coordinate whose optimal 1-D
move lowers the loss most (as long as the gain exceeds ``stop_threshold``),
refits on the enlarged support, then repeatedly drops the active coordinate
whose removal costs least, while that cost stays within
``backward_factor`` times the forward gain recorded when the support last had
the current size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptySupport, InnerSolveFailure, NoInactiveCoordinate
from .losses import SEPARATION_BOUND, SmoothLoss


@dataclass(frozen=True)
class GreedyConfig:
    stop_threshold: float
    backward_factor: float = 0.5
    max_support: Optional[int] = None
    inner_tol: float = 1e-8
    inner_max_iter: int = 100
    line_search_tol: float = 1e-8
    tie_break: str = "lowest-index"

    def __post_init__(self):
        if not self.stop_threshold > 0:
            raise ValueError("stop_threshold must be positive")
        if not 0 < self.backward_factor < 1:
            raise ValueError("backward_factor must lie in (0, 1)")
        if self.max_support is not None and self.max_support < 1:
            raise ValueError("max_support must be a positive integer")
        if not self.inner_tol > 0 or self.inner_max_iter < 1:
            raise ValueError("inner_tol must be positive and inner_max_iter >= 1")
        if not self.line_search_tol > 0:
            raise ValueError("line_search_tol must be positive")
        if self.tie_break != "lowest-index":
            raise ValueError("only lowest-index tie breaking is supported")


def default_max_support(p: int, expected_sparsity: Optional[float] = None) -> int:
    if expected_sparsity is None:
        return p
    return min(p, 4 * math.ceil(expected_sparsity))


@dataclass(frozen=True)
class ParamVector:
    """Coefficient vector with an explicit support.

    ``support`` holds the active non-fixed coordinates in ascending order;
    every coordinate outside ``support`` and ``fixed`` is exactly zero.
    """

    coeffs: np.ndarray
    support: tuple
    fixed: tuple = ()

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "support", tuple(sorted(int(j) for j in self.support)))
        if len(self.support) > coeffs.size:
            raise ValueError("support larger than dimension")
        off = np.ones(coeffs.size, dtype=bool)
        off[list(self.support) + list(self.fixed)] = False
        if np.any(coeffs[off] != 0):
            raise ValueError("coefficients outside the support must be zero")

    @classmethod
    def zeros(cls, dim, fixed=()):
        return cls(np.zeros(dim), (), tuple(fixed))

    @classmethod
    def from_coeffs(cls, coeffs, fixed=()):
        coeffs = np.asarray(coeffs, dtype=float)
        fixed = tuple(fixed)
        support = tuple(j for j in np.flatnonzero(coeffs) if j not in fixed)
        return cls(coeffs, support, fixed)

    @property
    def dim(self):
        return self.coeffs.size

    def inactive(self, candidates):
        active = set(self.support)
        return [j for j in candidates if j not in active]


@dataclass
class GreedyStep:
    kind: str  # "forward" or "backward"
    index: int
    size: int
    loss: float
    gain: Optional[float] = None  # forward steps only
    increase: Optional[float] = None  # backward steps only


@dataclass
class GreedyTrace:
    steps: list = field(default_factory=list)
    gain_by_size: dict = field(default_factory=dict)
    initial_loss: float = float("nan")

    @property
    def n_forward(self):
        return sum(s.kind == "forward" for s in self.steps)

    @property
    def n_backward(self):
        return sum(s.kind == "backward" for s in self.steps)

    def rounds(self):
        """Split the steps into rounds: one forward step plus its removals."""
        out = []
        for step in self.steps:
            if step.kind == "forward":
                out.append([step])
            else:
                out[-1].append(step)
        return out


@dataclass
class GreedyResult:
    theta_hat: ParamVector
    trace: GreedyTrace
    terminal_forward_gain: float
    hit_support_cap: bool = False

    @property
    def support(self):
        return self.theta_hat.support


def forward_search(loss: SmoothLoss, theta: ParamVector, config: GreedyConfig):
    """Best single-coordinate move among inactive coordinates.

    Returns ``(j, alpha, gain)``; ties on the gain go to the lowest index.
    """
    inactive = theta.inactive(loss.candidates)
    if not inactive:
        raise NoInactiveCoordinate("every candidate coordinate is already active")
    base = loss.value(theta.coeffs)
    best = None
    for j in inactive:
        alpha = loss.coordinate_minimize(theta.coeffs, j, tol=config.line_search_tol)
        trial = theta.coeffs.copy()
        trial[j] += alpha
        gain = base - loss.value(trial)
        if best is None or gain > best[2]:
            best = (j, alpha, gain)
    j, alpha, gain = best
    return j, alpha, max(gain, 0.0)


def refit(
    loss: SmoothLoss,
    support,
    config: GreedyConfig,
    start: Optional[np.ndarray] = None,
) -> ParamVector:
    """Minimize the loss over coefficients restricted to ``support``.

    Damped Newton with step halving on the active coordinates (``support``
    plus the loss's fixed coordinates), warm-started from ``start``.
    """
    support = tuple(sorted(int(j) for j in support))
    active = list(support) + [j for j in loss.fixed if j not in support]
    theta = np.zeros(loss.dim)
    if not active:
        return ParamVector(theta, (), loss.fixed)
    if start is not None:
        theta[active] = np.asarray(start, dtype=float)[active]
    value = loss.value(theta)
    for it in range(config.inner_max_iter + 1):
        grad = loss.gradient(theta)[active]
        if np.max(np.abs(grad)) <= config.inner_tol:
            return ParamVector(theta, support, loss.fixed)
        if it == config.inner_max_iter:
            break
        hess = loss.hessian(theta)[np.ix_(active, active)]
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise InnerSolveFailure("singular restricted Hessian", support) from None
        if not np.all(np.isfinite(step)):
            raise InnerSolveFailure("non-finite Newton step", support)
        slope = float(grad @ step)
        t = 1.0
        while True:
            cand = theta.copy()
            cand[active] += t * step
            cand_value = loss.value(cand)
            # the second clause accepts full Newton steps lost in roundoff near the optimum
            if cand_value <= value + 1e-4 * t * slope or (
                t == 1.0 and cand_value <= value + 1e-14 * max(1.0, abs(value))
            ):
                break
            t *= 0.5
            if t < 1e-12:
                raise InnerSolveFailure(
                    f"refit line search stalled on support {support}", support
                )
        theta, value = cand, cand_value
    reason = "refit did not converge"
    if np.max(np.abs(theta)) > SEPARATION_BOUND:
        reason += f" (|coefficient| > {SEPARATION_BOUND:g}; data look separable)"
    raise InnerSolveFailure(f"{reason} on support {support}", support)


def removal_costs(loss: SmoothLoss, theta: ParamVector) -> dict:
    base = loss.value(theta.coeffs)
    costs = {}
    for j in theta.support:
        trial = theta.coeffs.copy()
        trial[j] = 0.0
        costs[j] = loss.value(trial) - base
    return costs


def backward_scan(loss: SmoothLoss, theta: ParamVector):
    """Active coordinate whose deletion increases the loss least.

    Returns ``(j, increase)``; ties go to the lowest index.
    """
    if not theta.support:
        raise EmptySupport("backward scan needs a non-empty support")
    costs = removal_costs(loss, theta)
    j = min(costs, key=lambda k: (costs[k], k))
    return j, costs[j]


def run_greedy(loss: SmoothLoss, config: GreedyConfig) -> GreedyResult:
    cap = config.max_support or len(loss.candidates)
    theta = refit(loss, (), config)
    trace = GreedyTrace(initial_loss=loss.value(theta.coeffs))
    terminal_gain = 0.0
    hit_cap = False
    while True:
        k = len(theta.support)
        if k == len(loss.candidates):
            # nothing left to add: the forward step trivially fails
            terminal_gain = 0.0
            break
        if k >= cap:
            hit_cap = True
            terminal_gain = float("nan")
            break
        j, alpha, gain = forward_search(loss, theta, config)
        if gain <= config.stop_threshold:
            terminal_gain = gain
            break
        start = theta.coeffs.copy()
        start[j] += alpha
        theta = refit(loss, theta.support + (j,), config, start=start)
        k += 1
        trace.gain_by_size[k] = gain
        trace.steps.append(GreedyStep("forward", j, k, loss.value(theta.coeffs), gain=gain))

        while theta.support:
            j, increase = backward_scan(loss, theta)
            if increase > config.backward_factor * trace.gain_by_size[k]:
                break
            remaining = tuple(i for i in theta.support if i != j)
            start = theta.coeffs.copy()
            start[j] = 0.0
            theta = refit(loss, remaining, config, start=start)
            k -= 1
            trace.steps.append(
                GreedyStep("backward", j, k, loss.value(theta.coeffs), increase=increase)
            )
    return GreedyResult(theta, trace, terminal_gain, hit_cap)


def contract_violations(
    loss: SmoothLoss, result: GreedyResult, config: GreedyConfig, slack: float = 1e-9
) -> list:
    """Re-check the guarantees a finished run must satisfy.

    Returns human-readable violations (empty when the run is sound):
    every forward gain exceeds the threshold, each round lowers the loss by
    at least ``(1 - nu) * eps``, the forward-step count respects the
    termination bound, no inactive coordinate offers a gain above the
    threshold, and no active coordinate is cheap enough to remove.
    The terminal forward check uses an independent bounded scalar minimizer.
    """
    from scipy.optimize import minimize_scalar

    eps, nu = config.stop_threshold, config.backward_factor
    trace = result.trace
    problems = []
    for step in trace.steps:
        if step.kind == "forward" and not step.gain > eps:
            problems.append(f"forward gain {step.gain} <= threshold at size {step.size}")
    before = trace.initial_loss
    for rnd in trace.rounds():
        after = rnd[-1].loss
        if before - after < (1 - nu) * eps - slack:
            problems.append(
                f"round ending at size {rnd[-1].size} decreased loss by {before - after:.3g}"
            )
        before = after
    final = loss.value(result.theta_hat.coeffs)
    bound = (trace.initial_loss - final) / ((1 - nu) * eps) + 1
    if trace.n_forward > bound + 1e-9:
        problems.append(f"{trace.n_forward} forward steps exceed bound {bound:.3f}")

    theta = result.theta_hat
    if not result.hit_support_cap:
        if result.terminal_forward_gain > eps + config.line_search_tol:
            problems.append(f"terminal forward gain {result.terminal_forward_gain} > threshold")
        coeffs = theta.coeffs
        for j in theta.inactive(loss.candidates):
            def along(a, j=j):
                trial = coeffs.copy()
                trial[j] += a
                return loss.value(trial)

            res = minimize_scalar(
                along, bounds=(-SEPARATION_BOUND, SEPARATION_BOUND), method="bounded",
                options={"xatol": 1e-10},
            )
            gain = final - min(res.fun, final)
            if gain > eps + config.line_search_tol:
                problems.append(f"coordinate {j} still offers gain {gain:.3g} > threshold")
    if theta.support:
        cheapest = min(removal_costs(loss, theta).values())
        limit = nu * trace.gain_by_size[len(theta.support)]
        if not cheapest > limit:
            problems.append(f"removal cost {cheapest:.3g} <= backward limit {limit:.3g}")
    return problems
