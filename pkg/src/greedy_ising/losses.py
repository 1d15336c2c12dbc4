"""Smooth losses consumed by the greedy optimizer.

Two concrete losses are provided: the per-node conditional logistic loss of
an Ising model and a plain least-squares loss (used mostly as an oracle
instance where everything has a closed form).

Node losses use a node-local layout: coordinate ``j`` holds the coupling to
the ``j``-th other variable in ascending order, so for node ``r`` the global
variable ``t`` sits at local index ``t`` if ``t < r`` and ``t - 1`` otherwise.
When an intercept is requested it is appended as the last coordinate.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np
from scipy.special import expit

from .errors import InnerSolveFailure, NonBinaryData

# |margin| above which the softplus evaluation switches branch
STABLE_SWITCH = 30.0
# coefficient magnitude treated as divergence (separable logistic data)
SEPARATION_BOUND = 30.0


class SmoothLoss(ABC):
    """Contract for a smooth, coordinate-wise convex loss ``L(theta; data)``.

    Subclasses provide value, gradient and Hessian. ``fixed`` lists
    coordinates that are always active (never forward candidates, never
    counted in the support), e.g. an intercept.
    """

    dim: int
    fixed: tuple = ()

    @abstractmethod
    def value(self, theta: np.ndarray) -> float: ...

    @abstractmethod
    def gradient(self, theta: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, theta: np.ndarray) -> np.ndarray: ...

    @property
    def candidates(self) -> tuple:
        fixed = set(self.fixed)
        return tuple(j for j in range(self.dim) if j not in fixed)

    def coordinate_derivatives(self, theta, j, alpha):
        """First and second derivative of ``alpha -> L(theta + alpha e_j)``."""
        point = np.array(theta, dtype=float)
        point[j] += alpha
        return self.gradient(point)[j], self.hessian(point)[j, j]

    def coordinate_minimize(self, theta, j, tol=1e-8, max_iter=200):
        """Minimize the loss along ``e_j`` starting from ``theta``.

        Returns the step ``alpha``. Uses a bracketed Newton iteration that
        falls back to bisection whenever the Newton step leaves the bracket.
        """
        return _safeguarded_newton(
            lambda a: self.coordinate_derivatives(theta, j, a),
            tol=tol,
            max_iter=max_iter,
            bound=SEPARATION_BOUND + abs(float(theta[j])),
            index=j,
        )


def _safeguarded_newton(derivs, tol, max_iter, bound, index=None):
    d1, d2 = derivs(0.0)
    if abs(d1) <= tol:
        return 0.0
    direction = -np.sign(d1)
    # expand the bracket until the derivative changes sign
    lo, hi = 0.0, 1.0
    while True:
        g, _ = derivs(direction * hi)
        if np.sign(g) != np.sign(d1):
            break
        lo = hi
        if hi >= bound:
            raise InnerSolveFailure(
                f"1-D minimizer along coordinate {index} not bracketed within "
                f"|alpha| <= {bound:g}; data look separable",
                support=() if index is None else (index,),
            )
        hi = min(2.0 * hi, bound)
    # now work on t in [lo, hi] with alpha = direction * t; dphi/dt = direction * g
    t = lo
    g, h = derivs(direction * t)
    for _ in range(max_iter):
        if abs(g) <= tol:
            return direction * t
        dt = -direction * g / h if h > 0 else np.inf
        t_new = t + dt
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        t = t_new
        g, h = derivs(direction * t)
        if direction * g < 0:
            lo = t
        else:
            hi = t
        if hi - lo <= 1e-15 * max(1.0, hi):
            return direction * t
    raise InnerSolveFailure(
        f"1-D line search along coordinate {index} did not converge",
        support=() if index is None else (index,),
    )


class SquaredLoss(SmoothLoss):
    """``L(theta) = ||y - X theta||^2 / (2n)``."""

    def __init__(self, design, response):
        self.design = np.asarray(design, dtype=float)
        self.response = np.asarray(response, dtype=float)
        if self.design.ndim != 2 or self.response.shape != (self.design.shape[0],):
            raise ValueError("design must be n x p and response length n")
        self.n, self.dim = self.design.shape
        self._gram = self.design.T @ self.design / self.n
        self.design.setflags(write=False)
        self.response.setflags(write=False)

    def residual(self, theta):
        return self.response - self.design @ theta

    def value(self, theta):
        r = self.residual(theta)
        return float(r @ r) / (2 * self.n)

    def gradient(self, theta):
        return -self.design.T @ self.residual(theta) / self.n

    def hessian(self, theta=None):
        return self._gram.copy()

    def coordinate_minimize(self, theta, j, tol=1e-8, max_iter=200):
        curv = self._gram[j, j]
        if curv <= 0:
            return 0.0
        return float(-self.gradient(theta)[j] / curv)


def _softplus_neg(m):
    """``log(1 + exp(m)) - m`` evaluated without overflow."""
    m = np.asarray(m, dtype=float)
    out = np.empty_like(m)
    big = m > -STABLE_SWITCH
    out[big] = np.log1p(np.exp(-m[big]))
    small = ~big
    out[small] = -m[small] + np.log1p(np.exp(m[small]))
    return out


def check_binary(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2:
        raise NonBinaryData(f"expected an n x p matrix, got shape {x.shape}")
    if not np.isin(x, (-1, 1)).all():
        raise NonBinaryData("data entries must all be -1 or +1")
    return x


class NodeConditionalLogisticLoss(SmoothLoss):
    """Conditional negative log-likelihood of node ``r`` given the others.

    With margin ``m_i = x_r (theta_r + sum_t theta_rt x_t)`` the loss is
    ``mean(log(1 + exp(m_i)) - m_i)``. The field term in the margin is read
    as ``theta_r * x_r``, the only reading under which the expression is a
    conditional likelihood.

    The loss is the logistic likelihood of ``x_r`` with success probability
    ``sigmoid(x_r * f)``, whereas an Ising model with local field ``f`` has
    conditional ``sigmoid(2 * x_r * f)``. The population minimizer is
    therefore twice the model's couplings; see :meth:`true_parameter`.
    """

    def __init__(self, data, node: int, include_intercept: bool = False):
        x = check_binary(getattr(data, "entries", data))
        n, p = x.shape
        if n < 1:
            raise ValueError("need at least one sample")
        if not 0 <= node < p:
            raise IndexError(f"node {node} out of range for p={p}")
        self.node = node
        self.n, self.p = n, p
        self.include_intercept = include_intercept
        self.local_to_global = tuple(t for t in range(p) if t != node)
        self.global_to_local = {t: j for j, t in enumerate(self.local_to_global)}
        xr = x[:, node].astype(float)
        cols = xr[:, None] * x[:, list(self.local_to_global)].astype(float)
        if include_intercept:
            cols = np.column_stack([cols, xr])
            self.fixed = (p - 1,)
        else:
            self.fixed = ()
        self.features = np.ascontiguousarray(cols)
        self.features.setflags(write=False)
        self.dim = self.features.shape[1]

    def margins(self, theta):
        return self.features @ np.asarray(theta, dtype=float)

    def value(self, theta):
        return float(np.mean(_softplus_neg(self.margins(theta))))

    def gradient(self, theta):
        # d/dm [log(1+e^m) - m] = sigmoid(m) - 1 = -sigmoid(-m)
        w = -expit(-self.margins(theta))
        return self.features.T @ w / self.n

    def hessian(self, theta):
        s = expit(self.margins(theta))
        w = s * (1.0 - s)
        return (self.features * w[:, None]).T @ self.features / self.n

    def coordinate_derivatives(self, theta, j, alpha):
        m = self.margins(theta) + alpha * self.features[:, j]
        s = expit(m)
        z = self.features[:, j]
        return float(z @ (s - 1.0)) / self.n, float(np.mean(s * (1.0 - s)))

    def coordinate_minimize(self, theta, j, tol=1e-8, max_iter=200):
        base = self.margins(theta)
        z = self.features[:, j]

        def derivs(a):
            s = expit(base + a * z)
            return float(z @ (s - 1.0)) / self.n, float(np.mean(s * (1.0 - s)))

        return _safeguarded_newton(
            derivs,
            tol=tol,
            max_iter=max_iter,
            bound=SEPARATION_BOUND + abs(float(theta[j])),
            index=j,
        )

    def to_global(self, local_indices) -> list:
        return [self.local_to_global[j] for j in local_indices if j not in self.fixed]

    def true_parameter(self, model) -> np.ndarray:
        """Population minimizer of this loss under Ising ``model``.

        Equals twice the node's couplings (and twice its field when an
        intercept coordinate is present).
        """
        theta = np.zeros(self.dim)
        J = model.coupling_matrix()
        for j, t in enumerate(self.local_to_global):
            theta[j] = 2.0 * J[self.node, t]
        if self.include_intercept:
            theta[-1] = 2.0 * model.fields[self.node]
        return theta

    def conditional_prob(self, theta, x) -> float:
        """``P(x_r = +1 | x_rest)`` implied by parameters ``theta``."""
        x = np.asarray(x, dtype=float)
        field = sum(theta[j] * x[t] for j, t in enumerate(self.local_to_global))
        if self.include_intercept:
            field += theta[-1]
        # margin at x_r = +1 is just the field
        return float(expit(field))


def logistic_value(theta, node, data, include_intercept=False) -> float:
    return NodeConditionalLogisticLoss(data, node, include_intercept).value(theta)


def logistic_gradient(theta, node, data, include_intercept=False) -> np.ndarray:
    return NodeConditionalLogisticLoss(data, node, include_intercept).gradient(theta)
