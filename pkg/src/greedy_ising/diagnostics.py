"""Brute-force checks of the sparsity guarantees on concrete instances.

Restricted strong convexity / smoothness constants are estimated by
enumerating supports and taking extreme eigenvalues of the restricted
Hessian at a set of probe points. For the squared loss the Hessian is
constant, so these are the exact constants; for the logistic loss they only
certify the curvature locally, at the probes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MissingConstants, TooLarge
from .greedy import GreedyResult
from .losses import SmoothLoss, SquaredLoss

ENUMERATION_MAX_DIM = 20


@dataclass(frozen=True)
class TheoryConstants:
    kappa_l: float
    kappa_u: float
    lambda_n: float
    eta: float
    s_star: int
    k: int  # sparsity level at which kappa_l / kappa_u were certified
    exact: bool = False  # True when the loss is quadratic

    @property
    def rho(self) -> float:
        return self.kappa_u / self.kappa_l


def estimate_rsc_rss(loss: SmoothLoss, k: int, probe_points) -> tuple:
    """Return ``(kappa_l, kappa_u)`` over all supports of size <= ``k``.

    By eigenvalue interlacing the smallest (largest) eigenvalue over principal
    submatrices of size <= k is reached at size exactly k, so only those are
    enumerated.
    """
    if loss.dim > ENUMERATION_MAX_DIM:
        raise TooLarge(f"support enumeration limited to dim <= {ENUMERATION_MAX_DIM}")
    if not 1 <= k <= loss.dim:
        raise ValueError(f"k must lie in [1, {loss.dim}], got {k}")
    lo, hi = np.inf, -np.inf
    for theta in probe_points:
        coeffs = getattr(theta, "coeffs", theta)
        H = loss.hessian(np.asarray(coeffs, dtype=float))
        for S in itertools.combinations(range(loss.dim), k):
            ev = np.linalg.eigvalsh(H[np.ix_(S, S)])
            lo = min(lo, ev[0])
            hi = max(hi, ev[-1])
    return float(lo), float(hi)


def measure_noise_level(loss: SmoothLoss, theta_star) -> float:
    coeffs = np.asarray(getattr(theta_star, "coeffs", theta_star), dtype=float)
    return float(np.max(np.abs(loss.gradient(coeffs))))


def required_eta(rho: float, s_star: int) -> float:
    s = max(s_star, 1)
    return 2.0 + 4.0 * rho**2 * (math.sqrt(max(rho**2 - rho, 0.0) / s) + math.sqrt(2.0)) ** 2


def sparse_probe_points(dim, k, rng, count=10, scale=1.0, fixed=()):
    """Random points with at most ``k`` nonzeros drawn uniformly in [-scale, scale]."""
    candidates = [j for j in range(dim) if j not in set(fixed)]
    points = []
    for _ in range(count):
        theta = np.zeros(dim)
        size = min(k, len(candidates))
        idx = rng.choice(candidates, size=size, replace=False) if size else []
        theta[idx] = rng.uniform(-scale, scale, size=size)
        theta[list(fixed)] = rng.uniform(-scale, scale, size=len(fixed))
        points.append(theta)
    return points


def theory_constants(
    loss: SmoothLoss,
    theta_star,
    probe_points=None,
    rng: Optional[np.random.Generator] = None,
    theta_hat=None,
) -> TheoryConstants:
    """Estimate the constants the sparsity guarantee needs on this instance.

    The sparsity level and the constants depend on each other (``eta`` grows
    with ``rho``), so the level ``k = ceil(eta * s*)`` is raised until it is
    self-consistent, capped at the dimension where the restriction is moot.
    For non-quadratic losses, probes default to ``theta_star``, ``theta_hat``
    (if given), zero and ten random sparse points.
    """
    theta_star = np.asarray(getattr(theta_star, "coeffs", theta_star), dtype=float)
    s_star = int(np.count_nonzero(theta_star[list(loss.candidates)]))
    exact = isinstance(loss, SquaredLoss)
    if probe_points is None:
        if exact:
            probe_points = [theta_star]
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            probe_points = [theta_star, np.zeros(loss.dim)]
            if theta_hat is not None:
                probe_points.append(np.asarray(getattr(theta_hat, "coeffs", theta_hat)))
            probe_points += sparse_probe_points(
                loss.dim, max(s_star, 1), rng, fixed=loss.fixed
            )
    k = min(max(s_star, 1), loss.dim)
    while True:
        kl, ku = estimate_rsc_rss(loss, k, probe_points)
        rho = ku / kl if kl > 0 else math.inf
        eta = required_eta(rho, s_star) if math.isfinite(rho) else math.inf
        want = loss.dim if not math.isfinite(eta) else min(loss.dim, math.ceil(eta * max(s_star, 1)))
        if want <= k:
            break
        k = want
    return TheoryConstants(kl, ku, measure_noise_level(loss, theta_star), eta, s_star, k, exact)


@dataclass
class Theorem1Report:
    hypotheses: dict
    conclusions: dict
    quantities: dict = field(default_factory=dict)
    lemma_checks: dict = field(default_factory=dict)

    @property
    def hypotheses_hold(self) -> bool:
        return all(self.hypotheses.values())

    @property
    def conclusions_hold(self) -> bool:
        return all(self.conclusions.values())

    @property
    def hard_failure(self) -> bool:
        lemmas_ok = all(v for v in self.lemma_checks.values() if v is not None)
        return self.hypotheses_hold and not (self.conclusions_hold and lemmas_ok)

    def to_text(self) -> str:
        lines = []
        for group in (self.quantities, self.hypotheses, self.conclusions, self.lemma_checks):
            for key, value in group.items():
                lines.append(f"{key}: {_fmt(value)}")
        lines.append(f"hypotheses_hold: {_fmt(self.hypotheses_hold)}")
        lines.append(f"conclusions_hold: {_fmt(self.conclusions_hold)}")
        lines.append(f"hard_failure: {_fmt(self.hard_failure)}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".6g")
    if isinstance(v, (tuple, list, frozenset, set)):
        return " ".join(str(x) for x in sorted(v))
    return str(v)


def check_theorem1(
    result: GreedyResult, theta_star, constants: Optional[TheoryConstants], eps: float,
    backward_factor: Optional[float] = None,
) -> Theorem1Report:
    """Evaluate the sparsity guarantee on one finished greedy run.

    Hypotheses: the constants were certified at level ``eta * s*`` with
    ``eta`` at least the required value; ``eps >= 8 rho eta s* lambda^2 /
    kappa_l``; the smallest true signal exceeds ``sqrt(32 rho eps /
    kappa_l)``; and the stopping-size condition
    ``eps > lambda^2 / kappa_u * (sqrt(2/(eta-1)) - sqrt(2/eta))^-2`` that the
    size bound relies on (implied by the previous ones only when ``s*`` is
    large). Conclusions: the l2 error bound, no false exclusions, no false
    inclusions. Lemma checks (stopping size, and the backward-stop inequality
    when ``backward_factor`` is 0.5) are reported alongside.
    """
    if constants is None:
        raise MissingConstants("theorem check needs estimated constants")
    c = constants
    theta_star = np.asarray(getattr(theta_star, "coeffs", theta_star), dtype=float)
    theta_hat = result.theta_hat
    fixed = set(theta_hat.fixed)
    true_support = frozenset(j for j in np.flatnonzero(theta_star) if j not in fixed)
    est_support = frozenset(theta_hat.support)
    s = c.s_star
    kl, ku, lam, eta = c.kappa_l, c.kappa_u, c.lambda_n, c.eta
    positive = kl > 0 and math.isfinite(eta)
    rho = c.rho if positive else math.inf

    min_signal = min((abs(theta_star[j]) for j in true_support), default=math.inf)
    signal_floor = math.sqrt(32 * rho * eps / kl) if positive else math.inf
    eps_floor = (8 * rho * eta / kl) * s * lam**2 if positive else math.inf
    if positive and eta > 1:
        gap = math.sqrt(2 / (eta - 1)) - math.sqrt(2 / eta)
        size_floor = lam**2 / ku / gap**2
    else:
        size_floor = math.inf
    dim = theta_hat.dim
    hypotheses = {
        "hyp_constants_positive": positive,
        "hyp_rsc_level": positive and c.k >= min(dim, math.ceil(eta * max(s, 1) - 1e-9)),
        "hyp_eps_lower_bound": eps >= eps_floor,
        "hyp_min_signal": min_signal > signal_floor,
        "hyp_stopping_size": eps > size_floor or lam == 0,
    }

    err = float(np.linalg.norm(theta_hat.coeffs - theta_star))
    bound = (2 / kl) * math.sqrt(s) * (lam * math.sqrt(eta) + math.sqrt(2 * ku * eps)) if positive else math.inf
    missed = true_support - est_support
    extra = est_support - true_support
    conclusions = {
        "a_error_bound": err <= bound * (1 + 1e-9) + 1e-12,
        "b_no_false_exclusions": not missed,
        "c_no_false_inclusions": not extra,
    }
    lemmas = {
        "lemma_stopping_size": (len(est_support) <= (eta - 1) * s + 1e-9) if positive and s > 0 else None,
        "lemma_backward_stop": None,
    }
    if backward_factor == 0.5 and positive:
        delta = (theta_hat.coeffs - theta_star)[sorted(extra)]
        lemmas["lemma_backward_stop"] = bool(
            delta @ delta >= eps / (1.1 * ku) * len(extra) - 1e-12
        )
    quantities = {
        "s_star": s,
        "support_size": len(est_support),
        "kappa_l": kl,
        "kappa_u": ku,
        "rho": rho,
        "eta": eta,
        "rsc_level": c.k,
        "lambda_n": lam,
        "eps": eps,
        "eps_lower_bound": eps_floor,
        "min_signal": min_signal,
        "min_signal_floor": signal_floor,
        "stopping_size_floor": size_floor,
        "l2_error": err,
        "l2_error_bound": bound,
        "missed": missed,
        "extra": extra,
        "constants_exact": c.exact,
    }
    return Theorem1Report(hypotheses, conclusions, quantities, lemmas)
