"""Ising models on standard graphs, exact enumeration, and Gibbs sampling.

Nodes are numbered from 0. Spins take values in {-1, +1} and the model is
``P(x) ~ exp(sum_r h_r x_r + sum_{r<t} J_rt x_r x_t)``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .errors import DegreeOutOfRange, IoFailure, NonBinaryData, NotPerfectSquare, TooLarge

EXACT_MAX_P = 15


def seed_stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent Philox generator for ``seed`` and a tuple of stream keys.

    Streams with different keys (e.g. a trial index) never overlap, so trials
    can be regenerated alone or in parallel and still match a full batch.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def _canon(r, t):
    r, t = int(r), int(t)
    if r == t:
        raise ValueError(f"self-loop at node {r}")
    return (r, t) if r < t else (t, r)


@dataclass(frozen=True)
class Skeleton:
    """Undirected graph on ``p`` nodes without weights."""

    p: int
    edges: frozenset
    kind: str = "custom"

    def __post_init__(self):
        edges = frozenset(_canon(r, t) for r, t in self.edges)
        for r, t in edges:
            if not 0 <= r < t < self.p:
                raise ValueError(f"edge {(r, t)} out of range for p={self.p}")
        object.__setattr__(self, "edges", edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.p, dtype=int)
        for r, t in self.edges:
            deg[r] += 1
            deg[t] += 1
        return deg

    @property
    def max_degree(self) -> int:
        return int(self.degrees().max()) if self.p else 0


def make_chain(p: int) -> Skeleton:
    if p < 2:
        raise ValueError("a chain needs p >= 2")
    return Skeleton(p, frozenset((i, i + 1) for i in range(p - 1)), "chain")


def make_grid4(p: int) -> Skeleton:
    side = math.isqrt(p)
    if side * side != p or p < 4:
        raise NotPerfectSquare(f"grid needs a perfect square p >= 4, got {p}")
    edges = set()
    for i in range(side):
        for j in range(side):
            v = i * side + j
            if j + 1 < side:
                edges.add((v, v + 1))
            if i + 1 < side:
                edges.add((v, v + side))
    return Skeleton(p, frozenset(edges), "grid4")


def star_hub_degree(p: int) -> int:
    """Hub degree used for the ``d = 0.1 p`` star family: ``ceil(0.1 p)``."""
    return max(1, math.ceil(round(0.1 * p, 9)))


def make_star(p: int, hub_degree: int | None = None) -> Skeleton:
    """Node 0 joined to nodes ``1..hub_degree``; the rest are isolated."""
    if hub_degree is None:
        hub_degree = star_hub_degree(p)
    if not 1 <= hub_degree <= p - 1:
        raise DegreeOutOfRange(f"hub_degree must lie in [1, {p - 1}], got {hub_degree}")
    return Skeleton(p, frozenset((0, t) for t in range(1, hub_degree + 1)), "star")


TOPOLOGIES = {"chain": make_chain, "grid4": make_grid4, "star": make_star}


@dataclass(frozen=True, eq=False)
class IsingModel:
    p: int
    fields: np.ndarray
    couplings: dict = field(default_factory=dict)
    kind: str = "custom"

    def __post_init__(self):
        fields = np.asarray(self.fields, dtype=float)
        if fields.shape != (self.p,):
            raise ValueError("fields must have length p")
        couplings = {}
        for (r, t), w in self.couplings.items():
            key = _canon(r, t)
            if not 0 <= key[0] < key[1] < self.p:
                raise ValueError(f"edge {key} out of range for p={self.p}")
            if w != 0:
                couplings[key] = float(w)
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "couplings", couplings)

    def __eq__(self, other):
        if not isinstance(other, IsingModel):
            return NotImplemented
        return (self.p == other.p and self.kind == other.kind
                and self.couplings == other.couplings
                and np.array_equal(self.fields, other.fields))

    __hash__ = None

    @classmethod
    def from_matrix(cls, J, fields=None, kind="custom"):
        J = np.asarray(J, dtype=float)
        if not np.allclose(J, J.T) or np.any(np.diag(J) != 0):
            raise ValueError("coupling matrix must be symmetric with zero diagonal")
        p = J.shape[0]
        couplings = {(r, t): J[r, t] for r in range(p) for t in range(r + 1, p) if J[r, t]}
        return cls(p, np.zeros(p) if fields is None else fields, couplings, kind)

    @property
    def edges(self) -> frozenset:
        return frozenset(self.couplings)

    @property
    def skeleton(self) -> Skeleton:
        return Skeleton(self.p, self.edges, self.kind)

    @property
    def max_degree(self) -> int:
        return self.skeleton.max_degree

    def coupling_matrix(self) -> np.ndarray:
        J = np.zeros((self.p, self.p))
        for (r, t), w in self.couplings.items():
            J[r, t] = J[t, r] = w
        return J

    def neighbors(self, r) -> set:
        return {t for e in self.couplings for t in e if r in e and t != r}

    def conditional_prob_plus(self, x, r) -> float:
        """``P(x_r = +1 | rest)``, the probability the sampler uses at site ``r``."""
        local = self.fields[r] + self.coupling_matrix()[r] @ np.asarray(x, dtype=float)
        return 1.0 / (1.0 + math.exp(-2.0 * local))

    def to_dict(self):
        return {
            "p": self.p,
            "kind": self.kind,
            "fields": [float(v) for v in self.fields],
            "couplings": [[r, t, w] for (r, t), w in sorted(self.couplings.items())],
        }

    @classmethod
    def from_dict(cls, d):
        couplings = {(int(r), int(t)): float(w) for r, t, w in d["couplings"]}
        return cls(int(d["p"]), np.asarray(d["fields"], float), couplings, d.get("kind", "custom"))


def assign_couplings(skeleton: Skeleton, magnitude: float = 0.5, seed=0) -> IsingModel:
    """Give every edge weight ``+magnitude`` or ``-magnitude`` with equal odds.

    ``seed`` may be an int or a ``numpy.random.Generator``. Edges are visited
    in sorted order so a seed always yields the same sign pattern.
    """
    if not magnitude > 0:
        raise ValueError("coupling magnitude must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else seed_stream(seed)
    edges = sorted(skeleton.edges)
    signs = rng.choice([-1.0, 1.0], size=len(edges))
    couplings = {e: s * magnitude for e, s in zip(edges, signs)}
    return IsingModel(skeleton.p, np.zeros(skeleton.p), couplings, skeleton.kind)


def all_states(p: int) -> np.ndarray:
    """Every configuration in {-1,+1}^p, first variable varying slowest."""
    return np.array(list(itertools.product((-1, 1), repeat=p)), dtype=np.int8).reshape(-1, p)


def exact_distribution(model: IsingModel):
    """Return ``(states, probs)`` by brute-force enumeration (p <= 15)."""
    if model.p > EXACT_MAX_P:
        raise TooLarge(f"exact enumeration limited to p <= {EXACT_MAX_P}, got {model.p}")
    states = all_states(model.p)
    xs = states.astype(float)
    J = model.coupling_matrix()
    energy = xs @ model.fields + 0.5 * np.einsum("ij,jk,ik->i", xs, J, xs)
    logz = np.logaddexp.reduce(energy)
    return states, np.exp(energy - logz)


def exact_moments(model: IsingModel) -> np.ndarray:
    """``E[x_r x_t]`` for every pair (ones on the diagonal)."""
    states, probs = exact_distribution(model)
    xs = states.astype(float)
    return (xs * probs[:, None]).T @ xs


@dataclass(frozen=True)
class GibbsSettings:
    burn_in_sweeps: int = 200
    thin_sweeps: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.burn_in_sweeps < 0 or self.thin_sweeps < 1:
            raise ValueError("need burn_in_sweeps >= 0 and thin_sweeps >= 1")


@dataclass
class SampleMatrix:
    entries: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.entries)
        if x.ndim != 2:
            raise NonBinaryData(f"expected an n x p matrix, got shape {x.shape}")
        if not np.isin(x, (-1, 1)).all():
            raise NonBinaryData("sample entries must be -1 or +1")
        self.entries = x.astype(np.int8)
        self.entries.setflags(write=False)

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def p(self):
        return self.entries.shape[1]

    def subset(self, rows) -> "SampleMatrix":
        return SampleMatrix(self.entries[rows], dict(self.metadata))

    def save(self, path) -> Path:
        path = Path(path)
        try:
            np.savetxt(path, self.entries, fmt="%d", delimiter=",")
            meta = {"n": self.n, "p": self.p, **self.metadata}
            sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        return path

    @classmethod
    def load(cls, path) -> "SampleMatrix":
        path = Path(path)
        try:
            x = np.loadtxt(path, delimiter=",", dtype=int, ndmin=2)
        except (OSError, ValueError) as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc
        meta_file = sidecar_path(path)
        meta = json.loads(meta_file.read_text()) if meta_file.exists() else {}
        return cls(x, meta)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


@numba.njit(cache=True)
def _sweeps(x, J, h, u):
    p = x.shape[0]
    for s in range(u.shape[0]):
        for r in range(p):
            local = h[r]
            for t in range(p):
                local += J[r, t] * x[t]
            if u[s, r] < 1.0 / (1.0 + np.exp(-2.0 * local)):
                x[r] = 1
            else:
                x[r] = -1


# sweeps per block of pre-drawn uniforms
_BLOCK = 4096


def gibbs_sample(model: IsingModel, n: int, settings: GibbsSettings = GibbsSettings(), rng=None):
    """Draw ``n`` thinned samples from a single systematic-scan Gibbs chain.

    The chain starts from a uniformly random state, runs
    ``settings.burn_in_sweeps`` sweeps, then keeps one state every
    ``settings.thin_sweeps`` sweeps. ``rng`` overrides ``settings.seed``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = rng if rng is not None else seed_stream(settings.seed)
    p = model.p
    J = model.coupling_matrix()
    h = model.fields.astype(float)
    x = rng.choice(np.array([-1.0, 1.0]), size=p)
    remaining = settings.burn_in_sweeps
    while remaining > 0:
        k = min(remaining, _BLOCK)
        _sweeps(x, J, h, rng.random((k, p)))
        remaining -= k
    out = np.empty((n, p), dtype=np.int8)
    per_block = max(1, _BLOCK // settings.thin_sweeps)
    i = 0
    while i < n:
        m = min(per_block, n - i)
        u = rng.random((m, settings.thin_sweeps, p))
        for k in range(m):
            _sweeps(x, J, h, u[k])
            out[i + k] = x
        i += m
    meta = {
        "graph": model.kind,
        "sampler": {
            "burn_in_sweeps": settings.burn_in_sweeps,
            "thin_sweeps": settings.thin_sweeps,
            "seed": settings.seed,
        },
        "model": model.to_dict(),
    }
    return SampleMatrix(out, meta)


def empirical_moments(samples) -> np.ndarray:
    x = np.asarray(getattr(samples, "entries", samples), dtype=float)
    return x.T @ x / x.shape[0]


def empirical_distribution(samples) -> np.ndarray:
    """State frequencies in the same order as :func:`all_states`."""
    x = np.asarray(getattr(samples, "entries", samples))
    p = x.shape[1]
    bits = (x > 0).astype(np.int64)
    index = bits @ (1 << np.arange(p - 1, -1, -1, dtype=np.int64))
    return np.bincount(index, minlength=2**p) / x.shape[0]
