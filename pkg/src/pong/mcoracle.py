"""Monte Carlo estimate of the probability of force closure.

Each sample draws one tangent perturbation per finger, forms the random
basis wrenches with the mean-generator maps and asks whether the origin lies
in their convex hull.  Every verdict is backed by a checked certificate:

* convex weights over some 7 columns (a stored basis solved directly), or
* a hyperplane strictly separating all columns from the origin,

and samples the cheap stored certificates cannot settle go to the batched
phase-1 simplex, whose certificates are re-checked and then added to the
stores.  Samples no certificate can settle are indeterminate and excluded.

Randomness: a Philox stream per finger, spawned from one SeedSequence, so
the draws depend only on the seed and the chunk size, never on threading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .simplex import OPTIMAL, simplex_arrays
from .wrench import (
    _certify,
    _hull_system,
    build_wrench_model,
    hull_contains_origin,
    min_weight_metric,
    random_wrenches,
)

CHUNK = 8192
POOL_SIZE = 32
MAX_BASES = 8
GILBERT_ITERS = 40


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 100_000
    seed: int = 0
    confidence_z: float = 4.0

    def __post_init__(self):
        if self.n_samples < 1000:
            raise ValueError("n_samples must be at least 1000")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class McEstimate:
    p_hat: float
    std_err: float
    n_success: int
    n_samples: int
    n_indeterminate: int = 0

    @classmethod
    def from_counts(cls, n_success: int, n_valid: int, n_indeterminate: int) -> "McEstimate":
        p = n_success / n_valid if n_valid else 0.0
        se = math.sqrt(p * (1.0 - p) / n_valid) if n_valid else 0.0
        return cls(p, se, n_success, n_valid, n_indeterminate)

    def upper(self, z: float = 4.0) -> float:
        return self.p_hat + z * self.std_err

    def to_dict(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "std_err": self.std_err,
            "n_success": self.n_success,
            "n_samples": self.n_samples,
            "n_indeterminate": self.n_indeterminate,
        }


def finger_streams(seed: int, n_fingers: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n_fingers)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def sample_normals(grasp, streams, n: int) -> np.ndarray:
    """(n, n_f, 3) random normals n_bar + T diag(sigma) eps."""
    out = np.empty((n, grasp.n_fingers, 3))
    for i, (c, rng) in enumerate(zip(grasp.contacts, streams)):
        eps = rng.standard_normal((n, 2)) * c.sigmas
        out[:, i] = c.mean_normal + eps @ c.tangent_basis
    return out


class _CertificatePool:
    """Bases and separating hyperplanes reused across samples of one grasp.

    Bases are kept ordered by how many samples they settled so far, so the
    most useful one is tried first; the order only depends on the samples
    already seen, which keeps runs reproducible.
    """

    def __init__(self, n_w: int, interior=None):
        self.interior = None if interior is None else np.asarray(interior, dtype=float)
        self.bases: list[tuple] = []
        self.hits: list[int] = []
        self.planes: list[np.ndarray] = []
        self.n_w = n_w
        self.seen = 0
        self.closed = 0

    @property
    def rate(self) -> float:
        return self.closed / self.seen if self.seen else 0.5

    def add_basis(self, cols):
        cols = tuple(sorted(int(c) for c in cols))
        if len(cols) == 7 and cols not in self.bases and len(self.bases) < MAX_BASES:
            self.bases.append(cols)
            self.hits.append(0)

    def add_plane(self, a):
        if len(self.planes) < POOL_SIZE:
            self.planes.append(np.asarray(a, dtype=float))

    def try_interior(self, W: np.ndarray, undecided: np.ndarray, contains: np.ndarray, rounds: int = 6):
        """Least-norm corrections of the mean grasp's interior weights.

        Each round projects the current weights onto ``W a = 0, 1'a = 1``
        using only the columns still in play, then drops the columns that
        went negative.
        """
        if self.interior is None:
            return
        idx = np.nonzero(undecided)[0]
        if not len(idx):
            return
        Wi = W[idx]
        n = Wi.shape[2]
        M = np.concatenate([Wi, np.ones((len(idx), 1, n))], axis=1)
        e = np.zeros(M.shape[1])
        e[-1] = 1.0
        alpha = np.broadcast_to(self.interior, (len(idx), n)).copy()
        keep = np.ones((len(idx), n), bool)
        pending = np.ones(len(idx), bool)
        for _ in range(rounds):
            Mk = M * keep[:, None, :]
            r = np.matmul(Mk, alpha[..., None])[..., 0] - e
            G = np.matmul(Mk, Mk.transpose(0, 2, 1))
            diag = np.einsum("bii->bi", G).max(axis=1)
            ok = np.abs(np.linalg.det(G)) > 1e-24 * diag**7
            if not ok.any():
                break
            step = np.zeros_like(alpha)
            lam = np.linalg.solve(G[ok], r[ok][..., None])
            step[ok] = np.matmul(Mk[ok].transpose(0, 2, 1), lam)[..., 0]
            alpha = np.where(ok[:, None], (alpha - step) * keep, alpha)
            sub = pending & ok
            before = undecided[idx].copy()
            _accept(Wi[sub], alpha[sub], idx[sub], undecided, contains)
            pending &= undecided[idx] | ~before
            pending &= ok & undecided[idx]
            if not pending.any():
                break
            keep &= alpha > 0.0
            alpha = np.maximum(alpha, 0.0)

    def try_accept(self, W: np.ndarray, undecided: np.ndarray, contains: np.ndarray):
        order = sorted(range(len(self.bases)), key=lambda q: -self.hits[q])
        for q in order:
            idx = np.nonzero(undecided)[0]
            if not len(idx):
                return
            Wb = W[idx][:, :, list(self.bases[q])]
            M = np.concatenate([Wb, np.ones((len(idx), 1, 7))], axis=1)
            rhs = np.zeros((len(idx), 7, 1))
            rhs[:, 6] = 1.0
            try:
                alpha = np.linalg.solve(M, rhs)[..., 0]
            except np.linalg.LinAlgError:
                continue
            self.hits[q] += _accept(Wb, alpha, idx, undecided, contains)

    def try_reject(self, W: np.ndarray, undecided: np.ndarray):
        if not self.planes:
            return
        idx = np.nonzero(undecided)[0]
        if not len(idx):
            return
        P = np.array(self.planes)
        margin = np.matmul(P, W[idx]).max(axis=2)
        scale = np.abs(W[idx]).max(axis=(1, 2))[:, None] * np.linalg.norm(P, axis=1)[None]
        sep = np.any(margin < -1e-12 * scale, axis=1)
        undecided[idx[sep]] = False


def _accept(Wb, alpha, idx, undecided, contains) -> int:
    """Mark samples whose weights certify 0 in the hull; returns the count."""
    resid = np.abs(np.matmul(Wb, alpha[..., None])[..., 0]).max(axis=1)
    scale = np.abs(Wb).max(axis=(1, 2))
    good = (alpha.min(axis=1) >= 0.0) & (np.abs(alpha.sum(axis=1) - 1) <= 1e-9) & (resid <= 1e-8 * scale)
    contains[idx[good]] = True
    undecided[idx[good]] = False
    return int(good.sum())


def _nearest_point_reject(W: np.ndarray, undecided: np.ndarray, iters: int = GILBERT_ITERS):
    """Gilbert's nearest-point iteration; a point p of the hull with
    p.w_l > 0 for every column certifies that the origin is outside."""
    idx = np.nonzero(undecided)[0]
    if not len(idx):
        return
    Wi = W[idx]
    Wt = Wi.transpose(0, 2, 1)  # (b, n, 6)
    p = Wi.mean(axis=2)
    live = np.ones(len(idx), bool)
    scale = np.abs(Wi).max(axis=(1, 2))
    rows = np.arange(len(idx))
    for _ in range(iters):
        proj = np.matmul(Wt, p[..., None])[..., 0]  # (b, n)
        k = proj.argmin(axis=1)
        low = proj[rows, k]
        sep = live & (low > 1e-12 * scale * np.linalg.norm(p, axis=1))
        undecided[idx[sep]] = False
        live &= ~sep
        if not live.any():
            return
        w = Wi[rows, :, k]
        d = w - p
        dd = np.einsum("bd,bd->b", d, d)
        t = np.clip(-np.einsum("bd,bd->b", p, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
        p = p + t[:, None] * d


def classify(W: np.ndarray, pool: _CertificatePool | None = None):
    """Certified 0-in-hull verdicts for a (S, 6, n_w) stack.

    Returns ``(contains, indeterminate)``.
    """
    S, _, n = W.shape
    pool = pool if pool is not None else _CertificatePool(n)
    contains = np.zeros(S, bool)
    undecided = np.ones(S, bool)
    rejects = [lambda: pool.try_reject(W, undecided), lambda: _nearest_point_reject(W, undecided)]
    accepts = [lambda: pool.try_interior(W, undecided, contains), lambda: pool.try_accept(W, undecided, contains)]
    # cheapest expected route first: accepts when most samples so far closed
    for step in (accepts + rejects if pool.rate >= 0.5 else rejects + accepts):
        step()
    idx = np.nonzero(undecided)[0]
    indet = np.zeros(S, bool)
    if len(idx):
        A, b = _hull_system(W[idx])
        res = simplex_arrays(np.zeros(n), A, b, phase1_only=True)
        c, u, _ = _certify(W[idx], res.status, res.z, res.farkas)
        contains[idx] = c
        indet[idx] = u
        # grow the pools from the first few fresh certificates, in sample order
        for k in range(len(idx)):
            if c[k] and res.status[k] == OPTIMAL:
                pool.add_basis([j for j in res.basis[k] if j < n])
            elif not c[k] and not u[k]:
                pool.add_plane(res.farkas[k, :-1])
            if len(pool.bases) >= MAX_BASES and len(pool.planes) >= POOL_SIZE:
                break
    pool.seen += S
    pool.closed += int(contains.sum())
    return contains, indet


def _seed_pool(model) -> _CertificatePool:
    mw = min_weight_metric(model.w_bar)
    pool = _CertificatePool(model.n_w, mw.alpha if mw.feasible else None)
    A, b = _hull_system(model.w_bar[None])
    res = simplex_arrays(np.zeros(model.n_w), A, b, phase1_only=True)
    if res.status[0] == OPTIMAL:
        pool.add_basis([j for j in res.basis[0] if j < model.n_w])
    return pool


def estimate_pfc(grasp, cfg: McConfig) -> McEstimate:
    """Monte Carlo estimate of P[0 in conv(random basis wrenches)]."""
    model = build_wrench_model(grasp)
    streams = finger_streams(cfg.seed, grasp.n_fingers)
    pool = _seed_pool(model)
    succ = indet = 0
    done = 0
    while done < cfg.n_samples:
        n = min(CHUNK, cfg.n_samples - done)
        W = random_wrenches(model, sample_normals(grasp, streams, n))
        c, u = classify(W, pool)
        succ += int(c.sum())
        indet += int(u.sum())
        done += n
    return McEstimate.from_counts(succ, cfg.n_samples - indet, indet)


@dataclass
class ContainmentReport:
    n_samples: int
    n_hypothesis: int
    n_conclusion: int
    counterexamples: list
    n_indeterminate: int

    @property
    def ok(self) -> bool:
        return not self.counterexamples

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_hypothesis": self.n_hypothesis,
            "n_conclusion": self.n_conclusion,
            "counterexamples": list(self.counterexamples),
            "n_indeterminate": self.n_indeterminate,
        }


def verify_containment(model, samples) -> ContainmentReport:
    """Check "every -(w_l - w_bar_l) in conv(W_bar)  =>  0 in conv(W)" per sample.

    ``samples`` is (S, n_f, 3) random normals.  Samples whose hypothesis
    fails are vacuous; those with an indeterminate hull test are skipped and
    counted.
    """
    normals = np.asarray(samples, dtype=float).reshape(-1, model.n_fingers, 3)
    S = len(normals)
    W = random_wrenches(model, normals)
    dev = W - model.w_bar
    n_w = model.n_w
    # one hull test per (sample, column): is -dev_l in conv(W_bar)?
    shifted = model.w_bar[None, None] + dev.transpose(0, 2, 1)[..., None]
    hyp = hull_contains_origin(shifted.reshape(S * n_w, 6, n_w))
    hyp_in = hyp.contains.reshape(S, n_w).all(axis=1)
    hyp_unknown = hyp.indeterminate.reshape(S, n_w).any(axis=1)
    con = hull_contains_origin(W)
    bad = [int(s) for s in np.nonzero(hyp_in & ~con.contains & ~con.indeterminate)[0]]
    unknown = (hyp_unknown & ~hyp_in) | (hyp_in & con.indeterminate)
    return ContainmentReport(S, int(hyp_in.sum()), int((hyp_in & con.contains).sum()), bad, int(unknown.sum()))
