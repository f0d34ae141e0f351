"""Dense two-phase simplex with Bland's rule, vectorized over batches.

Every program in a batch is advanced by the same elementwise array
operations, so the result for one program never depends on which other
programs share its batch.  ``solve`` is literally a batch of one.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-9
REL_PIVOT_TOL = 1e-7
FEAS_TOL = 1e-8
OPT_TOL = 1e-9

_max_workers = 1


def set_max_workers(n: int) -> None:
    """Cap the number of threads used by :func:`solve_batch`."""
    global _max_workers
    _max_workers = max(1, int(n))


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class LinearProgram:
    """maximize c.z  subject to  A z = b, z_i >= 0 where ``nonneg[i]``.

    Variables with ``nonneg[i] == False`` are free (lower bound -inf).
    """

    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    nonneg: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        A = np.asarray(self.eq_matrix, dtype=float)
        b = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape != (b.size, c.size):
            raise ValueError(f"inconsistent LP dimensions: A{A.shape}, b{b.shape}, c{c.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("LP data must be finite")
        nn = np.ones(c.size, bool) if self.nonneg is None else np.asarray(self.nonneg, bool).reshape(-1)
        if nn.size != c.size:
            raise ValueError("nonneg flags must match the number of variables")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "eq_matrix", A)
        object.__setattr__(self, "eq_rhs", b)
        object.__setattr__(self, "nonneg", nn)

    @property
    def shape(self) -> tuple[int, int]:
        return self.eq_matrix.shape


@dataclass
class LpSolution:
    status: Status
    z_star: np.ndarray
    objective_value: float
    basis: np.ndarray
    dual: np.ndarray
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class BatchResult:
    """Raw arrays from :func:`simplex_arrays`, one leading entry per program.

    ``z`` and ``basis`` live in the nonnegative standard-form variable space
    that was passed in.  ``dual`` holds y for the original row signs.  For
    infeasible programs ``farkas`` holds u with u.A <= 0 and u.b > 0.
    """

    status: np.ndarray  # int codes, see _CODES
    z: np.ndarray
    objective: np.ndarray
    basis: np.ndarray
    dual: np.ndarray
    farkas: np.ndarray
    iterations: np.ndarray


_CODES = [Status.OPTIMAL, Status.INFEASIBLE, Status.UNBOUNDED, Status.NUMERICAL_FAILURE]
OPTIMAL, INFEASIBLE, UNBOUNDED, FAILURE = range(4)


def _pivot(T, k, r, e):
    """Pivot tableaux T[k] on (r[k], e[k]) in place."""
    rows = T[k]
    ar = np.arange(k.size)
    piv = rows[ar, r, e]
    prow = rows[ar, r, :] / piv[:, None]
    col = rows[ar, :, e].copy()
    rows -= col[:, :, None] * prow[:, None, :]
    rows[ar, r, :] = prow
    rows[ar, :, e] = 0.0
    rows[ar, r, e] = 1.0
    T[k] = rows


def _iterate(T, basis, status, iters, active, n_enter, max_iter):
    """Run Bland-rule pivots on the ``active`` programs until each stops.

    Columns ``>= n_enter`` may never enter the basis.
    """
    m = basis.shape[1]
    active = np.asarray(active)
    while active.size:
        d = T[active, m, :n_enter]
        cand = d < -OPT_TOL
        has = cand.any(axis=1)
        active = active[has]
        if not active.size:
            break
        e = np.argmax(cand[has], axis=1)
        ar = np.arange(active.size)
        col = T[active, :m, e]
        rhs = T[active, :m, -1]
        # pivots tiny relative to their column amplify roundoff; skip them
        cmax = np.abs(col).max(axis=1, keepdims=True)
        ok = col > np.maximum(PIVOT_TOL, REL_PIVOT_TOL * cmax)
        unb = ~ok.any(axis=1)
        if unb.any():
            status[active[unb]] = UNBOUNDED
            keep = ~unb
            active, e, col, rhs, ok = active[keep], e[keep], col[keep], rhs[keep], ok[keep]
            ar = np.arange(active.size)
            if not active.size:
                break
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(ok, np.maximum(rhs, 0.0) / np.where(ok, col, 1.0), np.inf)
        rmin = ratio.min(axis=1)
        tie = ratio <= rmin[:, None] * (1.0 + 1e-12) + 1e-15
        bidx = np.where(tie, basis[active], np.iinfo(np.int64).max)
        r = np.argmin(bidx, axis=1)
        _pivot(T, active, r, e)
        basis[active, r] = e
        iters[active] += 1
        over = iters[active] >= max_iter
        if over.any():
            status[active[over]] = FAILURE
            active = active[~over]


def _refine(A, b, sign, basis, zb, ok):
    """Recompute basic values from the original data instead of the tableau."""
    out = zb.copy()
    k = np.nonzero(ok)[0]
    if not k.size:
        return out
    B, m, n = A.shape
    full = np.concatenate([A[k], np.broadcast_to(np.eye(m), (k.size, m, m)) * sign[k][:, :, None]], axis=2)
    AB = np.take_along_axis(full, basis[k][:, None, :], axis=2)
    det_ok = np.abs(np.linalg.det(AB)) > 1e-300
    if not det_ok.any():
        return out
    kk = k[det_ok]
    sol = np.linalg.solve(AB[det_ok], b[kk][..., None])[..., 0]
    # keep the refined values only where they are at least as feasible
    better = sol.min(axis=1) >= np.minimum(zb[kk].min(axis=1), 0.0) - 1e-12
    out[kk[better]] = sol[better]
    return out


def simplex_arrays(c, A, b, phase1_only: bool = False, max_iter: int | None = None) -> BatchResult:
    """Solve a stack of ``max c.z, A z = b, z >= 0`` programs of equal shape.

    ``c`` has shape (B, n) (or (n,) shared), ``A`` (B, m, n), ``b`` (B, m).
    With ``phase1_only`` the objective is ignored and only feasibility is
    decided; feasible programs are reported OPTIMAL with objective 0.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    B, m, n = A.shape
    c = np.broadcast_to(np.asarray(c, dtype=float), (B, n))
    if max_iter is None:
        max_iter = 50 * (m + n) + 100
    N = n + m
    sign = np.where(b < 0, -1.0, 1.0)
    T = np.zeros((B, m + 1, N + 1))
    T[:, :m, :n] = A * sign[:, :, None]
    T[:, :m, n:N] = np.eye(m)
    T[:, :m, N] = b * sign
    T[:, m, :n] = -T[:, :m, :n].sum(axis=1)
    T[:, m, N] = -T[:, :m, N].sum(axis=1)
    basis = np.tile(np.arange(n, N), (B, 1))
    status = np.zeros(B, dtype=np.int64)
    iters = np.zeros(B, dtype=np.int64)

    _iterate(T, basis, status, iters, np.arange(B), N, max_iter)

    bscale = np.maximum(1.0, np.abs(b).max(axis=1)) if m else np.ones(B)
    infeas_val = -T[:, m, N]
    infeasible = (status == OPTIMAL) & (infeas_val > FEAS_TOL * bscale)
    status[infeasible] = INFEASIBLE
    farkas = np.zeros((B, m))
    if infeasible.any():
        farkas[infeasible] = (1.0 - T[infeasible, m, n:N]) * sign[infeasible]

    # drive zero-level artificials out of the basis where possible
    live = status == OPTIMAL
    for r in range(m):
        k = np.nonzero(live & (basis[:, r] >= n))[0]
        if not k.size:
            continue
        row = np.abs(T[k, r, :n])
        can = row > PIVOT_TOL
        has = can.any(axis=1)
        k = k[has]
        if k.size:
            e = np.argmax(can[has], axis=1)
            _pivot(T, k, np.full(k.size, r), e)
            basis[k, r] = e

    if not phase1_only:
        cost = np.zeros((B, N))
        cost[:, :n] = -c
        cb = np.take_along_axis(cost, basis, axis=1)
        obj = cost.copy()
        rhs = np.zeros(B)
        for r in range(m):
            obj -= cb[:, r, None] * T[:, r, :N]
            rhs -= cb[:, r] * T[:, r, N]
        T[:, m, :N] = obj
        T[:, m, N] = rhs
        _iterate(T, basis, status, iters, np.nonzero(live)[0], n, max_iter)

    z = np.zeros((B, N))
    np.put_along_axis(z, basis, _refine(A, b, sign, basis, T[:, :m, N], status == OPTIMAL), axis=1)
    z = z[:, :n]
    ok = status == OPTIMAL
    z[ok] = np.maximum(z[ok], 0.0)
    objective = np.where(ok, (c * z).sum(axis=1), np.nan)
    if phase1_only:
        objective = np.where(ok, 0.0, np.nan)
        dual = np.zeros((B, m))
    else:
        dual = T[:, m, n:N] * sign

    # a returned optimum must actually satisfy the equality constraints
    resid = np.abs(np.einsum("bmn,bn->bm", A, z) - b).max(axis=1) if m else np.zeros(B)
    bad = ok & (resid > 1e-6 * bscale)
    status[bad] = FAILURE
    return BatchResult(status, z, objective, basis, dual, farkas, iters)


def _expand(lp: LinearProgram):
    """Split free variables into differences of nonnegative ones."""
    free = np.nonzero(~lp.nonneg)[0]
    if not free.size:
        return lp.objective, lp.eq_matrix, free
    c = np.concatenate([lp.objective, -lp.objective[free]])
    A = np.concatenate([lp.eq_matrix, -lp.eq_matrix[:, free]], axis=1)
    return c, A, free


def _to_solution(lp: LinearProgram, res: BatchResult, i: int, free) -> LpSolution:
    st = _CODES[int(res.status[i])]
    n = lp.objective.size
    zs = res.z[i]
    z = zs[:n].copy()
    if free.size:
        z[free] -= zs[n:]
    diag = {"iterations": int(res.iterations[i])}
    if st is Status.OPTIMAL:
        y = res.dual[i]
        diag["primal_residual"] = float(np.abs(lp.eq_matrix @ z - lp.eq_rhs).max(initial=0.0))
        red = lp.eq_matrix.T @ y - lp.objective
        diag["dual_residual"] = float(
            max(np.maximum(-red[lp.nonneg], 0).max(initial=0.0), np.abs(red[~lp.nonneg]).max(initial=0.0))
        )
        diag["duality_gap"] = float(abs(lp.objective @ z - lp.eq_rhs @ y))
        value = float(lp.objective @ z)
    else:
        y = np.full(lp.eq_rhs.size, np.nan)
        value = float("nan")
        if st is Status.INFEASIBLE:
            diag["farkas"] = res.farkas[i].copy()
        if st is Status.NUMERICAL_FAILURE:
            diag["reason"] = "iteration limit or residual check failed"
    return LpSolution(st, z, value, res.basis[i].copy(), y, int(res.iterations[i]), diag)


def solve(lp: LinearProgram) -> LpSolution:
    """Solve one program with the two-phase Bland-rule simplex."""
    c, A, free = _expand(lp)
    res = simplex_arrays(c[None], A[None], lp.eq_rhs[None])
    return _to_solution(lp, res, 0, free)


def solve_batch(lps: list[LinearProgram]) -> list[LpSolution]:
    """Solve many programs; equal-shape programs are stacked and vectorized.

    Output order matches input order and every entry equals ``solve(lp)``.
    """
    out: list[LpSolution | None] = [None] * len(lps)
    groups: dict[tuple, list[int]] = {}
    expanded = [_expand(lp) for lp in lps]
    for i, (c, A, _) in enumerate(expanded):
        groups.setdefault(A.shape, []).append(i)

    def run(idx):
        c = np.stack([expanded[i][0] for i in idx])
        A = np.stack([expanded[i][1] for i in idx])
        b = np.stack([lps[i].eq_rhs for i in idx])
        res = simplex_arrays(c, A, b)
        for k, i in enumerate(idx):
            out[i] = _to_solution(lps[i], res, k, expanded[i][2])

    jobs = list(groups.values())
    if _max_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(_max_workers) as pool:
            list(pool.map(run, jobs))
    else:
        for idx in jobs:
            run(idx)
    return out  # type: ignore[return-value]
