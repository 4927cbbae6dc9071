"""Semidefinite engine that never stores the matrix iterate.

The positive semidefinite variable X only ever enters the objective through
its measurement image, so the engine tracks three small objects instead of
X itself: the shifted image y = apply(X) - z, a running trace accumulator,
and (optionally) a randomized range sketch S = X @ Omega. Every solver move
is rank one or a rescaling, and each admits an exact cheap update of all
three. The matrix is recovered only on demand, as a low-rank factorization
read out of the sketch.

The linear minimization over the unit-nuclear-ball slice of the cone reduces
to a smallest-eigenvalue problem for the adjoint image of the momentum
vector, solved matrix-free by Lanczos iteration.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .core import (
    SolveTrace,
    SolverConfig,
    TraceRecord,
    _check_config,
    _quad_argmin_nonneg,
    delta_schedule,
    minimize_convex_1d,
    momentum_update,
)
from .exceptions import EigFailure, NonFiniteValue, RankTooLarge


@dataclass
class MeasurementOperator:
    """Linear measurements of a symmetric matrix, with a constant shift.

    Encodes the map X -> (tr(G_1 X), ..., tr(G_d X)) together with the shift
    z, so iterates live in measurement space as y = apply(X) - z.

    matvec_i(i, u) applies the i-th measurement matrix to a vector.
    gram(q) returns the measurement image of q q^T for a vector q of shape
    (n,), or of U U^T when given a matrix of shape (n, r).
    adjoint_matvec(p, u) applies sum_i p_i G_i to u; u may be (n,) or (n, r).
    apply_dense / adjoint_dense materialize the map on explicit matrices and
    exist for verification at small n; large instances leave them as None.
    """

    n: int
    d: int
    z: np.ndarray
    matvec_i: Callable
    gram: Callable
    adjoint_matvec: Callable
    apply_dense: Callable | None = None
    adjoint_dense: Callable | None = None


@dataclass
class SdpState:
    """Mutable iterate of the engine: image, trace, optional sketch."""

    y: np.ndarray
    tr: float
    sketch: "SketchState | None" = None


# ---------------------------------------------------------------------------
# randomized range sketch


@dataclass
class SketchState:
    """Running sketch S = X @ omega for a fixed Gaussian test matrix omega."""

    omega: np.ndarray
    s: np.ndarray

    @classmethod
    def create(cls, n, size, seed=0):
        if size < 2:
            raise ValueError("sketch size must be at least 2")
        rng = np.random.default_rng(seed)
        omega = rng.standard_normal((n, size))
        return cls(omega=omega, s=np.zeros((n, size)))

    @property
    def size(self):
        return self.omega.shape[1]

    def scale(self, c):
        self.s *= c

    def add_rank_one(self, theta, q):
        q = np.asarray(q, dtype=float)
        self.s += theta * np.outer(q, q @ self.omega)

    def replace(self, t_sq, u):
        # mirrors X <- t_sq * X + u u^T
        u = np.asarray(u, dtype=float)
        self.s = t_sq * self.s + u @ (u.T @ self.omega)


def sketch_reconstruct(sketch, rank):
    """Rank-`rank` eigenvalue factorization read out of a sketch.

    Returns (u, lam) with u of shape (n, rank), orthonormal columns, and
    nonnegative eigenvalues lam, approximating X ~ u diag(lam) u^T. The
    stabilizing shift follows the usual single-pass recipe: S is perturbed by
    nu * omega with nu at the noise floor of S, the square root of the small
    Gram matrix is Cholesky when it cooperates and an eigenvalue square root
    otherwise, and nu is subtracted back off the squared singular values.
    """
    omega, s = sketch.omega, sketch.s
    n, size = s.shape
    if rank >= size - 1:
        raise RankTooLarge(
            f"rank {rank} needs a sketch larger than {size} columns"
        )
    fro = float(np.linalg.norm(s))
    if fro == 0.0:
        return np.zeros((n, rank)), np.zeros(rank)
    nu = math.sqrt(n) * np.finfo(float).eps * fro
    s_nu = s + nu * omega
    b = omega.T @ s_nu
    b = 0.5 * (b + b.T)
    try:
        chol = np.linalg.cholesky(b)
        e = scipy.linalg.solve_triangular(chol, s_nu.T, lower=True).T
    except np.linalg.LinAlgError:
        # b should be positive definite; roundoff can spoil that, so fall
        # back to a pseudo inverse square root
        w, q = np.linalg.eigh(b)
        keep = w > w.max() * 1e-14
        e = s_nu @ (q[:, keep] / np.sqrt(w[keep]))
    u, sig, _ = np.linalg.svd(e, full_matrices=False)
    lam = np.maximum(sig**2 - nu, 0.0)
    return u[:, :rank], lam[:rank]


def factor_to_dense(u, lam):
    """Materialize u diag(lam) u^T."""
    u = np.asarray(u, dtype=float)
    lam = np.asarray(lam, dtype=float)
    return (u * lam) @ u.T


def save_factor(path, u, lam):
    with open(path, "wb") as fh:
        np.savez(fh, u=np.asarray(u, dtype=float), lam=np.asarray(lam, dtype=float))


def load_factor(path):
    with open(path, "rb") as fh:
        data = np.load(fh)
        return data["u"], data["lam"]


# ---------------------------------------------------------------------------
# matrix-free smallest eigenpair


@dataclass
class LanczosConfig:
    max_iters: int = 200
    residual_tol: float = 1e-8
    seed: int = 0


def min_eig_lanczos(matvec, n, config=None):
    """Smallest eigenpair (lam, q) of a symmetric operator given as a matvec.

    Runs Lanczos with full reorthogonalization from a seeded random start and
    verifies the returned pair against an explicit residual. One retry with a
    reseeded start vector is attempted before giving up.
    """
    cfg = config if config is not None else LanczosConfig()
    try:
        return _lanczos_once(matvec, n, cfg, cfg.seed)
    except EigFailure:
        return _lanczos_once(matvec, n, cfg, cfg.seed + 1)


def _lanczos_once(matvec, n, cfg, seed):
    if n == 1:
        q = np.ones(1)
        lam = float(np.asarray(matvec(q)).ravel()[0])
        return lam, q
    rng = np.random.default_rng(seed)
    m = min(n, cfg.max_iters)
    basis = np.zeros((n, m))
    alphas = np.zeros(m)
    betas = np.zeros(m)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    ritz_vec = None
    j_stop = 0
    for j in range(m):
        basis[:, j] = v
        w = np.asarray(matvec(v), dtype=float)
        if not np.all(np.isfinite(w)):
            raise EigFailure("operator returned non-finite values")
        alphas[j] = float(v @ w)
        w -= alphas[j] * v
        if j > 0:
            w -= betas[j - 1] * basis[:, j - 1]
        # full reorthogonalization, twice, keeps the basis usable long past
        # the point where plain Lanczos loses orthogonality
        for _ in range(2):
            w -= basis[:, : j + 1] @ (basis[:, : j + 1].T @ w)
        beta = float(np.linalg.norm(w))
        ritz, svec = scipy.linalg.eigh_tridiagonal(
            alphas[: j + 1], betas[:j], select="i", select_range=(0, 0)
        )
        lam = float(ritz[0])
        ritz_vec = svec[:, 0]
        scale = max(
            1.0,
            float(np.abs(alphas[: j + 1]).max())
            + (2.0 * float(np.abs(betas[:j]).max()) if j > 0 else 0.0),
        )
        resid_est = beta * abs(float(ritz_vec[-1]))
        j_stop = j
        if resid_est <= cfg.residual_tol * scale or beta <= 1e-14 * scale:
            break
        betas[j] = beta
        v = w / beta
    q = basis[:, : j_stop + 1] @ ritz_vec
    q /= np.linalg.norm(q)
    resid = float(np.linalg.norm(np.asarray(matvec(q), dtype=float) - lam * q))
    if resid > 10.0 * cfg.residual_tol * scale:
        raise EigFailure(
            f"eigenpair residual {resid:.3e} above tolerance after {j_stop + 1} steps"
        )
    return lam, q


# ---------------------------------------------------------------------------
# rank-constrained descent on the factored family t^2 X + u u^T


@dataclass
class GreedyConfig:
    rank: int = 3
    max_inner: int = 60
    line_search_evals: int = 40
    rel_tol: float = 1e-10
    perturb_scale: float = 1e-3


def greedy_step(fv, op, gamma, state, rng, config=None, record_factors=False):
    """Descend over matrices s X_cur + u u^T and commit only improvements.

    The scalar s >= 0 scales the whole current iterate and u is an n-by-rank
    factor, so the penalized objective and its gradient need only the current
    image, the trace accumulator, and measurement-space primitives. Inner
    iterations alternate an exact update of s (the objective restricted to s
    is a one-dimensional convex problem the restriction oracle solves in
    closed form) with a line-searched gradient step on u. The start point
    (s, u) = (1, 0) is stationary in u, hence the seeded random perturbation;
    the state is rewritten only when the best point found is strictly below
    the incumbent value, so the outer objective never increases here.
    """
    cfg = config if config is not None else GreedyConfig()
    z = np.asarray(op.z, dtype=float)
    y0 = state.y
    tr0 = state.tr
    f0 = fv.value(y0) + gamma * tr0
    base = y0 + z
    s = 1.0
    u = (
        cfg.perturb_scale
        * math.sqrt((1.0 + tr0) / op.n)
        * rng.standard_normal((op.n, cfg.rank))
    )

    def assemble(sv, gram_u, tr_u):
        y_new = sv * base + gram_u - z
        return fv.value(y_new) + gamma * (sv * tr0 + tr_u), y_new

    gram_u = op.gram(u)
    tr_u = float(np.vdot(u, u))
    h_cur, y_cur = assemble(s, gram_u, tr_u)
    h_best, s_best, u_best = h_cur, s, u.copy()
    inner_done = 0
    for inner in range(cfg.max_inner):
        h_prev = h_cur
        # exact scale update: along s the problem is the objective restricted
        # to a ray, plus a linear trace term
        if fv.restriction_oracle is not None:
            a, b, _ = fv.restriction(gram_u - z, base)
            s_new = _quad_argmin_nonneg(a, b + gamma * tr0)
            if s_new is not None:
                s = s_new
        else:
            s, _ = minimize_convex_1d(
                lambda c: fv.value(c * base + gram_u - z) + gamma * c * tr0
            )
        h_cur, y_cur = assemble(s, gram_u, tr_u)
        # line-searched gradient step on the factor
        p = fv.gradient(y_cur)
        grad_u = 2.0 * (op.adjoint_matvec(p, u) + gamma * u)
        gn = float(np.linalg.norm(grad_u))
        if gn <= 1e-14 * max(1.0, abs(h_cur)):
            inner_done = inner + 1
            break
        direction = grad_u / gn

        def along(alpha):
            uv = u - alpha * direction
            hv, _ = assemble(s, op.gram(uv), float(np.vdot(uv, uv)))
            return hv

        alpha, h_alpha = minimize_convex_1d(
            along, max_evals=cfg.line_search_evals
        )
        if h_alpha < h_cur:
            u = u - alpha * direction
            gram_u = op.gram(u)
            tr_u = float(np.vdot(u, u))
            h_cur, y_cur = assemble(s, gram_u, tr_u)
        inner_done = inner + 1
        if h_cur < h_best:
            h_best, s_best, u_best = h_cur, s, u.copy()
        if h_prev - h_cur <= cfg.rel_tol * max(1.0, abs(h_prev)):
            break
    info = {
        "committed": False,
        "f_before": f0,
        "f_after": f0,
        "inner_iters": inner_done,
    }
    if h_best < f0:
        state.y = s_best * base + op.gram(u_best) - z
        state.tr = s_best * tr0 + float(np.vdot(u_best, u_best))
        if state.sketch is not None:
            state.sketch.replace(s_best, u_best)
        info["committed"] = True
        info["f_after"] = h_best
        if record_factors:
            info["t_sq"] = s_best
            info["u"] = u_best.copy()
    return info


def theta_heuristic(k, m):
    """Pre-scheduled step length 2 m / (k + 2), no search involved."""
    return 2.0 * m / (k + 2.0)


# ---------------------------------------------------------------------------
# solver loops


@dataclass
class SdpResult:
    final_y: np.ndarray
    final_tr: float
    sketch: SketchState | None
    status: str
    trace: SolveTrace
    certified_dual_cert: float
    final_lambda: float
    stats: dict = field(default_factory=dict)


def _ray_minimize_sdp(fv, gamma, y, z, tr):
    # argmin over eta >= 0 of fv(eta (y + z) - z) + gamma eta tr; at X = 0
    # every eta is the same point, convention eta = 1
    direction = y + z
    if float(np.linalg.norm(direction)) == 0.0 and tr == 0.0:
        return 1.0
    if fv.restriction_oracle is not None:
        a, b, _ = fv.restriction(-z, direction)
        eta = _quad_argmin_nonneg(a, b + gamma * tr)
        return 1.0 if eta is None else eta
    eta, _ = minimize_convex_1d(lambda s: fv.value(s * direction - z) + gamma * s * tr)
    return eta


def _theta_minimize_sdp(fv, gamma, y, g_atom):
    # argmin over theta >= 0 along the unit-trace atom image
    if fv.restriction_oracle is not None:
        a, b, _ = fv.restriction(y, g_atom)
        theta = _quad_argmin_nonneg(a, b + gamma)
        return 0.0 if theta is None else theta
    theta, _ = minimize_convex_1d(lambda s: fv.value(y + s * g_atom) + gamma * s)
    return theta


def sdp_solve(
    fv,
    op,
    gamma=0.0,
    config=None,
    sketch_size=None,
    sketch_seed=None,
    greedy_config=None,
    lanczos=None,
    callback=None,
    record_factors=False,
):
    """Momentum conic descent on min f(apply(X) - z) + gamma tr(X), X psd.

    fv is the measurement-space objective (a ConicProgram with cone None and
    dim equal to op.d); the trace penalty is handled here, not inside fv.
    The dual certificate of a visit is max(0, -lambda) for the smallest
    eigenvalue lambda of the adjoint image of the momentum vector plus
    gamma I, and the run stops once it reaches sqrt(tol_eps).

    The returned state is the ray-rescaled iterate of the final visit. When
    sketch_size is set, a rank sketch of X is maintained through every move
    and returned for factorized readout.
    """
    if config is None:
        config = SolverConfig()
    _check_config(config, allow_greedy=True)
    if fv.dim != op.d:
        raise ValueError("objective dimension does not match the measurement count")
    lanczos_cfg = lanczos if lanczos is not None else LanczosConfig(seed=config.rng_seed)
    rng = np.random.default_rng(config.rng_seed)
    greedy_cfg = greedy_config if greedy_config is not None else GreedyConfig()
    z = np.asarray(op.z, dtype=float)

    y = -z.astype(float)
    tr = 0.0
    sketch = None
    if sketch_size is not None:
        seed = sketch_seed if sketch_seed is not None else config.rng_seed + 1
        sketch = SketchState.create(op.n, sketch_size, seed=seed)
    g_avg = np.zeros(op.d)
    sqrt_eps = math.sqrt(config.tol_eps)
    trace = SolveTrace()
    counts0 = fv.eval_counts()
    n_theta_searches = 0
    greedy_events = []
    status = "max_iters"
    cert = math.inf
    lam = math.inf
    t_start = time.perf_counter()

    for k in range(config.max_iters + 1):
        eta = _ray_minimize_sdp(fv, gamma, y, z, tr)
        if eta != 1.0:
            y = eta * (y + z) - z
            tr *= eta
            if sketch is not None:
                sketch.scale(eta)
        fval = fv.value(y) + gamma * tr
        p = fv.gradient(y)
        if not math.isfinite(fval) or not np.all(np.isfinite(p)):
            raise NonFiniteValue(f"non-finite objective data at iteration {k}")
        cs = float(np.vdot(y + z, p)) + gamma * tr
        delta = delta_schedule(k, config.momentum_mode)
        g_avg = momentum_update(g_avg, p, delta)
        lam, q = min_eig_lanczos(
            lambda u: op.adjoint_matvec(g_avg, u) + gamma * u, op.n, lanczos_cfg
        )
        cert = max(0.0, -lam)
        stop = cert <= sqrt_eps
        last = k == config.max_iters
        theta = 0.0
        greedy_info = None
        if not (stop or last):
            g_atom = op.gram(q)
            if config.step_rule == "line_search":
                theta = _theta_minimize_sdp(fv, gamma, y, g_atom)
                n_theta_searches += 1
            else:
                theta = theta_heuristic(k, config.heuristic_m)
            y = y + theta * g_atom
            tr += theta
            if sketch is not None:
                sketch.add_rank_one(theta, q)
            if config.greedy_period and (k + 1) % config.greedy_period == 0:
                state = SdpState(y, tr, sketch)
                greedy_info = greedy_step(
                    fv, op, gamma, state, rng, greedy_cfg, record_factors
                )
                greedy_info["k"] = k
                greedy_events.append(greedy_info)
                y, tr = state.y, state.tr
        wall_ms = (time.perf_counter() - t_start) * 1e3
        record = TraceRecord(k, fval, cert, cs, eta, theta, wall_ms, lambda_min=lam)
        if k % config.trace_every == 0 or stop or last:
            trace.append(record)
        if callback is not None:
            callback(
                {
                    "k": k,
                    "eta": eta,
                    "theta": theta,
                    "q": q,
                    "lambda": lam,
                    "g_avg": g_avg,
                    "greedy": greedy_info,
                    "y": y,
                    "tr": tr,
                    "sketch": sketch,
                    "record": record,
                }
            )
        if stop:
            status = "converged"
            break
        if last:
            break

    counts1 = fv.eval_counts()
    stats = {key: counts1[key] - counts0[key] for key in counts1}
    stats["n_theta_searches"] = n_theta_searches
    stats["greedy_events"] = greedy_events
    stats["n_greedy_commits"] = sum(1 for e in greedy_events if e["committed"])
    return SdpResult(
        final_y=y,
        final_tr=tr,
        sketch=sketch,
        status=status,
        trace=trace,
        certified_dual_cert=cert,
        final_lambda=lam,
        stats=stats,
    )


def _quad_argmin_segment(a, b):
    # minimize a t^2 + b t over [0, 1]; convexity means a >= 0 up to roundoff
    if a <= 0.0:
        return 0.0 if a + b >= 0.0 else 1.0
    return min(1.0, max(0.0, -b / (2.0 * a)))


def fw_baseline_step(fv, op, gamma, tau, state, lanczos_cfg=None):
    """One projection-free step on the trace-bounded spectrahedron.

    The feasible set is {X psd, tr X <= tau}; the extreme atom against the
    gradient is tau q q^T for the smallest eigenvector q when the smallest
    eigenvalue is negative, and 0 otherwise. Moves by segment search between
    the iterate and the atom and updates state in place. Returns an info
    dict with the gap, eigenvalue, step, and atom.
    """
    z = np.asarray(op.z, dtype=float)
    p = fv.gradient(state.y)
    lam, q = min_eig_lanczos(
        lambda u: op.adjoint_matvec(p, u) + gamma * u, op.n, lanczos_cfg
    )
    if lam < 0.0:
        y_atom = tau * op.gram(q) - z
        tr_atom = tau
        atom_q = q
    else:
        y_atom = -z
        tr_atom = 0.0
        atom_q = None
    gap = float(np.vdot(p, state.y - y_atom)) + gamma * (state.tr - tr_atom)
    direction = y_atom - state.y
    if fv.restriction_oracle is not None:
        a, b, _ = fv.restriction(state.y, direction)
        theta = _quad_argmin_segment(a, b + gamma * (tr_atom - state.tr))
    else:
        theta, _ = minimize_convex_1d(
            lambda s: fv.value(state.y + min(s, 1.0) * direction)
            + gamma * ((1.0 - min(s, 1.0)) * state.tr + min(s, 1.0) * tr_atom)
        )
        theta = min(theta, 1.0)
    state.y = state.y + theta * direction
    state.tr = (1.0 - theta) * state.tr + theta * tr_atom
    if state.sketch is not None:
        state.sketch.scale(1.0 - theta)
        if atom_q is not None:
            state.sketch.add_rank_one(theta * tau, atom_q)
    return {"lambda": lam, "gap": gap, "theta": theta, "q": atom_q}


def fw_solve(
    fv,
    op,
    tau,
    gamma=0.0,
    config=None,
    sketch_size=None,
    sketch_seed=None,
    lanczos=None,
    callback=None,
):
    """Baseline solver on the trace-bounded set {X psd, tr X <= tau}.

    No ray rescaling and no momentum; the recorded dual_cert column holds the
    standard linearization gap <grad, X - atom>, and the run stops when the
    gap reaches tol_eps directly (the gap already has objective units). A
    tau below the trace of the true minimizer makes the optimum of this
    problem differ from the unconstrained-cone one; that is the point of the
    comparison, not a defect.
    """
    if config is None:
        config = SolverConfig()
    if config.max_iters < 1:
        raise ValueError("max_iters must be positive")
    if tau <= 0.0:
        raise ValueError("trace bound tau must be positive")
    lanczos_cfg = lanczos if lanczos is not None else LanczosConfig(seed=config.rng_seed)
    z = np.asarray(op.z, dtype=float)
    sketch = None
    if sketch_size is not None:
        seed = sketch_seed if sketch_seed is not None else config.rng_seed + 1
        sketch = SketchState.create(op.n, sketch_size, seed=seed)
    state = SdpState(y=-z.astype(float), tr=0.0, sketch=sketch)
    trace = SolveTrace()
    counts0 = fv.eval_counts()
    status = "max_iters"
    gap = math.inf
    lam = math.inf
    t_start = time.perf_counter()

    for k in range(config.max_iters + 1):
        fval = fv.value(state.y) + gamma * state.tr
        p = fv.gradient(state.y)
        if not math.isfinite(fval) or not np.all(np.isfinite(p)):
            raise NonFiniteValue(f"non-finite objective data at iteration {k}")
        cs = float(np.vdot(state.y + z, p)) + gamma * state.tr
        lam, q = min_eig_lanczos(
            lambda u: op.adjoint_matvec(p, u) + gamma * u, op.n, lanczos_cfg
        )
        if lam < 0.0:
            y_atom = tau * op.gram(q) - z
            tr_atom = tau
            atom_q = q
        else:
            y_atom = -z
            tr_atom = 0.0
            atom_q = None
        gap = float(np.vdot(p, state.y - y_atom)) + gamma * (state.tr - tr_atom)
        stop = gap <= config.tol_eps
        last = k == config.max_iters
        theta = 0.0
        if not (stop or last):
            direction = y_atom - state.y
            if fv.restriction_oracle is not None:
                a, b, _ = fv.restriction(state.y, direction)
                theta = _quad_argmin_segment(a, b + gamma * (tr_atom - state.tr))
            else:
                theta_raw, _ = minimize_convex_1d(
                    lambda s: fv.value(state.y + min(s, 1.0) * direction)
                )
                theta = min(theta_raw, 1.0)
            state.y = state.y + theta * direction
            state.tr = (1.0 - theta) * state.tr + theta * tr_atom
            if state.sketch is not None:
                state.sketch.scale(1.0 - theta)
                if atom_q is not None:
                    state.sketch.add_rank_one(theta * tau, atom_q)
        wall_ms = (time.perf_counter() - t_start) * 1e3
        record = TraceRecord(k, fval, gap, cs, 1.0, theta, wall_ms, lambda_min=lam)
        if k % config.trace_every == 0 or stop or last:
            trace.append(record)
        if callback is not None:
            callback(
                {
                    "k": k,
                    "eta": 1.0,
                    "theta": theta,
                    "q": atom_q,
                    "tau": tau,
                    "lambda": lam,
                    "greedy": None,
                    "y": state.y,
                    "tr": state.tr,
                    "sketch": state.sketch,
                    "record": record,
                }
            )
        if stop:
            status = "converged"
            break
        if last:
            break

    counts1 = fv.eval_counts()
    stats = {key: counts1[key] - counts0[key] for key in counts1}
    stats["n_theta_searches"] = 0
    stats["greedy_events"] = []
    stats["n_greedy_commits"] = 0
    return SdpResult(
        final_y=state.y,
        final_tr=state.tr,
        sketch=state.sketch,
        status=status,
        trace=trace,
        certified_dual_cert=gap,
        final_lambda=lam,
        stats=stats,
    )
