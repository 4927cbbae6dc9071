"""Momentum conic descent over a general convex cone.

Each iteration minimizes the objective exactly along the ray through the
current iterate, averages the gradient into a momentum vector, asks the cone
for the best unit-ball atom against that average, and line-searches along the
atom. The negative inner product between the averaged gradient and the atom
equals the dual-norm distance from the average to the dual cone, so it serves
as a computable stopping certificate: the solver stops once it drops below
sqrt(tol_eps).
"""

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cones import Cone
from .exceptions import LineSearchDivergence, NonFiniteValue, UnsupportedCone

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
BRACKET_LIMIT = 1e18
SEARCH_REL_TOL = 1e-10
SEARCH_MAX_EVALS = 200


@dataclass
class ConicProgram:
    """A smooth convex objective paired with (optionally) a cone handle.

    Parameters
    ----------
    dim : int
        Ambient dimension of the oracle inputs.
    value_oracle, gradient_oracle : callable
        Evaluate f and its gradient at an ambient point.
    cone : Cone or None
        Cone handle for the conic solver; vector-space objectives used by the
        semidefinite path leave it as None.
    restriction_oracle : callable or None
        Optional exact 1D restriction: (base, direction) -> (a, b, c) with
        f(base + t * direction) = a t^2 + b t + c. When present, ray and line
        searches are solved in closed form instead of by bracketing.
    norm_pair : str
        Identifier of the norm pair the objective is measured in ("l2" for
        vector problems).
    smoothness_hint : float or None
        A known Lipschitz constant of the gradient, used by verification
        helpers; never required by the solver itself.

    Calls through .value/.gradient/.restriction are counted on the instance
    (see eval_counts) so runs can be compared by oracle effort.
    """

    dim: int
    value_oracle: Callable
    gradient_oracle: Callable
    cone: Cone | None = None
    restriction_oracle: Callable | None = None
    norm_pair: str = "l2"
    smoothness_hint: float | None = None

    def __post_init__(self):
        self._counts = {"value": 0, "gradient": 0, "restriction": 0}

    def value(self, x):
        self._counts["value"] += 1
        return float(self.value_oracle(x))

    def gradient(self, x):
        self._counts["gradient"] += 1
        return np.asarray(self.gradient_oracle(x), dtype=float)

    def restriction(self, base, direction):
        if self.restriction_oracle is None:
            raise UnsupportedCone("no restriction oracle on this program")
        self._counts["restriction"] += 1
        a, b, c = self.restriction_oracle(base, direction)
        return float(a), float(b), float(c)

    def eval_counts(self):
        return dict(self._counts)

    def reset_counts(self):
        for key in self._counts:
            self._counts[key] = 0


@dataclass
class SolverConfig:
    """Run parameters shared by the conic and semidefinite solvers.

    momentum_mode "moco" averages gradients with weight 2/(k+2); "cd" uses the
    raw current gradient. step_rule "line_search" searches along the atom;
    "heuristic" uses theta_k = 2 M / (k + 2) with M = heuristic_m and performs
    no search (monotone descent is then not guaranteed). greedy_period > 0
    enables the periodic factored descent step and applies to the
    semidefinite path only.
    """

    max_iters: int = 300
    tol_eps: float = 0.0
    momentum_mode: str = "moco"
    step_rule: str = "line_search"
    heuristic_m: float | None = None
    greedy_period: int = 0
    rng_seed: int = 0
    trace_every: int = 1


@dataclass
class IterateState:
    """Per-iteration snapshot handed to callbacks."""

    k: int
    x: np.ndarray
    g: np.ndarray
    eta: float
    theta: float
    v: np.ndarray
    delta: float


@dataclass
class TraceRecord:
    k: int
    f_value: float
    dual_cert: float
    cs_residual: float
    eta: float
    theta: float
    wall_ms: float
    lambda_min: float | None = None


@dataclass
class SolveTrace:
    """Sequence of per-iteration records.

    Under exact line search f_value is non-increasing across records.
    """

    records: list = field(default_factory=list)

    def append(self, record):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def f_values(self):
        return np.array([r.f_value for r in self.records])

    def dual_certs(self):
        return np.array([r.dual_cert for r in self.records])

    def cs_residuals(self):
        return np.array([r.cs_residual for r in self.records])

    def etas(self):
        return np.array([r.eta for r in self.records])

    def thetas(self):
        return np.array([r.theta for r in self.records])

    def lambda_mins(self):
        return np.array(
            [np.nan if r.lambda_min is None else r.lambda_min for r in self.records]
        )

    def write_csv(self, path):
        with open(path, "w") as fh:
            include_lambda = any(r.lambda_min is not None for r in self.records)
            fh.write(trace_csv_header(include_lambda) + "\n")
            for r in self.records:
                fh.write(trace_csv_row(r, include_lambda) + "\n")


def trace_csv_header(include_lambda=False):
    cols = "k,f,dual_cert,cs,eta,theta,wall_ms"
    return cols + ",lambda_min" if include_lambda else cols


def trace_csv_row(record, include_lambda=False):
    # repr() of python floats round-trips exactly, which keeps identical runs
    # byte-identical (wall_ms is excluded from that guarantee).
    vals = [
        str(record.k),
        repr(float(record.f_value)),
        repr(float(record.dual_cert)),
        repr(float(record.cs_residual)),
        repr(float(record.eta)),
        repr(float(record.theta)),
        repr(float(record.wall_ms)),
    ]
    if include_lambda:
        vals.append(repr(float(record.lambda_min)))
    return ",".join(vals)


@dataclass
class SolveResult:
    final_point: np.ndarray
    status: str  # "converged" | "max_iters"
    trace: SolveTrace
    certified_dual_cert: float
    stats: dict = field(default_factory=dict)


def delta_schedule(k, mode="moco"):
    """Averaging weight for the momentum update at iteration k."""
    if mode == "moco":
        return 2.0 / (k + 2.0)
    if mode == "cd":
        return 1.0
    raise ValueError(f"unknown momentum mode {mode!r}")


def momentum_update(g_prev, grad, delta):
    """Convex combination (1 - delta) * g_prev + delta * grad."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("momentum weight must lie in [0, 1]")
    return (1.0 - delta) * g_prev + delta * grad


def dual_certificate(g, v):
    """-<g, v> for an LMO output v; equals dist_dual(g, K*) at an exact LMO."""
    return -float(np.vdot(np.asarray(g, float), np.asarray(v, float)))


def _quad_argmin_nonneg(a, b):
    # Minimize a t^2 + b t over t >= 0 for a convex restriction. Returns None
    # for a constant restriction so callers can apply their own convention.
    if a < 0.0:
        raise LineSearchDivergence("restriction is concave along the search line")
    if a > 0.0:
        return max(0.0, -b / (2.0 * a))
    if b > 0.0:
        return 0.0
    if b < 0.0:
        raise LineSearchDivergence("objective is linear and unbounded along the line")
    return None


def minimize_convex_interval(phi, lo, hi, rel_tol=SEARCH_REL_TOL, max_evals=SEARCH_MAX_EVALS):
    """Golden-section minimization of a convex 1D function on [lo, hi].

    Returns (t_best, phi(t_best)) over all evaluated points.
    """
    best = [lo, math.inf]
    evals = [0]

    def ph(t):
        v = float(phi(t))
        evals[0] += 1
        if v < best[1]:
            best[0], best[1] = t, v
        return v

    a, b = float(lo), float(hi)
    ph(a)
    ph(b)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = ph(c), ph(d)
    while (b - a) > rel_tol * max(1.0, abs(a) + abs(b)) and evals[0] < max_evals:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = ph(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = ph(d)
    return best[0], best[1]


def minimize_convex_1d(phi, rel_tol=SEARCH_REL_TOL, max_evals=SEARCH_MAX_EVALS):
    """Minimize a convex 1D function over t >= 0.

    Brackets the minimizer by doubling from [0, 1] and refines the bracket by
    golden section. Raises LineSearchDivergence when the bracket expands past
    the overflow threshold without the values turning upward.
    """
    f0 = float(phi(0.0))
    hi = 1.0
    f_hi = float(phi(hi))
    if f_hi < f0:
        while True:
            nxt = 2.0 * hi
            if nxt > BRACKET_LIMIT:
                raise LineSearchDivergence(
                    "bracket expansion exceeded the overflow threshold"
                )
            f_nxt = float(phi(nxt))
            if f_nxt >= f_hi:
                lo, up = 0.5 * hi, nxt
                break
            hi, f_hi = nxt, f_nxt
    else:
        lo, up = 0.0, 1.0
    t_best, f_best = minimize_convex_interval(phi, lo, up, rel_tol, max_evals)
    if f0 <= f_best:
        return 0.0, f0
    return t_best, f_best


def ray_minimize(problem, x):
    """argmin over eta >= 0 of f(eta * x).

    Uses the exact quadratic restriction when the program provides one and a
    bracketed golden-section search otherwise. At x = 0 every eta gives the
    same point and the no-op convention eta = 1 applies; the same convention
    covers a constant restriction.
    """
    x = np.asarray(x, dtype=float)
    if float(np.linalg.norm(x.ravel())) == 0.0:
        return 1.0
    if problem.restriction_oracle is not None:
        a, b, _ = problem.restriction(np.zeros_like(x), x)
        eta = _quad_argmin_nonneg(a, b)
        return 1.0 if eta is None else eta
    eta, _ = minimize_convex_1d(lambda t: problem.value(t * x))
    return eta


def line_search_step(problem, base, direction):
    """argmin over theta >= 0 of f(base + theta * direction).

    A direction with nonnegative directional derivative yields theta = 0, so
    f(base + theta * direction) <= f(base) always holds on return.
    """
    if problem.restriction_oracle is not None:
        a, b, _ = problem.restriction(base, direction)
        theta = _quad_argmin_nonneg(a, b)
        return 0.0 if theta is None else theta
    theta, _ = minimize_convex_1d(lambda t: problem.value(base + t * direction))
    return theta


def kkt_residuals(problem, x):
    """Complementary-slackness and squared dual-distance residuals at x.

    Returns (<x, grad f(x)>, dist_dual(grad f(x), K*)^2) using the cone's
    exact dual-distance oracle.
    """
    if problem.cone is None:
        raise UnsupportedCone("kkt_residuals needs a cone handle")
    x = np.asarray(x, dtype=float)
    grad = problem.gradient(x)
    cs = float(np.vdot(x, grad))
    dist = problem.cone.dual_distance(grad)
    return cs, dist * dist


def _check_config(config, allow_greedy):
    if config.max_iters < 1:
        raise ValueError("max_iters must be positive")
    if config.tol_eps < 0.0:
        raise ValueError("tol_eps must be nonnegative")
    if config.momentum_mode not in ("cd", "moco"):
        raise ValueError(f"unknown momentum mode {config.momentum_mode!r}")
    if config.step_rule not in ("line_search", "heuristic"):
        raise ValueError(f"unknown step rule {config.step_rule!r}")
    if config.step_rule == "heuristic":
        if config.heuristic_m is None or config.heuristic_m <= 0.0:
            raise ValueError("heuristic step rule needs a positive M estimate")
    if config.trace_every < 1:
        raise ValueError("trace_every must be a positive integer")
    if config.greedy_period and not allow_greedy:
        raise ValueError("greedy steps apply to the semidefinite path only")
    if config.greedy_period < 0:
        raise ValueError("greedy_period must be nonnegative")


def solve(problem, config=None, x0=None, callback=None):
    """Run conic descent (with or without momentum) on a ConicProgram.

    Parameters
    ----------
    problem : ConicProgram
        Objective with a cone handle.
    config : SolverConfig
    x0 : array or None
        Start point in the cone; default is the cone's canonical start.
    callback : callable or None
        Invoked once per iteration as callback(state, record) after the step
        size is known; state.x is the pre-ray iterate x_k so the analyzed
        point is state.eta * state.x.

    Returns a SolveResult whose final_point is the ray-minimized iterate of
    the last visit. Status "converged" means the dual certificate dropped to
    sqrt(tol_eps).
    """
    if config is None:
        config = SolverConfig()
    if problem.cone is None:
        raise UnsupportedCone("solve() needs a ConicProgram with a cone handle")
    _check_config(config, allow_greedy=False)
    cone = problem.cone

    x = cone.default_init() if x0 is None else np.array(x0, dtype=float)
    g = np.zeros_like(x)
    sqrt_eps = math.sqrt(config.tol_eps)
    trace = SolveTrace()
    n_theta_searches = 0
    counts0 = problem.eval_counts()
    status = "max_iters"
    cert = math.inf
    xe = x
    t_start = time.perf_counter()

    for k in range(config.max_iters + 1):
        eta = ray_minimize(problem, x)
        xe = eta * x
        fval = problem.value(xe)
        grad = problem.gradient(xe)
        if not math.isfinite(fval) or not np.all(np.isfinite(grad)):
            raise NonFiniteValue(f"non-finite objective data at iteration {k}")
        delta = delta_schedule(k, config.momentum_mode)
        g = momentum_update(g, grad, delta)
        v = cone.lmo(g)
        cert = dual_certificate(g, v)
        cs = float(np.vdot(xe, grad))
        stop = cert <= sqrt_eps
        last = k == config.max_iters
        theta = 0.0
        if not (stop or last):
            if config.step_rule == "line_search":
                theta = line_search_step(problem, xe, v)
                n_theta_searches += 1
            else:
                theta = 2.0 * config.heuristic_m / (k + 2.0)
        wall_ms = (time.perf_counter() - t_start) * 1e3
        record = TraceRecord(k, fval, cert, cs, eta, theta, wall_ms)
        if k % config.trace_every == 0 or stop or last:
            trace.append(record)
        if callback is not None:
            callback(IterateState(k, x, g, eta, theta, v, delta), record)
        if stop:
            status = "converged"
            break
        if last:
            break
        x = xe + theta * v

    counts1 = problem.eval_counts()
    stats = {key: counts1[key] - counts0[key] for key in counts1}
    stats["n_theta_searches"] = n_theta_searches
    return SolveResult(
        final_point=xe,
        status=status,
        trace=trace,
        certified_dual_cert=cert,
        stats=stats,
    )
