"""Cone handles: membership tests, linear minimization over the unit-ball
slice of a cone, and dual-cone distance oracles.

Each cone carries a norm pair (primal norm for the ball slice, dual norm for
measuring gradients and certificates): l2/l2 for the orthant and second-order
cone, nuclear/operator for the semidefinite cone. For every cone here the
linear-minimization value satisfies -<g, lmo(g)> = dist_dual(g, K*), which is
what makes the certificate computable for free.
"""

import math

import numpy as np

from .exceptions import EigFailure, UnsupportedCone

_SQRT2 = math.sqrt(2.0)


def nuclear_norm(mat):
    """Sum of absolute eigenvalues of a symmetric matrix."""
    sym = 0.5 * (mat + mat.T)
    return float(np.sum(np.abs(np.linalg.eigvalsh(sym))))


def operator_norm(mat):
    """Largest absolute eigenvalue of a symmetric matrix."""
    sym = 0.5 * (mat + mat.T)
    evals = np.linalg.eigvalsh(sym)
    return float(max(abs(evals[0]), abs(evals[-1])))


def lmo_orthant(g):
    """Minimize <g, v> over v >= 0, ||v||_2 <= 1.

    Returns [-g]_+ / ||[-g]_+||_2 when g has a negative entry, else 0.
    The attained value is -||[-g]_+||_2.
    """
    g = np.asarray(g, dtype=float)
    neg = np.maximum(-g, 0.0)
    nrm = np.linalg.norm(neg)
    if nrm == 0.0:
        return np.zeros_like(g)
    return neg / nrm


def lmo_soc(g):
    """Minimize <g, v> over the second-order cone intersected with the l2 ball.

    Coordinates are laid out (x, t) with the cone variable t last. Three
    cases: -g inside the cone gives -g/||g||; g inside the (self-)dual cone
    gives 0; otherwise the minimizer sits on the cone boundary at
    (-g_x/||g_x||, 1)/sqrt(2).
    """
    g = np.asarray(g, dtype=float)
    gx, gt = g[:-1], g[-1]
    nx = np.linalg.norm(gx)
    ng = np.linalg.norm(g)
    if ng == 0.0:
        return np.zeros_like(g)
    if nx <= -gt:
        return -g / ng
    if nx <= gt:
        return np.zeros_like(g)
    v = np.empty_like(g)
    v[:-1] = -gx / (nx * _SQRT2)
    v[-1] = 1.0 / _SQRT2
    return v


def lmo_psd_dense(mat):
    """Minimize <G, V> over V PSD with nuclear norm at most 1.

    Returns (lambda_min, q, v) where v = q q^T if lambda_min < 0 and v = 0
    otherwise; the attained value is min(lambda_min, 0).
    """
    sym = 0.5 * (np.asarray(mat, dtype=float) + np.asarray(mat, dtype=float).T)
    try:
        evals, evecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - numpy internal
        raise EigFailure("dense eigendecomposition failed") from exc
    lam = float(evals[0])
    q = evecs[:, 0]
    if lam < 0.0:
        v = np.outer(q, q)
    else:
        v = np.zeros_like(sym)
    return lam, q, v


def _soc_project(g):
    # Closed-form projection onto {(x, t): ||x|| <= t}.
    gx, gt = g[:-1], g[-1]
    nx = np.linalg.norm(gx)
    if nx <= gt:
        return g.copy()
    if nx <= -gt:
        return np.zeros_like(g)
    coef = 0.5 * (nx + gt)
    out = np.empty_like(g)
    out[:-1] = coef * gx / nx
    out[-1] = coef
    return out


class Cone:
    """Abstract cone handle."""

    kind = "abstract"
    norm_pair = ("l2", "l2")

    def lmo(self, g):
        raise NotImplementedError

    def contains(self, x):
        raise NotImplementedError

    def dual_distance(self, g):
        raise UnsupportedCone(f"no dual-distance oracle for cone kind {self.kind!r}")

    def default_init(self):
        raise NotImplementedError


class NonnegativeOrthant(Cone):
    """Nonnegative orthant in R^d with the l2/l2 norm pair."""

    kind = "orthant"

    def __init__(self, dim):
        self.dim = int(dim)

    def lmo(self, g):
        return lmo_orthant(g)

    def contains(self, x, tol=1e-10):
        x = np.asarray(x, dtype=float)
        scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
        return bool(np.min(x, initial=0.0) >= -tol * scale)

    def dual_distance(self, g):
        # The dual cone is the orthant itself; the l2 projection residual is
        # the norm of the negative part.
        g = np.asarray(g, dtype=float)
        return float(np.linalg.norm(np.minimum(g, 0.0)))

    def default_init(self):
        e = np.zeros(self.dim)
        e[0] = 1.0
        return e


class SecondOrderCone(Cone):
    """Second-order cone {(x, t): ||x||_2 <= t} in R^d, t stored last."""

    kind = "second_order"

    def __init__(self, dim):
        if dim < 2:
            raise ValueError("second-order cone needs dimension >= 2")
        self.dim = int(dim)

    def lmo(self, g):
        return lmo_soc(g)

    def contains(self, x, tol=1e-10):
        x = np.asarray(x, dtype=float)
        scale = max(1.0, float(np.linalg.norm(x)))
        return bool(x[-1] - np.linalg.norm(x[:-1]) >= -tol * scale)

    def dual_distance(self, g):
        # Self-dual; measured with the l2 norm via the closed-form projection.
        g = np.asarray(g, dtype=float)
        return float(np.linalg.norm(g - _soc_project(g)))

    def default_init(self):
        # The first basis vector is not a cone point here (t = 0 < ||x||);
        # the cone axis is the canonical nonzero start.
        e = np.zeros(self.dim)
        e[-1] = 1.0
        return e


class PsdCone(Cone):
    """PSD cone of n x n symmetric matrices, nuclear/operator norm pair.

    All oracles use dense eigendecompositions; suitable for small n.
    """

    kind = "psd_dense"
    norm_pair = ("nuclear", "operator")

    def __init__(self, n):
        self.n = int(n)

    def lmo(self, g):
        _, _, v = lmo_psd_dense(g)
        return v

    def contains(self, x, tol=1e-8):
        sym = 0.5 * (np.asarray(x, dtype=float) + np.asarray(x, dtype=float).T)
        evals = np.linalg.eigvalsh(sym)
        return bool(evals[0] >= -tol * float(np.sum(np.abs(evals))))

    def dual_distance(self, g):
        # Operator-norm distance to the PSD cone: shifting by
        # max(0, -lambda_min) I is the smallest such perturbation.
        lam, _, _ = lmo_psd_dense(g)
        return max(0.0, -lam)

    def default_init(self):
        x = np.zeros((self.n, self.n))
        x[0, 0] = 1.0
        return x


class PsdOperatorCone(Cone):
    """PSD cone accessed through matrix-vector products only.

    The LMO and dual-distance oracles accept either a symmetric matrix or a
    callable v -> A v and run a seeded Lanczos iteration; meant for the
    matrix-free semidefinite path where the gradient operator is never
    materialized.
    """

    kind = "psd_operator"
    norm_pair = ("nuclear", "operator")

    def __init__(self, n, lanczos=None):
        self.n = int(n)
        self.lanczos = lanczos

    def _min_eig(self, op):
        from .sdp import min_eig_lanczos  # local import: sdp depends on cones

        if callable(op):
            apply = op
        else:
            mat = np.asarray(op, dtype=float)
            apply = lambda v: mat @ v  # noqa: E731
        return min_eig_lanczos(apply, self.n, self.lanczos)

    def lmo(self, op):
        lam, q = self._min_eig(op)
        if lam < 0.0:
            return np.outer(q, q)
        return np.zeros((self.n, self.n))

    def dual_distance(self, op):
        lam, _ = self._min_eig(op)
        return max(0.0, -lam)

    def contains(self, x, tol=1e-8):
        return PsdCone(self.n).contains(x, tol=tol)

    def default_init(self):
        return PsdCone(self.n).default_init()


def dual_distance(cone, g):
    """Distance from g to the dual cone, measured in the cone's dual norm."""
    return cone.dual_distance(g)


def _sphere_grid_orthant(dim, grid_n):
    if dim == 2:
        th = np.linspace(0.0, 0.5 * np.pi, grid_n)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if dim == 3:
        npts = max(8, int(math.sqrt(grid_n)))
        th = np.linspace(0.0, 0.5 * np.pi, npts)
        ph = np.linspace(0.0, 0.5 * np.pi, npts)
        T, P = np.meshgrid(th, ph, indexing="ij")
        pts = np.stack(
            [np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1
        )
        return pts.reshape(-1, 3)
    raise UnsupportedCone("grid oracle covers orthant dimensions 2 and 3 only")


def _sphere_grid_soc(dim, grid_n):
    if dim == 2:
        al = np.linspace(-0.25 * np.pi, 0.25 * np.pi, grid_n)
        return np.stack([np.sin(al), np.cos(al)], axis=1)
    if dim == 3:
        # Allocate grid points to each angular axis by its range: the polar
        # angle spans pi/4, the azimuth spans 2 pi.
        nb = max(8, int(math.sqrt(grid_n / 8.0)))
        nphi = max(16, grid_n // nb)
        be = np.linspace(0.0, 0.25 * np.pi, nb)
        ph = np.linspace(0.0, 2.0 * np.pi, nphi, endpoint=False)
        B, P = np.meshgrid(be, ph, indexing="ij")
        pts = np.stack(
            [np.sin(B) * np.cos(P), np.sin(B) * np.sin(P), np.cos(B)], axis=-1
        )
        return pts.reshape(-1, 3)
    raise UnsupportedCone("grid oracle covers second-order dimensions 2 and 3 only")


def brute_lmo(cone, g, grid_n=10000):
    """Grid-search oracle for the cone-ball linear minimization.

    Exhaustively minimizes <g, v> over a dense grid of the unit-sphere slice
    of the cone plus the zero point. Only small ambient dimensions are
    supported; the value is accurate to O(1/grid_n) in the grid spacing and
    exists purely to cross-check the closed-form oracles.
    """
    g = np.asarray(g, dtype=float)
    if cone.kind == "orthant":
        pts = _sphere_grid_orthant(g.size, grid_n)
    elif cone.kind == "second_order":
        pts = _sphere_grid_soc(g.size, grid_n)
    elif cone.kind in ("psd_dense", "psd_operator"):
        # Unit-nuclear-norm extreme points of the PSD cone are q q^T for
        # unit q, and the sign of q does not matter, so a hemisphere grid
        # of q vectors covers the slice.
        if g.shape == (2, 2):
            th = np.linspace(0.0, np.pi, grid_n)
            qs = np.stack([np.cos(th), np.sin(th)], axis=1)
        elif g.shape == (3, 3):
            npts = max(16, int(math.sqrt(grid_n)))
            th = np.linspace(0.0, 0.5 * np.pi, npts)
            ph = np.linspace(0.0, 2.0 * np.pi, 2 * npts, endpoint=False)
            T, P = np.meshgrid(th, ph, indexing="ij")
            qs = np.stack(
                [np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1
            ).reshape(-1, 3)
        else:
            raise UnsupportedCone("grid oracle covers PSD sides 2 and 3 only")
        vals = np.einsum("ki,ij,kj->k", qs, 0.5 * (g + g.T), qs)
        i = int(np.argmin(vals))
        if vals[i] >= 0.0:
            return np.zeros_like(g)
        return np.outer(qs[i], qs[i])
    else:
        raise UnsupportedCone(f"no grid oracle for cone kind {cone.kind!r}")
    vals = pts @ g
    i = int(np.argmin(vals))
    if vals[i] >= 0.0:
        return np.zeros_like(g)
    return pts[i]
