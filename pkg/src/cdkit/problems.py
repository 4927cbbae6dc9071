"""Problem builders for the bundled experiments.

Each builder returns a small bundle holding the objective, the measurement
operator where one applies, and whatever ground truth the construction knows
(planted solutions, optimal values, sensible smoothness constants), so runs
can be checked against independent quantities instead of solver output.
"""

import io
import struct
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct, idct

from .cones import NonnegativeOrthant
from .core import ConicProgram
from .exceptions import DegenerateSignal
from .sdp import MeasurementOperator


def _scaled_sq_norm_program(dim, coeff):
    # f(y) = coeff * ||y||^2 with exact quadratic restrictions
    def value(y):
        y = np.asarray(y, dtype=float)
        return coeff * float(np.vdot(y, y))

    def gradient(y):
        return 2.0 * coeff * np.asarray(y, dtype=float)

    def restriction(base, direction):
        base = np.asarray(base, dtype=float)
        direction = np.asarray(direction, dtype=float)
        return (
            coeff * float(np.vdot(direction, direction)),
            2.0 * coeff * float(np.vdot(base, direction)),
            coeff * float(np.vdot(base, base)),
        )

    return ConicProgram(
        dim=dim,
        value_oracle=value,
        gradient_oracle=gradient,
        restriction_oracle=restriction,
        smoothness_hint=2.0 * coeff,
    )


# ---------------------------------------------------------------------------
# nonnegative orthant quadratics with a planted optimum


@dataclass
class OrthantQuadratic:
    program: ConicProgram
    quad: np.ndarray
    lin: np.ndarray
    x_star: np.ndarray
    f_star: float
    lipschitz: float


def build_orthant_quadratic(dim=20, seed=0, support_size=None):
    """Strongly convex quadratic over the nonnegative orthant.

    The optimum is planted: pick x_star supported on a random index set,
    pick nonnegative slacks off the support, and back out the linear term so
    the gradient at x_star equals the slack vector. That makes x_star satisfy
    the optimality conditions exactly, with known optimal value.
    """
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((dim, dim))
    quad = m @ m.T / dim + 0.1 * np.eye(dim)
    if support_size is None:
        support_size = max(1, dim // 3)
    if not 1 <= support_size <= dim:
        raise ValueError("support_size out of range")
    order = rng.permutation(dim)
    support = order[:support_size]
    x_star = np.zeros(dim)
    x_star[support] = np.abs(rng.standard_normal(support_size)) + 0.1
    slack = np.zeros(dim)
    slack[order[support_size:]] = np.abs(rng.standard_normal(dim - support_size))
    lin = quad @ x_star - slack
    f_star = 0.5 * float(x_star @ quad @ x_star) - float(lin @ x_star)
    lipschitz = float(np.linalg.eigvalsh(quad)[-1])

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ quad @ x) - float(lin @ x)

    def gradient(x):
        return quad @ np.asarray(x, dtype=float) - lin

    def restriction(base, direction):
        base = np.asarray(base, dtype=float)
        direction = np.asarray(direction, dtype=float)
        qd = quad @ direction
        return (
            0.5 * float(direction @ qd),
            float(base @ qd) - float(lin @ direction),
            value(base),
        )

    program = ConicProgram(
        dim=dim,
        value_oracle=value,
        gradient_oracle=gradient,
        cone=NonnegativeOrthant(dim),
        restriction_oracle=restriction,
        smoothness_hint=lipschitz,
    )
    return OrthantQuadratic(
        program=program,
        quad=quad,
        lin=lin,
        x_star=x_star,
        f_star=f_star,
        lipschitz=lipschitz,
    )


# ---------------------------------------------------------------------------
# trace-targeting toy semidefinite instance


@dataclass
class TraceToy:
    fv: ConicProgram
    op: MeasurementOperator
    target: float
    f_star: float
    nuclear_radius: float


def build_trace_toy(n=2, target=1.0):
    """One measurement, the trace: min (1/2)(tr X - target)^2 over psd X.

    Any psd matrix with trace equal to target is optimal, so the optimal
    value is 0 and the minimal nuclear radius of a solution is the target
    itself. Useful as the smallest instance where a trace-bounded feasible
    set with too small a bound visibly changes the answer.
    """
    if target <= 0.0:
        raise ValueError("target trace must be positive")
    z = np.array([float(target)])

    def matvec_i(i, u):
        return np.array(u, dtype=float)

    def gram(q):
        q = np.asarray(q, dtype=float)
        return np.array([float(np.vdot(q, q))])

    def adjoint_matvec(p, u):
        return float(p[0]) * np.asarray(u, dtype=float)

    def apply_dense(x_mat):
        return np.array([float(np.trace(x_mat))])

    def adjoint_dense(p):
        return float(p[0]) * np.eye(n)

    op = MeasurementOperator(
        n=n,
        d=1,
        z=z,
        matvec_i=matvec_i,
        gram=gram,
        adjoint_matvec=adjoint_matvec,
        apply_dense=apply_dense,
        adjoint_dense=adjoint_dense,
    )
    fv = _scaled_sq_norm_program(1, 0.5)
    return TraceToy(
        fv=fv, op=op, target=float(target), f_star=0.0, nuclear_radius=float(target)
    )


# ---------------------------------------------------------------------------
# low-rank matrix completion


@dataclass
class MatrixCompletion:
    fv: ConicProgram
    op: MeasurementOperator
    gamma: float
    v_true: np.ndarray
    b: np.ndarray
    row_idx: np.ndarray
    col_idx: np.ndarray
    nuclear_radius: float


def _matcomp_mask(n, block, density, rng):
    # Upper-triangle sampling built one row at a time so no n^2 buffer is
    # ever allocated. The leading block-by-block corner is always observed;
    # the remaining upper-triangle entries are kept independently with the
    # given density.
    rows_i = []
    rows_j = []
    for i in range(n):
        js = np.arange(i, n, dtype=np.int32)
        bern = rng.random(n - i) < density
        if i < block:
            keep = (js < block) | bern
        else:
            keep = bern
        kept = js[keep]
        rows_i.append(np.full(kept.size, i, dtype=np.int32))
        rows_j.append(kept)
    return np.concatenate(rows_i), np.concatenate(rows_j)


def build_matcomp(n=100, rank=3, seed=0, block=10, density=0.1, noise_snr=None,
                  gamma=0.0):
    """Symmetric matrix completion from a partial entry mask.

    The ground truth is v v^T for an n-by-rank Gaussian factor v. Observed
    entries are the symmetrized coordinate measurements (so each observation
    reads (X_ij + X_ji) / 2), the objective is half the squared residual to
    the observed values, and z equals the observation vector so y = 0 at a
    perfect fit.
    """
    if block > n:
        raise ValueError("observed block cannot exceed the matrix size")
    rng = np.random.default_rng(seed)
    v_true = rng.standard_normal((n, rank))
    row_idx, col_idx = _matcomp_mask(n, block, density, rng)
    b = (v_true[row_idx] * v_true[col_idx]).sum(axis=1)
    if noise_snr is not None:
        b = add_noise_snr(b, noise_snr, rng)
    d = row_idx.size

    def matvec_i(k, u):
        u = np.asarray(u, dtype=float)
        w = np.zeros(u.shape[0])
        w[row_idx[k]] += 0.5 * u[col_idx[k]]
        w[col_idx[k]] += 0.5 * u[row_idx[k]]
        return w

    def gram(q):
        q = np.asarray(q, dtype=float)
        if q.ndim == 1:
            return q[row_idx] * q[col_idx]
        return (q[row_idx] * q[col_idx]).sum(axis=1)

    def adjoint_matvec(p, u):
        u = np.asarray(u, dtype=float)
        p = np.asarray(p, dtype=float)
        if u.ndim == 1:
            w = np.bincount(row_idx, weights=0.5 * p * u[col_idx], minlength=n)
            w += np.bincount(col_idx, weights=0.5 * p * u[row_idx], minlength=n)
            return w
        return np.stack(
            [adjoint_matvec(p, u[:, c]) for c in range(u.shape[1])], axis=1
        )

    def apply_dense(x_mat):
        return 0.5 * (x_mat[row_idx, col_idx] + x_mat[col_idx, row_idx])

    def adjoint_dense(p):
        mat = np.zeros((n, n))
        np.add.at(mat, (row_idx, col_idx), 0.5 * np.asarray(p, dtype=float))
        np.add.at(mat, (col_idx, row_idx), 0.5 * np.asarray(p, dtype=float))
        return mat

    op = MeasurementOperator(
        n=n,
        d=d,
        z=b.copy(),
        matvec_i=matvec_i,
        gram=gram,
        adjoint_matvec=adjoint_matvec,
        apply_dense=apply_dense,
        adjoint_dense=adjoint_dense,
    )
    fv = _scaled_sq_norm_program(d, 0.5)
    return MatrixCompletion(
        fv=fv,
        op=op,
        gamma=float(gamma),
        v_true=v_true,
        b=b,
        row_idx=row_idx,
        col_idx=col_idx,
        nuclear_radius=float(np.vdot(v_true, v_true)),
    )


# ---------------------------------------------------------------------------
# phase retrieval from signed cosine-transform magnitudes


def dct_measurement_apply(signs, v):
    """All m*n linear measurements of a vector at once, as an (m, n) array.

    Row j holds the orthonormal cosine transform of signs[j] * v, so the
    squared entries are the intensity measurements of v.
    """
    v = np.asarray(v, dtype=float)
    return dct(signs * v[None, :], axis=1, norm="ortho")


@dataclass
class PhaseRetrieval:
    fv: ConicProgram
    op: MeasurementOperator
    gamma: float
    x_true: np.ndarray
    b: np.ndarray
    signs: np.ndarray
    m_estimate: float
    nuclear_radius: float


def build_phase_retrieval(n=64, m=10, seed=0, noise_snr=None, gamma=5e-5,
                          signal=None):
    """Recover a signal from squared signed-DCT measurements, lifted to psd.

    Each of the m masks flips signs entrywise before an orthonormal cosine
    transform; only squared transform coefficients are observed. Lifting
    X = x x^T turns the intensities into linear measurements of X. Because
    each mask is orthogonal, the measurements of one mask sum to ||x||^2, so
    the mean of the observation vector over masks estimates the trace of the
    lifted solution; that estimate is what the pre-scheduled step rule uses.
    """
    rng = np.random.default_rng(seed)
    if signal is not None:
        x_true = np.asarray(signal, dtype=float).ravel()
        n = x_true.size
        nrm = float(np.linalg.norm(x_true))
        if nrm == 0.0:
            raise DegenerateSignal("signal has zero norm")
        x_true = x_true / nrm
    signs = (rng.integers(0, 2, size=(m, n)) * 2 - 1).astype(float)
    if signal is None:
        x_true = rng.standard_normal(n)
        x_true /= np.linalg.norm(x_true)
    amps = dct_measurement_apply(signs, x_true)
    b = (amps * amps).ravel()
    if noise_snr is not None:
        b = add_noise_snr(b, noise_snr, rng)
    d = m * n
    coeff = 1.0 / d

    def matvec_i(k, u):
        j, i = divmod(int(k), n)
        e = np.zeros(n)
        e[i] = 1.0
        a = signs[j] * idct(e, norm="ortho")
        return a * float(a @ np.asarray(u, dtype=float))

    def gram(q):
        q = np.asarray(q, dtype=float)
        if q.ndim == 1:
            a = dct_measurement_apply(signs, q)
            return (a * a).ravel()
        out = np.zeros(d)
        for c in range(q.shape[1]):
            a = dct_measurement_apply(signs, q[:, c])
            out += (a * a).ravel()
        return out

    def adjoint_matvec(p, u):
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        cols = u[:, None] if single else u
        pb = np.asarray(p, dtype=float).reshape(m, n)
        out = np.zeros_like(cols)
        for j in range(m):
            su = signs[j][:, None] * cols
            t = dct(su, axis=0, norm="ortho")
            t *= pb[j][:, None]
            out += signs[j][:, None] * idct(t, axis=0, norm="ortho")
        return out[:, 0] if single else out

    def apply_dense(x_mat):
        blocks = []
        for j in range(m):
            xs = x_mat * np.outer(signs[j], signs[j])
            t = dct(dct(xs, axis=0, norm="ortho"), axis=1, norm="ortho")
            blocks.append(np.diag(t).copy())
        return np.concatenate(blocks)

    def adjoint_dense(p):
        pb = np.asarray(p, dtype=float).reshape(m, n)
        mat = np.zeros((n, n))
        for j in range(m):
            core = idct(
                idct(np.diag(pb[j]), axis=0, norm="ortho"), axis=1, norm="ortho"
            )
            mat += np.outer(signs[j], signs[j]) * core
        return mat

    op = MeasurementOperator(
        n=n,
        d=d,
        z=b.copy(),
        matvec_i=matvec_i,
        gram=gram,
        adjoint_matvec=adjoint_matvec,
        apply_dense=apply_dense,
        adjoint_dense=adjoint_dense,
    )
    fv = _scaled_sq_norm_program(d, coeff)
    return PhaseRetrieval(
        fv=fv,
        op=op,
        gamma=float(gamma),
        x_true=x_true,
        b=b,
        signs=signs,
        m_estimate=float(b.sum() / m),
        nuclear_radius=float(np.vdot(x_true, x_true)),
    )


def recovery_error(x_hat, x_true):
    """Relative signal error up to global sign."""
    x_hat = np.asarray(x_hat, dtype=float).ravel()
    x_true = np.asarray(x_true, dtype=float).ravel()
    nrm = float(np.linalg.norm(x_true))
    if nrm == 0.0:
        raise DegenerateSignal("reference signal has zero norm")
    return (
        min(
            float(np.linalg.norm(x_hat - x_true)),
            float(np.linalg.norm(x_hat + x_true)),
        )
        / nrm
    )


# ---------------------------------------------------------------------------
# noise, images, instance containers


def add_noise_snr(clean, snr_db, rng):
    """Additive Gaussian noise scaled to hit the requested SNR exactly.

    The noise draw is rescaled after the fact so that
    ||noise|| / ||clean|| = 10 ** (-snr_db / 20) holds as written, rather
    than only in expectation. snr_db = inf returns an unchanged copy.
    """
    clean = np.asarray(clean, dtype=float)
    if np.isinf(snr_db):
        return clean.copy()
    nrm = float(np.linalg.norm(clean))
    if nrm == 0.0:
        raise DegenerateSignal("cannot scale noise against an all-zero signal")
    noise = rng.standard_normal(clean.shape)
    noise_nrm = float(np.linalg.norm(noise))
    scale = nrm / (noise_nrm * 10.0 ** (snr_db / 20.0))
    return clean + scale * noise


def _pgm_token(buf, pos):
    while pos < len(buf):
        c = buf[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < len(buf) and buf[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < len(buf) and not buf[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("truncated image header")
    return buf[start:pos], pos


def read_pgm(path):
    """Load an ASCII (P2) or binary (P5) graymap, scaled to [0, 1] floats."""
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, pos = _pgm_token(buf, 0)
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"not a graymap file (magic {magic!r})")
    width, pos = _pgm_token(buf, pos)
    height, pos = _pgm_token(buf, pos)
    maxval, pos = _pgm_token(buf, pos)
    width, height, maxval = int(width), int(height), int(maxval)
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise ValueError("bad graymap dimensions")
    count = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the payload
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        if len(buf) - pos < count * dtype.itemsize:
            raise ValueError("truncated image payload")
        arr = np.frombuffer(buf, dtype=dtype, count=count, offset=pos)
    else:
        fields = buf[pos:].split()
        if len(fields) < count:
            raise ValueError("truncated image payload")
        arr = np.array(fields[:count], dtype=float)
    return arr.reshape(height, width).astype(float) / maxval


_CONTAINER_MAGIC = b"CDKI"
_CONTAINER_VERSION = 1


def dump_instance(path, kind, arrays):
    """Write named arrays to a tagged binary container."""
    payload = io.BytesIO()
    np.savez(payload, **arrays)
    raw = payload.getvalue()
    kind_b = kind.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CONTAINER_MAGIC)
        fh.write(struct.pack("<HH", _CONTAINER_VERSION, len(kind_b)))
        fh.write(kind_b)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)


def load_instance(path):
    """Read back a container written by dump_instance: (kind, arrays)."""
    with open(path, "rb") as fh:
        if fh.read(4) != _CONTAINER_MAGIC:
            raise ValueError("not an instance container")
        version, kind_len = struct.unpack("<HH", fh.read(4))
        if version != _CONTAINER_VERSION:
            raise ValueError(f"unsupported container version {version}")
        kind = fh.read(kind_len).decode("utf-8")
        (nbytes,) = struct.unpack("<Q", fh.read(8))
        data = np.load(io.BytesIO(fh.read(nbytes)))
        return kind, {key: data[key] for key in data.files}
