"""Problem data model, synthetic benchmark generation, Big-M calibration, file I/O.

The target problem is least squares with an exact sparsity penalty,

    min_x  0.5 * ||y - A x||^2 + lam * nnz(x),

optionally restricted to a componentwise box ``l <= x <= u`` with
``l <= 0 <= u`` (the Big-M constraint generalized to per-coordinate
intervals).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]

__all__ = [
    "ProblemInstance",
    "BoxBounds",
    "GroundTruth",
    "ExperimentConfig",
    "InstanceFormatError",
    "CalibrationError",
    "generate_dictionary",
    "generate_ground_truth",
    "generate_observation",
    "objective_P",
    "lambda_max",
    "lambda_grid",
    "calibrate_bigM",
    "save_instance",
    "load_instance",
]


class InstanceFormatError(ValueError):
    """Raised when an instance file is malformed; message names the bad line."""


class CalibrationError(RuntimeError):
    """Raised when Big-M calibration exhausts its growth budget."""


@dataclass(frozen=True)
class ProblemInstance:
    """Observation ``y`` (length m), dictionary ``A`` (m x n), penalty weight ``lam > 0``.

    Arrays are copied to float64; ``A`` is stored Fortran-ordered so that
    column access inside the sweep kernels is contiguous.
    """

    y: Array
    A: Array
    lam: float

    def __post_init__(self) -> None:
        A = np.asfortranarray(self.A, dtype=np.float64)
        if A.ndim != 2:
            raise ValueError("A must be a 2-D matrix")
        m, n = A.shape
        if m < 1 or n < 1:
            raise ValueError("A must have at least one row and one column")
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.float64).ravel())
        if y.shape[0] != m:
            raise ValueError(f"y has length {y.shape[0]}, expected {m}")
        if not np.all(np.isfinite(y)):
            raise ValueError("y must be finite")
        if not np.all(np.isfinite(A)):
            raise ValueError("A must be finite")
        lam = float(self.lam)
        if not math.isfinite(lam) or lam <= 0.0:
            raise ValueError("lam must be a positive finite real")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "lam", lam)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @cached_property
    def col_sq(self) -> Array:
        """Squared euclidean norm of every column of A."""
        s = np.einsum("ij,ij->j", self.A, self.A)
        s.setflags(write=False)
        return s

    @cached_property
    def half_y_sq(self) -> float:
        """0.5 * ||y||^2, the objective of the all-zero vector."""
        return 0.5 * float(self.y @ self.y)


@dataclass
class BoxBounds:
    """Componentwise interval [l, u] with l <= 0 <= u, so 0 is always feasible.

    Mutable by design: peeling shrinks the arrays in place during a solve.
    """

    l: Array
    u: Array

    def __post_init__(self) -> None:
        self.l = np.ascontiguousarray(np.asarray(self.l, dtype=np.float64).ravel())
        self.u = np.ascontiguousarray(np.asarray(self.u, dtype=np.float64).ravel())
        if self.l.shape != self.u.shape:
            raise ValueError("l and u must have the same length")
        if not (np.all(self.l <= 0.0) and np.all(self.u >= 0.0)):
            raise ValueError("bounds must satisfy l <= 0 <= u componentwise")

    @classmethod
    def symmetric(cls, M: float, n: int) -> "BoxBounds":
        """The Big-M box [-M, M]^n."""
        if M < 0:
            raise ValueError("M must be nonnegative")
        return cls(np.full(n, -float(M)), np.full(n, float(M)))

    @property
    def n(self) -> int:
        return self.l.shape[0]

    @staticmethod
    def _wrap(l: Array, u: Array) -> "BoxBounds":
        # internal fast path: adopt arrays already known to satisfy the invariants
        box = object.__new__(BoxBounds)
        box.l = l
        box.u = u
        return box

    def copy(self) -> "BoxBounds":
        return BoxBounds._wrap(self.l.copy(), self.u.copy())

    def contains(self, other: "BoxBounds") -> bool:
        """Componentwise [other.l, other.u] subset of [self.l, self.u]."""
        return bool(np.all(other.l >= self.l) and np.all(other.u <= self.u))


@dataclass(frozen=True)
class GroundTruth:
    """Planted sparse signal behind a synthetic instance.

    ``snr_db`` is nan until an observation has been generated for this truth.
    """

    x_dagger: Array
    support: tuple[int, ...]
    sigma: float
    snr_db: float = math.nan

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(np.asarray(self.x_dagger, dtype=np.float64).ravel())
        object.__setattr__(self, "x_dagger", x)
        object.__setattr__(self, "support", tuple(int(i) for i in self.support))
        if set(np.flatnonzero(x)) - set(self.support):
            raise ValueError("x_dagger has nonzeros off the declared support")

    @property
    def k(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class ExperimentConfig:
    """One synthetic-benchmark point: data dimensions, noise, box slack, solver flags.

    ``lam`` fixes the penalty weight directly; when it is None the weight is
    ``lam_factor * lambda_max(instance)``, a per-instance relative calibration
    (the single-coordinate activation threshold scales the grid).
    """

    m: int = 30
    n: int = 40
    k: int = 3
    rho: float = 0.1
    snr_db: float = 15.0
    sigma: float = 1.0
    gamma: float = 3.0
    seed: int = 0
    lam: Optional[float] = None
    lam_factor: float = 0.3
    peel: bool = True
    cd_tol: float = 1e-8
    eps_prune: float = 1e-10
    eps_alpha: float = 1e-16
    max_nodes: Optional[int] = None
    time_limit: Optional[float] = None

    def __post_init__(self) -> None:
        if not (1 <= self.k <= self.n):
            raise ValueError("need 1 <= k <= n")
        if self.gamma < 1.0:
            raise ValueError("gamma must be >= 1")
        if not (0.0 <= self.rho < 1.0):
            raise ValueError("rho must lie in [0, 1)")


def generate_dictionary(m: int, n: int, rho: float, rng: np.random.Generator) -> Array:
    """Draw an m x n dictionary whose rows are i.i.d. N(0, K), K_ij = rho^|i-j|.

    Realized as Z @ L.T with Z i.i.d. standard normal and L the lower
    Cholesky factor of K (K is positive definite for rho in [0, 1)).
    """
    if not (0.0 <= rho < 1.0):
        raise ValueError("rho must lie in [0, 1)")
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    lags = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    K = np.power(float(rho), lags)
    L = np.linalg.cholesky(K)
    Z = rng.standard_normal((m, n))
    return np.asfortranarray(Z @ L.T)


def generate_ground_truth(n: int, k: int, sigma: float, rng: np.random.Generator) -> GroundTruth:
    """Plant a k-sparse vector with evenly spaced support.

    Support indices are t * floor(n/k) for t = 0..k-1; each nonzero is
    sign(r) + r with r ~ N(0, sigma^2) and the convention sign(0) = +1, so
    every nonzero has magnitude >= 1.
    """
    if not (1 <= k <= n):
        raise ValueError("need 1 <= k <= n")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    idx = np.arange(k) * (n // k)
    r = rng.normal(0.0, sigma, size=k) if sigma > 0 else np.zeros(k)
    vals = np.where(r >= 0.0, 1.0, -1.0) + r
    x = np.zeros(n)
    x[idx] = vals
    return GroundTruth(x, tuple(int(i) for i in idx), float(sigma))


def generate_observation(
    A: Array, x_dagger: Array, snr_db: float, rng: np.random.Generator
) -> Array:
    """Observation y = A x_dagger + noise with the *realized* SNR pinned exactly.

    The noise draw is rescaled so 10*log10(||A x||^2 / ||eps||^2) equals
    ``snr_db`` for this draw, not merely in expectation.  ``snr_db = inf``
    (or None) gives the noiseless y = A x_dagger.
    """
    signal = np.asarray(A, dtype=np.float64) @ np.asarray(x_dagger, dtype=np.float64)
    if snr_db is None or math.isinf(snr_db):
        return signal
    p = float(np.linalg.norm(signal))
    if p == 0.0:
        raise ValueError("A @ x_dagger is zero: finite SNR is undefined")
    eps = rng.standard_normal(signal.shape[0])
    ne = float(np.linalg.norm(eps))
    if ne == 0.0:
        raise ValueError("degenerate zero noise draw")
    eps *= p / (ne * 10.0 ** (snr_db / 20.0))
    return signal + eps


def objective_P(x: Array, inst: ProblemInstance) -> float:
    """0.5 * ||y - A x||^2 + lam * nnz(x), with an exact zero test for the count."""
    x = np.asarray(x, dtype=np.float64)
    r = inst.y - inst.A @ x
    return 0.5 * float(r @ r) + inst.lam * int(np.count_nonzero(x))


def lambda_max(inst_or_yA, A: Optional[Array] = None) -> float:
    """Smallest weight at which no single coordinate can improve on x = 0.

    For a lone column a_j the best objective gain is (a_j^T y)^2 / (2 ||a_j||^2);
    the max of that over j is the natural top of a penalty grid.
    """
    if A is None:
        y, A = inst_or_yA.y, inst_or_yA.A
    else:
        y = np.asarray(inst_or_yA, dtype=np.float64)
        A = np.asarray(A, dtype=np.float64)
    s = np.einsum("ij,ij->j", A, A)
    c = A.T @ y
    ok = s > 0
    if not np.any(ok):
        return 0.0
    return float(np.max(c[ok] ** 2 / (2.0 * s[ok])))


def lambda_grid(inst: ProblemInstance, num: int = 20, lo: float = 1e-3, hi: float = 1.0) -> Array:
    """Log-spaced penalty weights between ``lo`` and ``hi`` fractions of lambda_max."""
    top = lambda_max(inst)
    if top <= 0:
        raise ValueError("lambda_max is zero (A^T y = 0); no meaningful grid")
    return np.geomspace(lo * top, hi * top, num)


def calibrate_bigM(
    inst: ProblemInstance,
    gamma: float,
    eta: float,
    M0: float,
    solver: Callable[[ProblemInstance, BoxBounds], Array],
    max_growth: int = 100,
) -> tuple[float, Array]:
    """Grow the symmetric box until the boxed optimum is strictly interior.

    Solves the penalized problem under [-M, M] for M = M0, eta*M0, ... and
    stops at the first M with ||x*||_inf < M strictly; returns
    (gamma * ||x*||_inf, x*).  A zero optimum yields M = 0 (the degenerate
    all-zero box: every coordinate fixed to 0).
    """
    if gamma < 1.0:
        raise ValueError("gamma must be >= 1")
    if eta <= 1.0:
        raise ValueError("eta must be > 1")
    if M0 <= 0.0:
        raise ValueError("M0 must be positive")
    M = float(M0)
    for _ in range(max_growth):
        x_star = np.asarray(solver(inst, BoxBounds.symmetric(M, inst.n)), dtype=np.float64)
        x_inf = float(np.max(np.abs(x_star))) if x_star.size else 0.0
        if x_inf < M:
            return gamma * x_inf, x_star
        M *= eta
    raise CalibrationError(
        f"no strictly interior solution after {max_growth} growth steps (last M = {M / eta:g}, "
        f"||x||_inf = {x_inf:g})"
    )


def _fmt(v: float) -> str:
    # repr of a python float is the shortest decimal that round-trips exactly
    return repr(float(v))


def save_instance(path, inst: ProblemInstance, truth: Optional[GroundTruth] = None) -> None:
    """Write the documented single-file text format (optionally with the planted truth).

    Layout: header ``m n lambda``, then m lines of y, then m rows of A
    (n whitespace-separated entries each).  When a truth is given, a line
    ``truth k sigma snr_db`` follows, then k lines ``index value``.
    """
    lines = [f"{inst.m} {inst.n} {_fmt(inst.lam)}"]
    lines.extend(_fmt(v) for v in inst.y)
    lines.extend(" ".join(_fmt(v) for v in row) for row in inst.A)
    if truth is not None:
        if truth.x_dagger.shape[0] != inst.n:
            raise ValueError("ground truth length does not match instance")
        lines.append(f"truth {truth.k} {_fmt(truth.sigma)} {_fmt(truth.snr_db)}")
        lines.extend(f"{j} {_fmt(truth.x_dagger[j])}" for j in truth.support)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path) -> tuple[ProblemInstance, Optional[GroundTruth]]:
    """Parse a file written by :func:`save_instance`; errors name the offending line."""
    with open(path) as fh:
        lines = fh.read().splitlines()

    def fail(lineno: int, msg: str):
        raise InstanceFormatError(f"{path}: line {lineno}: {msg}")

    if not lines:
        raise InstanceFormatError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 3:
        fail(1, f"expected header 'm n lambda', got {lines[0]!r}")
    try:
        m, n, lam = int(head[0]), int(head[1]), float(head[2])
    except ValueError:
        fail(1, f"cannot parse header {lines[0]!r}")
    if len(lines) < 1 + m + m:
        fail(len(lines), f"file truncated: need {1 + 2 * m} lines for header, y and A")
    y = np.empty(m)
    for i in range(m):
        try:
            y[i] = float(lines[1 + i])
        except ValueError:
            fail(2 + i, f"cannot parse y entry {lines[1 + i]!r}")
    A = np.empty((m, n))
    for i in range(m):
        parts = lines[1 + m + i].split()
        if len(parts) != n:
            fail(2 + m + i, f"expected {n} entries in A row, got {len(parts)}")
        try:
            A[i] = [float(p) for p in parts]
        except ValueError:
            fail(2 + m + i, "cannot parse A row")
    try:
        inst = ProblemInstance(y, A, lam)
    except ValueError as exc:
        raise InstanceFormatError(f"{path}: invalid instance: {exc}") from exc

    truth = None
    rest = [(i, ln) for i, ln in enumerate(lines[1 + 2 * m :], start=2 + 2 * m) if ln.strip()]
    if rest:
        lineno, ln = rest[0]
        parts = ln.split()
        if len(parts) != 4 or parts[0] != "truth":
            fail(lineno, f"expected 'truth k sigma snr_db', got {ln!r}")
        try:
            k, sigma, snr_db = int(parts[1]), float(parts[2]), float(parts[3])
        except ValueError:
            fail(lineno, f"cannot parse truth header {ln!r}")
        if len(rest) != 1 + k:
            fail(lineno, f"expected {k} support lines after the truth header")
        x = np.zeros(n)
        support = []
        for lineno2, ln2 in rest[1:]:
            parts2 = ln2.split()
            try:
                j, v = int(parts2[0]), float(parts2[1])
            except (ValueError, IndexError):
                fail(lineno2, f"cannot parse support line {ln2!r}")
            if not (0 <= j < n):
                fail(lineno2, f"support index {j} out of range")
            x[j] = v
            support.append(j)
        truth = GroundTruth(x, tuple(support), sigma, snr_db)
    return inst, truth


def with_snr(truth: GroundTruth, snr_db: float) -> GroundTruth:
    """Copy of ``truth`` recording the SNR its observation was generated at."""
    return replace(truth, snr_db=float(snr_db))
