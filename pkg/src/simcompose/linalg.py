"""Dense linear-algebra helpers used throughout the package.

Everything operates on plain ``numpy`` arrays in double precision. The
routines here are small and deliberately explicit: spectra, Lyapunov
equations via Kronecker vectorization, a shifted-gramian stabilizing
feedback, PBH stabilizability tests, weighted spectral norms, and a
minimum-norm least-squares solver with a consistency flag.

Tolerances are relative. The module-wide coefficient (default ``1e-9``)
can be overridden through the ``SIMCOMPOSE_TOL`` environment variable,
which is read on every call so tests can monkeypatch it.
"""

from __future__ import annotations

import os

import numpy as np

Matrix = np.ndarray
SpdMatrix = np.ndarray

#: Environment variable overriding the relative rank/eigenvalue tolerance.
TOL_ENV_VAR = "SIMCOMPOSE_TOL"

#: Default relative tolerance coefficient for rank decisions.
DEFAULT_REL_TOL = 1e-9

#: Absolute ceiling on iterations of iterative routines in this module.
_MAX_POWER_ITERATIONS = 10_000


class NumericsError(RuntimeError):
    """A numerical routine could not certify its result.

    Raised for structurally sound inputs that fail a numerical
    requirement: a matrix that must be Hurwitz is not, a gramian that
    must be invertible is singular, a residual exceeds its bound.
    """


def rel_tol() -> float:
    """Relative tolerance coefficient, honoring ``SIMCOMPOSE_TOL``."""
    raw = os.environ.get(TOL_ENV_VAR)
    if raw is None:
        return DEFAULT_REL_TOL
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{TOL_ENV_VAR} must be a positive float, got {raw!r}") from None
    if value <= 0.0:
        raise ValueError(f"{TOL_ENV_VAR} must be a positive float, got {raw!r}")
    return value


def as_matrix(a, name: str = "matrix") -> Matrix:
    """Coerce to a 2-D float array; 1-D input becomes a column."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def spectral_norm(a) -> float:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def rank_tol(a) -> float:
    """Singular-value cutoff for rank decisions about ``a``.

    Scales with the larger dimension and the spectral norm; the norm
    factor is floored at 1 so zero and near-zero matrices still get a
    positive tolerance.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return rel_tol()
    return rel_tol() * max(a.shape) * max(1.0, spectral_norm(a))


def eigenvalues(a) -> np.ndarray:
    """Eigenvalues of a square matrix, sorted by (real, imag) for determinism."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"eigenvalues need a square matrix, got {a.shape}")
    if a.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    vals = np.linalg.eigvals(a)
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


def spectral_abscissa(a) -> float:
    """Largest real part over the spectrum (``-inf`` for a 0x0 matrix)."""
    vals = eigenvalues(a)
    if vals.size == 0:
        return -np.inf
    return float(vals.real.max())


def spectral_radius(a) -> float:
    vals = eigenvalues(a)
    if vals.size == 0:
        return 0.0
    return float(np.abs(vals).max())


def is_hurwitz(a) -> bool:
    return spectral_abscissa(a) < 0.0


def _symmetrize(m: Matrix) -> Matrix:
    return 0.5 * (m + m.T)


def solve_lyapunov(a, q) -> Matrix:
    """Solve ``A^T M + M A = -Q`` for symmetric ``M``.

    Uses Kronecker vectorization: the n^2 x n^2 linear system is solved
    densely, which is exact and perfectly adequate for the moderate state
    dimensions this package targets (tens of states, not thousands).

    Parameters
    ----------
    a : array, n x n, must be Hurwitz.
    q : array, n x n, symmetric.

    Raises
    ------
    NumericsError
        If ``a`` is not Hurwitz, or the residual check fails.
    """
    a = as_matrix(a, "a")
    q = as_matrix(q, "q")
    n = a.shape[0]
    if a.shape != (n, n) or q.shape != (n, n):
        raise ValueError(f"need square matrices of equal size, got {a.shape} and {q.shape}")
    if spectral_norm(q - q.T) > rank_tol(q):
        raise ValueError("q must be symmetric")
    abscissa = spectral_abscissa(a)
    if not abscissa < 0.0:
        worst = eigenvalues(a)[-1]
        raise NumericsError(
            f"Lyapunov equation requires a Hurwitz matrix; eigenvalue {worst} "
            f"has real part {worst.real:.6g} >= 0"
        )
    q = _symmetrize(q)
    eye = np.eye(n)
    # vec(A^T M) = (I (x) A^T) vec(M), vec(M A) = (A^T (x) I) vec(M),
    # with column-major vec.
    lhs = np.kron(eye, a.T) + np.kron(a.T, eye)
    m = np.linalg.solve(lhs, -q.ravel(order="F")).reshape((n, n), order="F")
    m = _symmetrize(m)
    residual = np.linalg.norm(a.T @ m + m @ a + q, "fro")
    bound = 1e-8 * (spectral_norm(a) * spectral_norm(m) + spectral_norm(q))
    if residual > max(bound, 1e-14):
        raise NumericsError(
            f"Lyapunov residual {residual:.3e} exceeds bound {bound:.3e}; "
            "the equation is too ill-conditioned for the dense solver"
        )
    return m


def pbh_stabilizable(a, b) -> tuple[bool, complex | None]:
    """PBH test: is the pair ``(a, b)`` stabilizable?

    Checks ``rank [a - s I, b] == n`` for every eigenvalue ``s`` of ``a``
    that lies in the closed right half plane (within tolerance of the
    imaginary axis counts, so marginally stable clusters are tested too).

    Returns
    -------
    (ok, witness)
        ``witness`` is an offending eigenvalue when ``ok`` is False.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"a must be square, got {a.shape}")
    if b.shape[0] != n:
        raise ValueError(f"b must have {n} rows, got {b.shape}")
    if n == 0:
        return True, None
    margin = rel_tol() * max(1.0, spectral_norm(a))
    for s in eigenvalues(a):
        if s.real < -margin:
            continue
        pencil = np.hstack([a - s * np.eye(n), b]).astype(complex)
        if np.linalg.matrix_rank(pencil, tol=rank_tol(np.hstack([a, b]))) < n:
            return False, complex(s)
    return True, None


def _left_invariant_block(acl: Matrix, lam: complex, u: np.ndarray):
    """Orthonormal left-invariant basis for one eigenvalue or pair.

    ``u`` is a (possibly complex) eigenvector of ``acl.T``. Returns
    ``(U, L)`` with ``U^T acl = L U^T``; ``L`` is 1 x 1 for a real
    eigenvalue and 2 x 2 for a conjugate pair.
    """
    if abs(lam.imag) <= 1e-10 * max(1.0, abs(lam)):
        # strip the arbitrary complex phase, the direction is real
        phase = u[np.argmax(np.abs(u))]
        real = (u * np.conj(phase / abs(phase))).real
        basis = real[:, np.newaxis] / np.linalg.norm(real)
    else:
        basis, _ = np.linalg.qr(np.column_stack([u.real, u.imag]))
    return basis, basis.T @ acl @ basis


def _place_block(block: Matrix, bu: Matrix) -> Matrix:
    """Feedback ``F`` moving the spectrum of ``block + bu F`` left of -1.

    One real eigenvalue gets a min-norm shift; a conjugate pair keeps
    its frequency and gets its real part reflected past -1, through an
    exact solve when ``bu`` has full row rank and a two-state polynomial
    placement when only one input direction is available.
    """
    if block.shape[0] == 1:
        lam = float(block[0, 0])
        shift = -1.0 - max(lam, 0.0) - lam
        row = bu[0]
        return (shift / float(row @ row)) * row[:, np.newaxis]
    sigma = 0.5 * float(np.trace(block))
    omega_sq = max(float(np.linalg.det(block)) - sigma * sigma, 0.0)
    target = -1.0 - max(sigma, 0.0)
    if np.linalg.matrix_rank(bu) == 2:
        omega = np.sqrt(omega_sq)
        desired = np.array([[target, omega], [-omega, target]])
        return np.linalg.pinv(bu) @ (desired - block)
    # single usable input direction: classical two-state placement on
    # the characteristic polynomial s^2 - 2 target s + (target^2 + omega^2)
    _, _, vt = np.linalg.svd(bu)
    g = vt[0]
    bv = bu @ g
    ctrb = np.column_stack([bv, block @ bv])
    poly = (
        block @ block
        - 2.0 * target * block
        + (target * target + omega_sq) * np.eye(2)
    )
    f_row = -np.linalg.solve(ctrb.T, np.array([0.0, 1.0])) @ poly
    return g[:, np.newaxis] * f_row[np.newaxis, :]


def stabilize(a, b) -> Matrix:
    """Return ``K`` such that ``a + b K`` is Hurwitz.

    Already-Hurwitz matrices get ``K = 0``. Otherwise unstable
    eigenvalues are moved one real eigenvalue or conjugate pair at a
    time: if ``U`` spans a left invariant subspace of the current closed
    loop (``U^T A = L U^T``), adding ``F U^T`` to the feedback changes
    only the spectrum of ``L + (U^T b) F`` and leaves every other
    eigenvalue where it was. Stable modes are never touched, each step
    is a one- or two-dimensional placement, and the gains stay moderate
    where a single gramian-based design would overdrive the weakly
    coupled directions.

    Raises
    ------
    NumericsError
        If the pair fails the PBH test (message names the witness
        eigenvalue), or the assignment loop fails a final Hurwitz
        verification because an unstable mode is too close to
        uncontrollable.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"a must be square, got {a.shape}")
    if b.shape[0] != n:
        raise ValueError(f"b must have {n} rows, got {b.shape}")
    m = b.shape[1]
    if is_hurwitz(a):
        return np.zeros((m, n))
    ok, witness = pbh_stabilizable(a, b)
    if not ok:
        raise NumericsError(
            f"pair is not stabilizable: eigenvalue {witness} cannot be moved by the input"
        )
    k = np.zeros((m, n))
    for _ in range(2 * n + 4):
        acl = a + b @ k
        if is_hurwitz(acl):
            return k
        vals, vecs = np.linalg.eig(acl.T)
        idx = int(np.argmax(vals.real))
        basis, block = _left_invariant_block(acl, vals[idx], vecs[:, idx])
        k = k + _place_block(block, basis.T @ b) @ basis.T
    raise NumericsError(
        "eigenvalue assignment did not converge; an unstable mode is "
        "too close to uncontrollable"
    )


def check_spd(m, name: str = "matrix") -> Matrix:
    """Validate symmetry and positive semidefiniteness, return symmetrized copy."""
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got {m.shape}")
    if spectral_norm(m - m.T) > rank_tol(m):
        raise ValueError(f"{name} must be symmetric")
    m = _symmetrize(m)
    if m.shape[0]:
        w = np.linalg.eigvalsh(m)
        if w[0] < -rank_tol(m) * max(1.0, abs(w[-1])):
            raise NumericsError(f"{name} is not positive semidefinite (eigenvalue {w[0]:.3e})")
    return m


def sqrtm_spd(m) -> Matrix:
    """Symmetric square root of a positive semidefinite matrix.

    Computed from the eigendecomposition; eigenvalues below the noise
    floor are clipped to zero.
    """
    m = check_spd(m)
    if m.shape[0] == 0:
        return m
    w, u = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return u @ np.diag(np.sqrt(w)) @ u.T


def weighted_norm(m, x) -> float:
    """Spectral norm of ``sqrt(m) @ x`` for positive semidefinite ``m``.

    With a single column this is the weighted Euclidean length
    ``sqrt(x^T m x)``.
    """
    x = np.asarray(x, dtype=float)
    root = sqrtm_spd(m)
    if x.ndim == 1:
        x = x[:, None]
    return spectral_norm(root @ x)


def least_squares(a, b) -> tuple[Matrix, float, bool]:
    """Minimum-norm least-squares solution of ``a @ x = b``.

    Rank-revealing (SVD-backed); among all residual minimizers the
    Frobenius-minimal ``x`` is returned.

    Returns
    -------
    (x, residual, consistent)
        ``residual`` is the Frobenius norm of ``a @ x - b``;
        ``consistent`` flags residuals at noise level relative to ``b``.
    """
    a = as_matrix(a, "a")
    b_arr = np.asarray(b, dtype=float)
    squeeze = b_arr.ndim == 1
    b2 = as_matrix(b_arr, "b")
    if b2.shape[0] != a.shape[0]:
        raise ValueError(f"a has {a.shape[0]} rows but b has {b2.shape[0]}")
    cutoff = rel_tol() * max(a.shape) if a.size else None
    x, *_ = np.linalg.lstsq(a, b2, rcond=cutoff)
    residual = float(np.linalg.norm(a @ x - b2, "fro"))
    consistent = residual <= rel_tol() * float(np.linalg.norm(b2, "fro"))
    if squeeze:
        return x[:, 0], residual, consistent
    return x, residual, consistent
