"""Network-level composition of per-subsystem deviation certificates.

The per-subsystem gains are collected into a matrix ``Gamma`` (entry
``(i, j)``: summed mu coefficients of subsystem ``i`` over the scalar
channels it receives from ``j``) and a diagonal ``Lambda`` of decay
rates. When the spectral radius of ``Gamma Lambda^{-1}`` is below one, a
max-form deviation function for the whole network exists; its weights
come from a positive vector ``eta`` satisfying the strict small-gain
inequality ``(1 + eps) Gamma Lambda^{-1} eta < eta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .abstraction import AbstractionResult, ComparisonGains, QuadraticSimFn, eval_simfn
from .linalg import Matrix, NumericsError
from .systems import Interconnection

#: Perturbation added to a reducible gain matrix before extracting a
#: positive weight vector.
REDUCIBLE_SHIFT = 1e-9

#: Ceiling on the automatically chosen margin parameter epsilon.
EPSILON_CAP = 1e3

#: Fraction of the maximal feasible epsilon used by default.
EPSILON_SAFETY = 0.99

_POWER_TOL = 1e-13
_POWER_MAX_ITER = 10_000


class SmallGainError(NumericsError):
    """The network gain loop is too strong for composition."""

    def __init__(self, rho_spec: float, cycle: tuple[str, ...], cycle_gain: float):
        self.rho_spec = rho_spec
        self.cycle = cycle
        self.cycle_gain = cycle_gain
        loop = " -> ".join(cycle + cycle[:1]) if cycle else "(none)"
        super().__init__(
            f"small-gain test failed: spectral radius {rho_spec:.6g} >= 1; "
            f"dominant cycle {loop} with mean gain {cycle_gain:.6g}"
        )


@dataclass(frozen=True)
class GainMatrices:
    """Stacked comparison gains of an interconnection."""

    names: tuple[str, ...]
    gamma: Matrix
    lam: np.ndarray  # diagonal of Lambda
    rho: np.ndarray

    @property
    def scaled(self) -> Matrix:
        """``Gamma Lambda^{-1}`` (column scaling by decay rates)."""
        return self.gamma / self.lam[None, :]


@dataclass(frozen=True)
class OmegaPath:
    """Weight vector and margin certifying the small-gain condition.

    ``margin`` is the componentwise minimum of
    ``eta - (1 + epsilon) Gamma Lambda^{-1} eta``; positive when the
    strict inequality holds. ``validated`` records whether it does
    (user-supplied overrides may carry a negative margin and are kept
    with ``validated = False``).
    """

    eta: np.ndarray
    epsilon: float
    rho_spec: float
    margin: float
    validated: bool
    overridden: bool


@dataclass
class ComposedSimFn:
    """Max-form deviation function of the interconnection.

    ``V = max_i weights[i] * V_i`` with ``weights[i] = lam_i / eta_i``;
    decays at rate ``lam`` with abstract-input gain ``rho``.
    """

    names: tuple[str, ...]
    parts: tuple[QuadraticSimFn, ...]
    weights: np.ndarray
    lam: float
    rho: float

    def __call__(self, xhats, xs) -> float:
        values = [
            w * eval_simfn(fn, xh, x)
            for w, fn, xh, x in zip(self.weights, self.parts, xhats, xs)
        ]
        return float(max(values)) if values else 0.0


def gain_matrices(ic: Interconnection, gains: dict[str, ComparisonGains]) -> GainMatrices:
    """Assemble ``Gamma``, ``Lambda`` and the abstract-input gain vector.

    ``gains[name].mu`` must carry one coefficient per scalar column of
    the subsystem's internal input matrix, in declared channel order.
    """
    names = tuple(ic.names)
    n = len(names)
    gamma = np.zeros((n, n))
    lam = np.zeros(n)
    rho = np.zeros(n)
    for i, sub in enumerate(ic.subsystems):
        g = gains[sub.name]
        if len(g.mu) != sub.p:
            raise ValueError(
                f"{sub.name}: {len(g.mu)} mu coefficients for {sub.p} scalar channels"
            )
        if g.lam <= 0:
            raise ValueError(f"{sub.name}: decay rate must be positive, got {g.lam}")
        lam[i] = g.lam
        rho[i] = g.rho
        offset = 0
        for ch in sub.channels_in:
            j = ic.index(ch.source)
            gamma[i, j] += sum(g.mu[offset:offset + ch.width])
            offset += ch.width
    return GainMatrices(names=names, gamma=gamma, lam=lam, rho=rho)


def perron(mat) -> tuple[float, np.ndarray]:
    """Spectral radius and a nonnegative dominant vector of ``mat >= 0``.

    Power iteration on ``mat + I`` (the shift makes it converge for
    periodic structures too); falls back to a dense eigendecomposition
    when the iteration stalls. The vector is normalized to unit maximum.
    """
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    n = mat.shape[0]
    if mat.shape != (n, n):
        raise ValueError(f"need a square matrix, got {mat.shape}")
    if np.any(mat < 0):
        raise ValueError("gain matrix must be nonnegative")
    if n == 0:
        return 0.0, np.zeros(0)
    v = np.full(n, 1.0 / np.sqrt(n))
    theta = 1.0
    for _ in range(_POWER_MAX_ITER):
        w = mat @ v + v
        theta = float(np.linalg.norm(w))
        if theta == 0.0:
            return 0.0, np.full(n, 1.0)
        w /= theta
        if np.linalg.norm(mat @ w + w - theta * w) <= _POWER_TOL * max(1.0, theta):
            v = w
            break
        v = w
    else:
        # dense fallback; the dominant eigenvalue of a nonnegative matrix
        # is real, and some eigenvector for it can be taken sign-uniform
        vals, vecs = np.linalg.eig(mat)
        idx = int(np.argmax(vals.real))
        vec = vecs[:, idx].real
        if vec.sum() < 0:
            vec = -vec
        rho = max(float(vals[idx].real), 0.0)
        vec = np.abs(vec)
        return rho, vec / vec.max()
    rho = max(theta - 1.0, 0.0)
    peak = np.abs(v).max()
    return rho, np.abs(v) / peak if peak else np.full(n, 1.0)


def _dominant_cycle(scaled: Matrix, names: tuple[str, ...]):
    """Greedy max-weight walk from the heaviest edge until a node
    repeats; returns the cycle and its geometric-mean gain. A bounded
    diagnostic witness, not an exact maximum-cycle search."""
    n = scaled.shape[0]
    if n == 0 or not np.any(scaled > 0):
        return (), 0.0
    r, c = np.unravel_index(int(np.argmax(scaled)), scaled.shape)
    node = int(c)
    walk = [node]
    seen = {node: 0}
    for _ in range(n + 1):
        col = scaled[:, node]
        nxt = int(np.argmax(col))
        if col[nxt] <= 0.0:
            break  # sink: the walk cannot close
        if nxt in seen:
            cycle = walk[seen[nxt]:]
            edges = [scaled[cycle[(k + 1) % len(cycle)], cycle[k]] for k in range(len(cycle))]
            gain = float(np.prod(edges) ** (1.0 / len(edges)))
            return tuple(names[k] for k in cycle), gain
        seen[nxt] = len(walk)
        walk.append(nxt)
        node = nxt
    return (names[int(c)], names[int(r)]), float(scaled[r, c])


def small_gain(
    gm: GainMatrices,
    eta: np.ndarray | None = None,
    epsilon: float | None = None,
) -> OmegaPath:
    """Find a weight vector certifying the network small-gain condition.

    Default path: take the dominant vector of ``Gamma Lambda^{-1}``
    (perturbed by a tiny uniform shift when it is not strictly
    positive), normalize it so the max-form deviation function bounds
    the stacked output mismatch with unit coefficient, and pick
    ``epsilon`` just inside the feasible interval.

    ``eta``/``epsilon`` overrides are accepted verbatim; the strict
    inequality is then only reported, not enforced.

    Raises
    ------
    SmallGainError
        If no overrides are given and the spectral radius is >= 1.
    """
    scaled = gm.scaled
    n = scaled.shape[0]
    rho_spec, vec = perron(scaled)
    overridden = eta is not None or epsilon is not None
    if not overridden and rho_spec >= 1.0:
        cycle, gain = _dominant_cycle(scaled, gm.names)
        raise SmallGainError(rho_spec, cycle, gain)

    if eta is None:
        if n and vec.min() <= 1e-12 * max(vec.max(), 1.0):
            # reducible network: perturb to make the dominant vector positive
            _, vec = perron(scaled + REDUCIBLE_SHIFT * np.ones((n, n)))
        eta_vec = vec.copy()
        # normalize so that sqrt(N) * max_i eta_i / lam_i == 1; the
        # composed function then bounds the stacked output mismatch
        # directly, without an extra comparison factor
        if n:
            eta_vec /= np.sqrt(n) * float(np.max(eta_vec / gm.lam))
    else:
        eta_vec = np.asarray(eta, dtype=float).copy()
        if eta_vec.shape != (n,):
            raise ValueError(f"eta must have {n} entries, got shape {eta_vec.shape}")
        if np.any(eta_vec <= 0):
            raise ValueError("eta must be strictly positive")

    if epsilon is None:
        eps = EPSILON_CAP if rho_spec <= 0 else min(
            EPSILON_SAFETY * (1.0 / rho_spec - 1.0), EPSILON_CAP
        )
    else:
        eps = float(epsilon)
        if eps <= 0:
            raise ValueError(f"epsilon must be positive, got {eps}")

    def path_margin(e: float) -> float:
        if n == 0:
            return np.inf
        return float(np.min(eta_vec - (1.0 + e) * scaled @ eta_vec))

    margin = path_margin(eps)
    if not overridden and margin <= 0.0:
        # the cap (or the perturbed weight vector) can overshoot the
        # feasible interval for extreme gain matrices; back off
        for _ in range(80):
            eps *= 0.5
            margin = path_margin(eps)
            if margin > 0.0:
                break
        else:
            cycle, gain = _dominant_cycle(scaled, gm.names)
            raise SmallGainError(rho_spec, cycle, gain)
    return OmegaPath(
        eta=eta_vec,
        epsilon=eps,
        rho_spec=float(rho_spec),
        margin=margin,
        validated=margin > 0.0,
        overridden=overridden,
    )


def compose_simfn(
    simfns: dict[str, QuadraticSimFn],
    gm: GainMatrices,
    path: OmegaPath,
) -> ComposedSimFn:
    """Assemble the max-form network deviation function.

    Decay rate ``min_i lam_i * eps / (1 + eps)`` and abstract-input gain
    ``max_i rho_i * lam_i / eta_i`` (identity comparison functions
    throughout).
    """
    weights = gm.lam / path.eta
    lam_c = float(np.min(gm.lam) * path.epsilon / (1.0 + path.epsilon))
    rho_c = float(np.max(gm.rho * weights)) if len(gm.names) else 0.0
    parts = tuple(simfns[name] for name in gm.names)
    return ComposedSimFn(
        names=gm.names,
        parts=parts,
        weights=weights,
        lam=lam_c,
        rho=rho_c,
    )


def compose_abstractions(
    ic: Interconnection,
    results: dict[str, AbstractionResult],
) -> Interconnection:
    """Interconnection of the abstract twins, wired like the original.

    The abstract internal outputs are the originals pushed through each
    injection, so channel widths are preserved and validation holds by
    construction.
    """
    missing = [name for name in ic.names if name not in results]
    if missing:
        raise ValueError(f"missing abstractions for {missing}")
    return Interconnection([results[name].system for name in ic.names])
