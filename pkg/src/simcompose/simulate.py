"""Fixed-step trajectory integration and error-bound evaluation.

Abstract and concrete interconnections are co-integrated as one joint
linear system: the abstract network runs open loop on the supplied
input, and every concrete subsystem is driven through its interface,
so the deviation functions can be sampled along the pair of
trajectories and compared with the scalar and vector bounds.
"""

from dataclasses import dataclass

import numpy as np

from .abstraction import AbstractionResult
from .compose import ComposedSimFn, GainMatrices, compose_abstractions, perron
from .linalg import Matrix, NumericsError, as_matrix
from .systems import (
    Interconnection,
    LinearSystem,
    MonolithicSystem,
    build_monolithic,
    internal_input_matrix,
)

# Tolerance for flagging a sampled bound violation.  Discretisation and
# rounding keep honest margins far above this.
BOUND_TOL = 1e-6

# Default iteration count for the vector recursion.
DEFAULT_BOUND_ITERATIONS = 50


@dataclass(frozen=True)
class Signal:
    """Piecewise-constant signal, zero before the first sample time.

    Parameters
    ----------
    times : (k,) ndarray
        Strictly increasing sample times.
    values : (k, width) ndarray
        Value held on ``[times[i], times[i + 1])``.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, np.newaxis]
        if times.ndim != 1 or values.ndim != 2 or len(times) != len(values):
            raise ValueError("signal needs one value row per sample time")
        if len(times) == 0:
            raise ValueError("signal needs at least one sample")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if not (np.isfinite(times).all() and np.isfinite(values).all()):
            raise ValueError("signal samples must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def sup_norm(self) -> float:
        """Largest euclidean norm over the sample values."""
        if self.width == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.values, axis=1)))

    def value(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        if idx < 0:
            return np.zeros(self.width)
        return self.values[idx]

    def sample(self, grid) -> np.ndarray:
        """Evaluate on a whole time grid at once."""
        grid = np.asarray(grid, dtype=float)
        idx = np.searchsorted(self.times, grid, side="right") - 1
        out = self.values[np.maximum(idx, 0)]
        out[idx < 0] = 0.0
        return out

    @classmethod
    def zero(cls, width: int) -> "Signal":
        return cls(np.zeros(1), np.zeros((1, width)))

    @classmethod
    def constant(cls, value) -> "Signal":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.zeros(1), value[np.newaxis, :])

    @classmethod
    def square(cls, amplitude, period: float, t_final: float) -> "Signal":
        """Square wave alternating between ``+amplitude`` and ``-amplitude``.

        Switches every half ``period``, starting positive at ``t = 0``.
        """
        if period <= 0:
            raise ValueError(f"period must be positive, got {period}")
        amplitude = np.atleast_1d(np.asarray(amplitude, dtype=float))
        times = np.arange(0.0, max(t_final, period / 2.0), period / 2.0)
        signs = np.where(np.arange(len(times)) % 2 == 0, 1.0, -1.0)
        return cls(times, signs[:, np.newaxis] * amplitude[np.newaxis, :])

    @classmethod
    def stack(cls, signals) -> "Signal":
        """Stack several signals into one over the union of sample times."""
        signals = list(signals)
        if not signals:
            raise ValueError("nothing to stack")
        times = np.unique(np.concatenate([s.times for s in signals]))
        return cls(times, np.hstack([s.sample(times) for s in signals]))


@dataclass(frozen=True)
class Trajectory:
    """States and outputs sampled on a uniform time grid."""

    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.states) == len(self.outputs)):
            raise ValueError("trajectory arrays must share a length")
        steps = np.diff(self.times)
        if len(steps) and not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("time grid must be uniform")


def time_grid(t_final: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError(f"step size must be positive, got {dt}")
    if t_final < 0:
        raise ValueError(f"horizon must be nonnegative, got {t_final}")
    return np.arange(int(round(t_final / dt)) + 1) * dt


def _step_maps(a: Matrix, dt: float) -> tuple[Matrix, Matrix]:
    """One-step state map and input integral of classical fourth order.

    For constant input over the step the update ``x+ = phi @ x +
    core @ (B u)`` reproduces the Runge-Kutta stages exactly, so the
    whole run reduces to one matrix recursion.
    """
    eye = np.eye(a.shape[0])
    ad = dt * a
    ad2 = ad @ ad
    ad3 = ad2 @ ad
    phi = eye + ad + ad2 / 2.0 + ad3 / 6.0 + ad3 @ ad / 24.0
    core = dt * (eye + ad / 2.0 + ad2 / 6.0 + ad3 / 24.0)
    return phi, core


def _run_lti(a: Matrix, drive: np.ndarray, x0: np.ndarray, grid: np.ndarray, dt: float) -> np.ndarray:
    """March ``x+ = phi x + drive[k]`` over the grid, watching for blow-up."""
    phi, _ = _step_maps(a, dt)
    states = np.empty((len(grid), len(x0)))
    x = x0
    # overflow is handled by the explicit finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(len(grid) - 1):
            states[k] = x
            x = phi @ x + drive[k]
            if not np.isfinite(x).all():
                raise NumericsError(
                    f"state diverged to non-finite values at t = {grid[k + 1]:.6g}"
                )
    states[-1] = x
    return states


def integrate(sys, x0, u: Signal | None = None, w: Signal | None = None,
              t_final: float = 1.0, dt: float = 1e-3) -> Trajectory:
    """Integrate a linear system under piecewise-constant inputs.

    Classical fourth-order steps with the inputs held over each step.
    ``sys`` is a :class:`LinearSystem` (external input ``u``, internal
    input ``w``) or a :class:`MonolithicSystem` (``u`` only; couplings
    are already folded into the state matrix).

    Returns
    -------
    Trajectory
        States and external outputs on the uniform grid.
    """
    if isinstance(sys, MonolithicSystem):
        a, b, c, d = sys.A, sys.B, sys.C, None
        if w is not None:
            raise ValueError(
                "monolithic systems fold internal inputs into A; pass only u"
            )
    elif isinstance(sys, LinearSystem):
        a, b, c, d = sys.A, sys.B, sys.C_ext, sys.D
    else:
        raise TypeError(f"cannot integrate {type(sys).__name__}")
    n = a.shape[0]
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if len(x0) != n:
        raise ValueError(f"initial state has length {len(x0)}, expected {n}")
    grid = time_grid(t_final, dt)
    _, core = _step_maps(a, dt)
    drive = np.zeros((len(grid), n))
    for mat, sig in ((b, u), (d, w)):
        if mat is None or mat.shape[1] == 0:
            continue
        if sig is None:
            sig = Signal.zero(mat.shape[1])
        if sig.width != mat.shape[1]:
            raise ValueError(
                f"signal width {sig.width} does not match input width {mat.shape[1]}"
            )
        drive += sig.sample(grid) @ (core @ mat).T
    states = _run_lti(a, drive, x0, grid, dt)
    return Trajectory(grid, states, states @ c.T)


@dataclass(frozen=True)
class RefinementRun:
    """Paired abstract/concrete trajectories with sampled deviations.

    ``v`` holds one column per subsystem; ``v_composed`` is the
    max-form composition and ``mismatch`` the euclidean norm of the
    stacked external output error.
    """

    names: tuple[str, ...]
    abstract: Trajectory
    concrete: Trajectory
    v: np.ndarray
    v_composed: np.ndarray
    mismatch: np.ndarray
    input_offsets: tuple[int, ...]

    @property
    def times(self) -> np.ndarray:
        return self.concrete.times


def _block_diag(blocks) -> Matrix:
    blocks = [as_matrix(b) for b in blocks]
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def refine_and_run(
    concrete: Interconnection,
    abstractions: dict[str, AbstractionResult],
    composed: ComposedSimFn,
    x0,
    xhat0,
    uhat: Signal,
    t_final: float = 20.0,
    dt: float = 1e-3,
) -> RefinementRun:
    """Run the abstract network and its interface-refined concrete twin.

    The abstract interconnection is driven by ``uhat``; every concrete
    input is produced by the interface from the local pair of states,
    the abstract internal signals and the matching slice of ``uhat``.
    Both networks are advanced together as a single joint linear
    system, which keeps the refinement exactly synchronous.

    Parameters
    ----------
    concrete : Interconnection
        The original coupled subsystems.
    abstractions : dict
        Abstraction per subsystem name, as built by
        :func:`~simcompose.abstraction.build_abstraction`.
    composed : ComposedSimFn
        Composition whose weights score the sampled deviations.
    x0, xhat0 : array_like
        Stacked concrete and abstract initial states, in subsystem
        order.
    uhat : Signal
        Stacked abstract input.

    Returns
    -------
    RefinementRun
    """
    abstract_ic = compose_abstractions(concrete, abstractions)
    mono_c = build_monolithic(concrete)
    mono_a = build_monolithic(abstract_ic)
    if tuple(composed.names) != mono_c.names:
        raise ValueError("composition and interconnection name orders differ")
    order = [abstractions[name] for name in mono_c.names]

    p_bd = _block_diag([r.simfn.P for r in order])
    k1_bd = _block_diag([r.simfn.K1 for r in order])
    k2_bd = _block_diag([r.simfn.K2 for r in order])
    k3_bd = _block_diag([r.simfn.K3 for r in order])
    k4_bd = _block_diag([r.simfn.K4 for r in order])
    what_map = np.vstack(
        [internal_input_matrix(abstract_ic, r.system) for r in order]
    )

    n_hat = mono_a.A.shape[0]
    n = mono_c.A.shape[0]
    b_bd = mono_c.B
    # u = K1 (x - P xhat) - K2 xhat - K3 what + K4 uhat, with what read
    # off the abstract states, makes the joint system block triangular.
    gain_to_abstract = -(k1_bd @ p_bd) - k2_bd - k3_bd @ what_map
    a_joint = np.zeros((n_hat + n, n_hat + n))
    a_joint[:n_hat, :n_hat] = mono_a.A
    a_joint[n_hat:, :n_hat] = b_bd @ gain_to_abstract
    a_joint[n_hat:, n_hat:] = mono_c.A + b_bd @ k1_bd
    b_joint = np.vstack([mono_a.B, b_bd @ k4_bd])

    if uhat.width != b_joint.shape[1]:
        raise ValueError(
            f"abstract input width {uhat.width}, expected {b_joint.shape[1]}"
        )
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xhat0 = np.asarray(xhat0, dtype=float).reshape(-1)
    if len(x0) != n or len(xhat0) != n_hat:
        raise ValueError(
            f"initial states have lengths {len(xhat0)}/{len(x0)}, "
            f"expected {n_hat}/{n}"
        )

    grid = time_grid(t_final, dt)
    _, core = _step_maps(a_joint, dt)
    drive = uhat.sample(grid) @ (core @ b_joint).T
    states = _run_lti(a_joint, drive, np.concatenate([xhat0, x0]), grid, dt)

    xhat_states = states[:, :n_hat]
    x_states = states[:, n_hat:]
    yhat = xhat_states @ mono_a.C.T
    y = x_states @ mono_c.C.T

    v = np.empty((len(grid), len(order)))
    for i, (name, res) in enumerate(zip(mono_c.names, order)):
        err = (
            x_states[:, mono_c.state_slice(name)]
            - xhat_states[:, mono_a.state_slice(name)] @ res.simfn.P.T
        )
        quad = np.einsum("ti,ij,tj->t", err, res.simfn.M, err)
        v[:, i] = np.sqrt(np.maximum(quad, 0.0))
    v_composed = np.max(v * composed.weights[np.newaxis, :], axis=1)
    mismatch = np.linalg.norm(yhat - y, axis=1)

    return RefinementRun(
        names=mono_c.names,
        abstract=Trajectory(grid, xhat_states, yhat),
        concrete=Trajectory(grid, x_states, y),
        v=v,
        v_composed=v_composed,
        mismatch=mismatch,
        input_offsets=mono_a.input_offsets,
    )


def scalar_bound(v0: float, lam: float, rho: float, u_inf: float, times) -> np.ndarray:
    """Exponential-plus-offset deviation bound ``e^{-lam t} v0 + (rho/lam) u_inf``."""
    if lam <= 0:
        raise ValueError(f"decay rate must be positive, got {lam}")
    times = np.asarray(times, dtype=float)
    return np.exp(-lam * times) * v0 + (rho / lam) * u_inf


def appendix_gammas(alpha: float, lam: float, rho: float, mu_total: float) -> tuple[float, float]:
    """Conservative worst-case external/internal gain coefficients.

    These are ``4 rho / (alpha lam)`` and ``4 mu_total / (alpha lam)``,
    reported alongside the tighter ``rho / lam`` used by
    :func:`scalar_bound`.
    """
    if lam <= 0:
        raise ValueError(f"decay rate must be positive, got {lam}")
    if alpha <= 0:
        raise ValueError(f"comparison coefficient must be positive, got {alpha}")
    return 4.0 * rho / (alpha * lam), 4.0 * mu_total / (alpha * lam)


def vector_bound(
    gm: GainMatrices,
    uhat_inf,
    v0=None,
    k_max: int = DEFAULT_BOUND_ITERATIONS,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-subsystem deviation recursion and its fixed point.

    Iterates ``V <- (Gamma Lambda^-1) V + Lambda^-1 Zhat`` with
    ``Zhat_i = rho_i * uhat_inf_i`` and also returns the closed-form
    fixed point ``(I - Gamma Lambda^-1)^-1 Lambda^-1 Zhat``.

    Parameters
    ----------
    gm : GainMatrices
        Interconnection gains.
    uhat_inf : (N,) array_like
        Supremum norm of each subsystem's abstract input.
    v0 : (N,) array_like, optional
        Starting iterate, zero when omitted.
    k_max : int
        Number of recursion steps to record.

    Returns
    -------
    iterates : (k_max + 1, N) ndarray
    fixed_point : (N,) ndarray
    """
    uhat_inf = np.asarray(uhat_inf, dtype=float).reshape(-1)
    if len(uhat_inf) != len(gm.names):
        raise ValueError(
            f"{len(uhat_inf)} input norms for {len(gm.names)} subsystems"
        )
    if np.any(uhat_inf < 0):
        raise ValueError("input norms must be nonnegative")
    scaled = gm.scaled
    radius, _ = perron(scaled)
    if radius >= 1.0:
        raise NumericsError(
            f"deviation recursion diverges: spectral radius {radius:.6g} >= 1"
        )
    z = gm.rho * uhat_inf / gm.lam
    iterates = np.empty((k_max + 1, len(z)))
    iterates[0] = np.zeros_like(z) if v0 is None else np.asarray(v0, dtype=float)
    for k in range(k_max):
        iterates[k + 1] = scaled @ iterates[k] + z
    fixed_point = np.linalg.solve(np.eye(len(z)) - scaled, z)
    return iterates, fixed_point


@dataclass(frozen=True)
class BoundReport:
    """Sampled bounds versus observed deviations for one run.

    ``margin`` is the scalar bound minus the output mismatch per
    sample; ``vvec_margin`` is the worst slack of each subsystem
    deviation against its fixed-point bound plus decaying transient.
    """

    names: tuple[str, ...]
    times: np.ndarray
    v0: float
    lam: float
    rho: float
    u_inf: float
    scalar_samples: np.ndarray
    mismatch: np.ndarray
    margin: np.ndarray
    vvec_fixed_point: np.ndarray
    vvec_margin: np.ndarray

    @property
    def rho_over_lambda(self) -> float:
        return self.rho / self.lam

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margin))

    @property
    def ok(self) -> bool:
        return (
            self.min_margin >= -BOUND_TOL
            and float(np.min(self.vvec_margin)) >= -BOUND_TOL
        )

    def lines(self) -> list[str]:
        out = [
            f"scalar bound: exp(-{self.lam:.6g} t) * {self.v0:.6g}"
            f" + {self.rho_over_lambda:.6g} * {self.u_inf:.6g}",
            f"max output mismatch {float(np.max(self.mismatch)):.6g},"
            f" min margin {self.min_margin:.6g}"
            f" [{'ok' if self.min_margin >= -BOUND_TOL else 'VIOLATED'}]",
        ]
        for i, name in enumerate(self.names):
            flag = "ok" if self.vvec_margin[i] >= -BOUND_TOL else "VIOLATED"
            out.append(
                f"V_{name}: fixed point {self.vvec_fixed_point[i]:.6g},"
                f" margin {self.vvec_margin[i]:.6g} [{flag}]"
            )
        return out


def bound_report(
    run: RefinementRun,
    composed: ComposedSimFn,
    gm: GainMatrices,
    uhat: Signal,
    v0: float | None = None,
) -> BoundReport:
    """Evaluate the scalar and vector bounds along a completed run.

    ``v0`` overrides the initial composed deviation in the scalar
    bound (to evaluate the bound from a prescribed level rather than
    the realised start).  Supremum norms are taken over the supplied
    samples, so the bounds are relative to the simulated horizon.
    """
    if tuple(run.names) != tuple(gm.names):
        raise ValueError("run and gain matrices order their subsystems differently")
    if v0 is None:
        v0 = float(run.v_composed[0])
    u_inf = uhat.sup_norm
    scalar_samples = scalar_bound(v0, composed.lam, composed.rho, u_inf, run.times)
    margin = scalar_samples - run.mismatch

    per_inf = np.empty(len(run.names))
    for i in range(len(run.names)):
        block = uhat.values[:, run.input_offsets[i]:run.input_offsets[i + 1]]
        per_inf[i] = np.max(np.linalg.norm(block, axis=1)) if block.shape[1] else 0.0
    _, fixed_point = vector_bound(gm, per_inf)
    transient = np.exp(-gm.lam[np.newaxis, :] * run.times[:, np.newaxis])
    allowance = fixed_point[np.newaxis, :] + transient * run.v[0][np.newaxis, :]
    vvec_margin = np.min(allowance - run.v, axis=0)

    return BoundReport(
        names=tuple(run.names),
        times=run.times,
        v0=v0,
        lam=composed.lam,
        rho=composed.rho,
        u_inf=u_inf,
        scalar_samples=scalar_samples,
        mismatch=run.mismatch,
        margin=margin,
        vvec_fixed_point=fixed_point,
        vvec_margin=vvec_margin,
    )


def write_csv(path, run: RefinementRun) -> None:
    """Export a run as CSV: time, concrete states and outputs, deviations.

    Floats are written with 17 significant digits so rereading them
    reproduces the doubles bit for bit.
    """
    header = (
        ["t"]
        + [f"x[{i}]" for i in range(run.concrete.states.shape[1])]
        + [f"y[{i}]" for i in range(run.concrete.outputs.shape[1])]
        + ["V"]
        + [f"V_{i + 1}" for i in range(run.v.shape[1])]
    )
    table = np.column_stack(
        [run.times, run.concrete.states, run.concrete.outputs, run.v_composed, run.v]
    )
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in table:
            fh.write(",".join(format(x, ".17g") for x in row) + "\n")


def write_gnuplot(path, csv_path, run: RefinementRun) -> None:
    """Emit a gnuplot script plotting the outputs and deviations of a CSV."""
    q = run.concrete.outputs.shape[1]
    n = run.concrete.states.shape[1]
    plots = [
        f"csv using 1:{n + 2 + j} with lines title 'y[{j}]'" for j in range(q)
    ]
    plots.append(f"csv using 1:{n + q + 2} with lines title 'V'")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(
            "\n".join(
                [
                    f"csv = '{csv_path}'",
                    "set datafile separator ','",
                    "set xlabel 't'",
                    "set key outside",
                    "plot " + ", \\\n     ".join(plots),
                    "",
                ]
            )
        )
