"""Interconnected linear subsystems.

A subsystem

    dx/dt = A x + B u + D w,    zeta = C_ext x,    y_j = C_int[j] x

has an external input ``u``, an external output ``zeta``, an internal
disturbance vector ``w`` collecting everything received from peers, and
one internal output block per receiving peer. The columns of ``D`` are
grouped per incoming channel, in the order listed in ``channels_in``.

An interconnection wires internal outputs to internal inputs:
subsystem ``i`` receiving a channel from ``j`` reads ``w_ij = C_int``
of ``j`` toward ``i`` applied to ``x_j``. Widths must match and a
subsystem may not feed itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import Matrix, as_matrix


@dataclass(frozen=True)
class InternalChannel:
    """One incoming channel: the sending subsystem and its scalar width."""

    source: str
    width: int


@dataclass
class LinearSystem:
    """State-space subsystem with partitioned internal inputs/outputs."""

    name: str
    A: Matrix
    B: Matrix
    C_ext: Matrix
    D: Matrix
    channels_in: tuple[InternalChannel, ...] = ()
    C_int: dict[str, Matrix] = field(default_factory=dict)

    def __post_init__(self):
        self.A = as_matrix(self.A, f"{self.name}.A")
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"{self.name}.A must be square, got {self.A.shape}")
        self.B = self._coerce(self.B, n, "B")
        self.C_ext = self._coerce_rows(self.C_ext, n, "C_ext")
        self.D = self._coerce(self.D, n, "D")
        self.channels_in = tuple(self.channels_in)
        self.C_int = {peer: self._coerce_rows(c, n, f"C_int[{peer}]") for peer, c in self.C_int.items()}
        width_total = sum(ch.width for ch in self.channels_in)
        if self.D.shape[1] != width_total:
            raise ValueError(
                f"{self.name}.D has {self.D.shape[1]} columns but channels "
                f"declare total width {width_total}"
            )
        seen = set()
        for ch in self.channels_in:
            if ch.source == self.name:
                raise ValueError(f"{self.name} may not receive a channel from itself")
            if ch.width <= 0:
                raise ValueError(f"channel from {ch.source} must have positive width")
            if ch.source in seen:
                raise ValueError(f"{self.name} lists two channels from {ch.source}")
            seen.add(ch.source)

    def _coerce(self, mat, n: int, label: str) -> Matrix:
        mat = np.asarray(mat, dtype=float)
        if mat.ndim == 1:
            mat = mat[:, None]
        if mat.size == 0:
            mat = mat.reshape(n, -1)
        if mat.ndim != 2 or mat.shape[0] != n:
            raise ValueError(f"{self.name}.{label} must have {n} rows, got shape {mat.shape}")
        return mat

    def _coerce_rows(self, mat, n: int, label: str) -> Matrix:
        mat = np.asarray(mat, dtype=float)
        if mat.ndim == 1:
            mat = mat[None, :]
        if mat.size == 0:
            mat = mat.reshape(-1, n)
        if mat.ndim != 2 or mat.shape[1] != n:
            raise ValueError(f"{self.name}.{label} must have {n} columns, got shape {mat.shape}")
        return mat

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def q(self) -> int:
        return self.C_ext.shape[0]

    @property
    def p(self) -> int:
        return self.D.shape[1]

    def channel_slice(self, source: str) -> slice:
        """Column range of ``D`` belonging to the channel from ``source``."""
        offset = 0
        for ch in self.channels_in:
            if ch.source == source:
                return slice(offset, offset + ch.width)
            offset += ch.width
        raise KeyError(f"{self.name} has no channel from {source}")

    def d_block(self, source: str) -> Matrix:
        return self.D[:, self.channel_slice(source)]

    def output_blocks(self) -> list[Matrix]:
        """External output first, then internal blocks in channel-name order."""
        blocks = [self.C_ext] if self.C_ext.shape[0] else []
        for peer in sorted(self.C_int):
            blk = self.C_int[peer]
            if blk.shape[0]:
                blocks.append(blk)
        return blocks


@dataclass
class Interconnection:
    """A named collection of subsystems with compatible channel wiring."""

    subsystems: list[LinearSystem]

    def __post_init__(self):
        self.subsystems = list(self.subsystems)
        self.validate()

    def validate(self):
        names = [s.name for s in self.subsystems]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate subsystem names in {names}")
        index = {name: i for i, name in enumerate(names)}
        for sub in self.subsystems:
            order = [index.get(ch.source) for ch in sub.channels_in]
            for ch, idx in zip(sub.channels_in, order):
                if idx is None:
                    raise ValueError(f"{sub.name} receives from unknown subsystem {ch.source}")
            if order != sorted(order):
                raise ValueError(
                    f"{sub.name} channels must be listed in subsystem order, got "
                    f"{[ch.source for ch in sub.channels_in]}"
                )
            for ch in sub.channels_in:
                sender = self.subsystems[index[ch.source]]
                block = sender.C_int.get(sub.name)
                if block is None:
                    raise ValueError(
                        f"{sub.name} expects a channel from {ch.source}, but "
                        f"{ch.source} declares no output toward {sub.name}"
                    )
                if block.shape[0] != ch.width:
                    raise ValueError(
                        f"channel {ch.source} -> {sub.name}: declared width "
                        f"{ch.width} but the sender's output block has "
                        f"{block.shape[0]} rows"
                    )
        for sub in self.subsystems:
            for peer in sub.C_int:
                if peer not in index:
                    raise ValueError(f"{sub.name} declares an output toward unknown subsystem {peer}")

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.subsystems]

    def index(self, name: str) -> int:
        for i, s in enumerate(self.subsystems):
            if s.name == name:
                return i
        raise KeyError(name)

    def __getitem__(self, name: str) -> LinearSystem:
        return self.subsystems[self.index(name)]


@dataclass(frozen=True)
class MonolithicSystem:
    """The interconnection flattened to one closed-coupling system.

    ``A`` contains the subsystem blocks on the diagonal and
    ``D_i[:, channel j] @ C_ji`` couplings off it; ``B`` and ``C`` are
    block diagonal over external inputs/outputs.
    """

    A: Matrix
    B: Matrix
    C: Matrix
    names: tuple[str, ...]
    state_offsets: tuple[int, ...]
    input_offsets: tuple[int, ...]
    output_offsets: tuple[int, ...]

    def state_slice(self, name: str) -> slice:
        i = self.names.index(name)
        return slice(self.state_offsets[i], self.state_offsets[i + 1])


def _offsets(sizes) -> tuple[int, ...]:
    out = [0]
    for s in sizes:
        out.append(out[-1] + s)
    return tuple(out)


def internal_input_matrix(ic: Interconnection, receiver: LinearSystem) -> Matrix:
    """Matrix mapping the stacked interconnection state to ``receiver``'s
    internal input vector ``w`` (channel blocks in declared order)."""
    state_offsets = _offsets(s.n for s in ic.subsystems)
    n_total = state_offsets[-1]
    rows = []
    for ch in receiver.channels_in:
        j = ic.index(ch.source)
        sender = ic.subsystems[j]
        block = np.zeros((ch.width, n_total))
        block[:, state_offsets[j]:state_offsets[j + 1]] = sender.C_int[receiver.name]
        rows.append(block)
    if not rows:
        return np.zeros((0, n_total))
    return np.vstack(rows)


def build_monolithic(ic: Interconnection) -> MonolithicSystem:
    """Flatten an interconnection by substituting ``w_ij = C_ji x_j``."""
    subs = ic.subsystems
    state_offsets = _offsets(s.n for s in subs)
    input_offsets = _offsets(s.m for s in subs)
    output_offsets = _offsets(s.q for s in subs)
    n_total = state_offsets[-1]
    a = np.zeros((n_total, n_total))
    b = np.zeros((n_total, input_offsets[-1]))
    c = np.zeros((output_offsets[-1], n_total))
    for i, sub in enumerate(subs):
        rows = slice(state_offsets[i], state_offsets[i + 1])
        a[rows, rows] = sub.A
        a[rows, :] += sub.D @ internal_input_matrix(ic, sub)
        b[rows, input_offsets[i]:input_offsets[i + 1]] = sub.B
        c[output_offsets[i]:output_offsets[i + 1], rows] = sub.C_ext
    return MonolithicSystem(
        A=a,
        B=b,
        C=c,
        names=tuple(ic.names),
        state_offsets=state_offsets,
        input_offsets=input_offsets,
        output_offsets=output_offsets,
    )
