"""Finite stochastic machines, their iterates, and a coupled environment sampler."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .finstoch import (
    FinSpace,
    Kernel,
    SpaceMismatchError,
    compose,
    identity,
    is_deterministic,
    join,
    point,
    power,
    product,
    rearrange,
    split,
    tensor,
)

__all__ = [
    "Machine",
    "Environment",
    "SupportGraph",
    "Step",
    "Trajectory",
    "RNG_ALGORITHM",
    "step",
    "iterate",
    "support_graph",
    "is_full_support",
    "simulate_coupled",
]

RNG_ALGORITHM = "numpy.random.PCG64"


@dataclass(frozen=True)
class Machine:
    """State space ``states``, input space ``inputs`` and update kernel ``gamma: states⊗inputs -> states``."""

    states: FinSpace
    inputs: FinSpace
    gamma: Kernel

    def __post_init__(self):
        if self.gamma.src != product(self.states, self.inputs):
            raise SpaceMismatchError(f"update kernel must take {self.states.name}⊗{self.inputs.name}")
        if self.gamma.dst != self.states:
            raise SpaceMismatchError(f"update kernel must land in {self.states.name}")

    @classmethod
    def from_function(cls, states: FinSpace, inputs: FinSpace, fn) -> Machine:
        """Deterministic machine with ``fn(y, s)`` the next state."""
        src = product(states, inputs)
        return cls(states, inputs, Kernel.from_function(src, states, lambda e: fn(*split(e, (states, inputs)))))

    def transition(self, y, s) -> dict:
        """Nonzero next-state probabilities from ``y`` on ``s``."""
        return self.gamma.column(join((y, s), (self.states, self.inputs)))

    @property
    def deterministic(self) -> bool:
        return is_deterministic(self.gamma, method="columns")

    def next_state(self, y, s):
        """The successor of a deterministic transition."""
        (y2,) = self.transition(y, s)
        return y2


@dataclass(frozen=True)
class Environment:
    """True world: hidden states emitting inputs, ``dynamics: hidden -> hidden⊗S``."""

    hidden: FinSpace
    dynamics: Kernel
    initial: Kernel

    def __post_init__(self):
        if self.dynamics.src != self.hidden or self.dynamics.dst.parts[:1] != (self.hidden,):
            raise SpaceMismatchError("environment dynamics must map hidden -> hidden⊗S")
        if self.initial.dst != self.hidden:
            raise SpaceMismatchError("environment initial distribution must be over the hidden space")

    @property
    def emissions(self) -> FinSpace:
        return product(*self.dynamics.dst.parts[1:])


@dataclass(frozen=True)
class SupportGraph:
    edges: frozenset

    def successors(self, y, s) -> list:
        return sorted((e[2] for e in self.edges if e[0] == y and e[1] == s), key=repr)

    def __len__(self) -> int:
        return len(self.edges)

    def __contains__(self, edge) -> bool:
        return edge in self.edges


def step(m: Machine, state_dist: Kernel, s) -> Kernel:
    """Push a distribution over states through one input."""
    if s not in m.inputs:
        raise KeyError(f"{s!r} is not an input of this machine")
    col = [Fraction(0)] * len(m.states)
    for y, p in state_dist.column().items():
        for y2, q in m.transition(y, s).items():
            col[m.states.index(y2)] += p * q
    return Kernel(state_dist.src, m.states, (col,))


def iterate(m: Machine, n: int) -> Kernel:
    """``gamma^n : S^n ⊗ Y -> Y``, consuming the leftmost input first."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    Y, S = m.states, m.inputs
    k = identity(Y)
    for i in range(1, n + 1):
        rest = power(S, i - 1)
        # (s1, rest, y) -> (rest, y, s1), update y on s1, then run the rest
        first = rearrange((S, rest, Y), (1, 2, 0))
        k = compose(compose(first, tensor(identity(rest), m.gamma)), k)
    return k


def support_graph(m: Machine) -> SupportGraph:
    edges = set()
    for e, y2, p in m.gamma.items():
        if p:
            y, s = split(e, (m.states, m.inputs))
            edges.add((y, s, y2))
    return SupportGraph(frozenset(edges))


def is_full_support(m: Machine) -> bool:
    return all(p > 0 for col in m.gamma.cols for p in col)


@dataclass(frozen=True)
class Step:
    """One coupled step: ``x`` and ``y`` are the states after consuming input ``s``."""

    t: int
    x: Any
    s: Any
    y: Any


@dataclass
class Trajectory:
    x0: Any
    y0: Any
    steps: list[Step] = field(default_factory=list)
    seed: int = 0
    algorithm: str = RNG_ALGORITHM

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


def _sample(rng: np.random.Generator, k: Kernel, a=()):
    u = Fraction(rng.random())
    acc = Fraction(0)
    col = k.cols[k.src.index(a)]
    last = None
    for b, p in zip(k.dst.elements, col):
        if p:
            acc += p
            last = b
            if u < acc:
                return b
    return last


def simulate_coupled(m: Machine, env: Environment, initial_state: Kernel, steps: int, seed: int) -> Trajectory:
    """Sample the machine driven by the environment for ``steps`` steps."""
    if env.emissions != m.inputs:
        raise SpaceMismatchError(f"environment emits {env.emissions.name}, machine reads {m.inputs.name}")
    if initial_state.dst != m.states:
        raise SpaceMismatchError("initial state distribution must be over the machine's states")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    x = _sample(rng, env.initial)
    y = _sample(rng, initial_state)
    traj = Trajectory(x, y, seed=seed)
    out_spaces = (env.hidden, m.inputs)
    for t in range(steps):
        x, s = split(_sample(rng, env.dynamics, x), out_spaces)
        y = _sample(rng, m.gamma, join((y, s), (m.states, m.inputs)))
        traj.steps.append(Step(t, x, s, y))
    return traj


def fold_inputs(m: Machine, y, inputs: Sequence) -> Kernel:
    """Distribution over states after feeding ``inputs`` one at a time from ``y``."""
    d = point(m.states, y)
    for s in inputs:
        d = step(m, d, s)
    return d
