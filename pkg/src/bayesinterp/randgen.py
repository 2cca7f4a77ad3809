"""Seeded random kernels, machines and interpretations with exact entries."""

from __future__ import annotations

import random
from fractions import Fraction

from .finstoch import UNIT, FinSpace, Kernel, product
from .interpretation import InferenceModel, Interpretation
from .machine import Machine


def space(rng: random.Random, name: str, max_size: int = 4, min_size: int = 1) -> FinSpace:
    n = rng.randint(min_size, max_size)
    return FinSpace(name, tuple(f"{name.lower()}{i}" for i in range(n)))


def column(rng: random.Random, n: int, zero_prob: float = 0.3, max_weight: int = 5) -> list[Fraction]:
    while True:
        w = [0 if rng.random() < zero_prob else rng.randint(1, max_weight) for _ in range(n)]
        if any(w):
            total = sum(w)
            return [Fraction(x, total) for x in w]


def point_column(rng: random.Random, n: int) -> list[Fraction]:
    col = [Fraction(0)] * n
    col[rng.randrange(n)] = Fraction(1)
    return col


def kernel(rng: random.Random, src: FinSpace, dst: FinSpace, zero_prob: float = 0.3, deterministic: bool = False) -> Kernel:
    if deterministic:
        return Kernel(src, dst, [point_column(rng, len(dst)) for _ in src])
    return Kernel(src, dst, [column(rng, len(dst), zero_prob) for _ in src])


def any_kernel(rng: random.Random, src: FinSpace, dst: FinSpace) -> Kernel:
    """Deterministic with probability 1/3, otherwise stochastic with random zeros."""
    return kernel(rng, src, dst, deterministic=rng.random() < 1 / 3)


def distribution(rng: random.Random, dst: FinSpace, zero_prob: float = 0.3) -> Kernel:
    return Kernel(UNIT, dst, [column(rng, len(dst), zero_prob)])


def machine(
    rng: random.Random,
    max_states: int = 3,
    max_inputs: int = 3,
    *,
    deterministic: bool = False,
    full_support: bool = False,
    zero_prob: float = 0.5,
) -> Machine:
    Y = space(rng, "Y", max_states)
    S = space(rng, "S", max_inputs)
    zp = 0.0 if full_support else zero_prob
    return Machine(Y, S, kernel(rng, product(Y, S), Y, zp, deterministic=deterministic))


def inference_interpretation(
    rng: random.Random, m: Machine, max_hidden: int = 3, zero_prob: float = 0.4
) -> Interpretation:
    H = space(rng, "H", max_hidden)
    phi = kernel(rng, H, m.inputs, zero_prob)
    psi = kernel(rng, m.states, H, zero_prob)
    return Interpretation(psi, InferenceModel(H, phi))


def perturb(rng: random.Random, k: Kernel) -> Kernel:
    """Move mass between two entries of one column (a different kernel whenever that is possible)."""
    cols = [list(c) for c in k.cols]
    candidates = [a for a in range(len(cols)) if len(k.dst) > 1]
    if not candidates:
        return k
    a = rng.choice(candidates)
    col = cols[a]
    donors = [b for b, p in enumerate(col) if p > 0]
    b = rng.choice(donors)
    c = rng.choice([x for x in range(len(col)) if x != b])
    delta = col[b] / rng.randint(2, 4)
    col[b] -= delta
    col[c] += delta
    return Kernel(k.src, k.dst, cols)
