"""Randomised checks of the Markov-category laws on exact finite kernels.

Each law draws its own random instance from a generator seeded by
``(seed, law name, trial)``, so results do not depend on how trials are
spread over worker processes.
"""

from __future__ import annotations

import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import randgen
from .finstoch import (
    bayes_invert,
    compose,
    copy,
    delete,
    disintegrate,
    identity,
    is_deterministic,
    product,
    rearrange,
    swap,
    tensor,
)

WORKERS_ENV = "BAYESINTERP_WORKERS"


def _spaces(rng, n, max_size=4):
    return [randgen.space(rng, name, max_size) for name in "ABCD"[:n]]


def naturality_of_delete(rng) -> bool:
    A, B = _spaces(rng, 2)
    f = randgen.any_kernel(rng, A, B)
    return compose(f, delete(B)) == delete(A)


def copy_coassociativity(rng) -> bool:
    (A,) = _spaces(rng, 1)
    left = compose(copy(A), tensor(copy(A), identity(A)))
    right = compose(copy(A), tensor(identity(A), copy(A)))
    return left == right


def copy_delete_cancellation(rng) -> bool:
    (A,) = _spaces(rng, 1)
    first = compose(copy(A), tensor(delete(A), identity(A)))
    second = compose(copy(A), tensor(identity(A), delete(A)))
    return first == identity(A) and second == identity(A)


def copy_cocommutativity(rng) -> bool:
    (A,) = _spaces(rng, 1)
    return compose(copy(A), swap(A, A)) == copy(A)


def tensor_compatibility(rng) -> bool:
    A, B = _spaces(rng, 2)
    deleting = delete(product(A, B)) == tensor(delete(A), delete(B))
    split_copy = compose(tensor(copy(A), copy(B)), rearrange((A, A, B, B), (0, 2, 1, 3)))
    return deleting and copy(product(A, B)) == split_copy


def determinism_characterization(rng) -> bool:
    A, B = _spaces(rng, 2)
    f = randgen.any_kernel(rng, A, B)
    return is_deterministic(f, "copy") == is_deterministic(f, "columns")


def composition_associativity(rng) -> bool:
    A, B, C, D = _spaces(rng, 4)
    f, g, h = (randgen.any_kernel(rng, x, y) for x, y in ((A, B), (B, C), (C, D)))
    return compose(compose(f, g), h) == compose(f, compose(g, h))


def composition_unitality(rng) -> bool:
    A, B = _spaces(rng, 2)
    f = randgen.any_kernel(rng, A, B)
    return compose(identity(A), f) == f == compose(f, identity(B))


def swap_naturality(rng) -> bool:
    A, B, C, D = _spaces(rng, 4)
    f, g = randgen.any_kernel(rng, A, B), randgen.any_kernel(rng, C, D)
    return compose(tensor(f, g), swap(B, D)) == compose(swap(A, C), tensor(g, f))


def tensor_interchange(rng) -> bool:
    A, B, C, D = _spaces(rng, 4, 3)
    E, F = randgen.space(rng, "E", 3), randgen.space(rng, "F", 3)
    f1, g1 = randgen.any_kernel(rng, A, B), randgen.any_kernel(rng, B, C)
    f2, g2 = randgen.any_kernel(rng, D, E), randgen.any_kernel(rng, E, F)
    return compose(tensor(f1, f2), tensor(g1, g2)) == tensor(compose(f1, g1), compose(f2, g2))


def disintegration_recomposition(rng) -> bool:
    Z, A, B = _spaces(rng, 3)
    q = randgen.kernel(rng, Z, product(A, B), zero_prob=0.5)
    marginal, conditional = disintegrate(q, (A, B))
    # z -> (z, a) -> (a, z, a) -> (a, b)
    rebuilt = compose(copy(Z), tensor(identity(Z), marginal))
    rebuilt = compose(rebuilt, rearrange((Z, A), (1, 0, 1)))
    rebuilt = compose(rebuilt, tensor(identity(A), conditional))
    return rebuilt == q


def bayes_inverse_equation(rng) -> bool:
    Z, A, B = _spaces(rng, 3)
    prior = randgen.kernel(rng, Z, A, zero_prob=0.5)
    f = randgen.kernel(rng, A, B, zero_prob=0.5)
    inverse = bayes_invert(prior, f)
    lhs = compose(compose(prior, copy(A)), tensor(identity(A), f))
    rhs = compose(copy(Z), tensor(identity(Z), compose(prior, f)))
    rhs = compose(rhs, rearrange((Z, B), (0, 1, 1)))
    rhs = compose(rhs, tensor(inverse, identity(B)))
    return lhs == rhs


AXIOMS = {
    "naturality_of_delete": naturality_of_delete,
    "copy_coassociativity": copy_coassociativity,
    "copy_delete_cancellation": copy_delete_cancellation,
    "copy_cocommutativity": copy_cocommutativity,
    "tensor_compatibility": tensor_compatibility,
    "determinism_characterization": determinism_characterization,
}

EXTRA_LAWS = {
    "composition_associativity": composition_associativity,
    "composition_unitality": composition_unitality,
    "swap_naturality": swap_naturality,
    "tensor_interchange": tensor_interchange,
    "disintegration_recomposition": disintegration_recomposition,
    "bayes_inverse_equation": bayes_inverse_equation,
}

ALL_LAWS = {**AXIOMS, **EXTRA_LAWS}


@dataclass
class LawResult:
    name: str
    trials: int
    failures: list[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def run_law(name: str, trials: int, seed: int = 0) -> LawResult:
    law = ALL_LAWS[name]
    result = LawResult(name, trials)
    for t in range(trials):
        if not law(random.Random(f"{seed}:{name}:{t}")):
            result.failures.append(t)
    return result


def workers_from_env() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def check_laws(trials: int = 500, seed: int = 0, names=None, workers: int | None = None) -> list[LawResult]:
    """Run each named law ``trials`` times; results sorted by law name."""
    names = sorted(ALL_LAWS if names is None else names)
    workers = workers_from_env() if workers is None else workers
    if workers <= 1:
        results = [run_law(n, trials, seed) for n in names]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_law, names, [trials] * len(names), [seed] * len(names)))
    return sorted(results, key=lambda r: r.name)
