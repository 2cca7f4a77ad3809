"""Bayesian interpretations of machines and their consistency checks.

An interpretation pairs a belief map ``psi: Y -> H`` with a model of the
world, either an i.i.d. model ``phi: H -> S`` (inference) or a hidden Markov
model ``kappa: H -> H⊗S`` (filtering). It is consistent when, along every
possible transition ``y --s--> y'``, the belief at ``y'`` is the Bayes
posterior of the belief at ``y`` after seeing ``s``. Inputs with zero
predictive probability impose no constraint.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Collection, Mapping, NamedTuple, Union

from .finstoch import (
    UNIT,
    FinSpace,
    Kernel,
    SpaceMismatchError,
    bayes_invert,
    compose,
    copy,
    identity,
    join,
    marginalize,
    product,
    rearrange,
    tensor,
    uniform,
    uniform_fill,
)
from .machine import Machine

__all__ = [
    "InferenceModel",
    "FilteringModel",
    "Interpretation",
    "Violation",
    "ConsistencyReport",
    "Predictives",
    "Propagation",
    "BeliefConflict",
    "NondeterministicMachineError",
    "to_filtering",
    "predictives",
    "check_filtering",
    "check_inference",
    "check_conjugate_form",
    "subjectively_impossible_inputs",
    "trivial_interpretation",
    "propagate",
]


class NondeterministicMachineError(ValueError):
    """Raised by checks that only hold for deterministic machines."""


@dataclass(frozen=True)
class InferenceModel:
    hidden: FinSpace
    phi: Kernel

    def __post_init__(self):
        if self.phi.src != self.hidden:
            raise SpaceMismatchError(f"model must read the hidden space {self.hidden.name}")

    @property
    def inputs(self) -> FinSpace:
        return self.phi.dst


@dataclass(frozen=True)
class FilteringModel:
    hidden: FinSpace
    kappa: Kernel

    def __post_init__(self):
        n = len(self.hidden.parts)
        if self.kappa.src != self.hidden or self.kappa.dst.parts[:n] != self.hidden.parts:
            raise SpaceMismatchError(f"kappa must map {self.hidden.name} -> {self.hidden.name}⊗S")
        if len(self.kappa.dst.parts) == n:
            raise SpaceMismatchError("kappa has no emission factor")

    @property
    def inputs(self) -> FinSpace:
        return product(*self.kappa.dst.parts[len(self.hidden.parts) :])


Model = Union[InferenceModel, FilteringModel]


@dataclass(frozen=True)
class Interpretation:
    psi: Kernel
    model: Model

    def __post_init__(self):
        if self.psi.dst != self.model.hidden:
            raise SpaceMismatchError("belief map must land in the model's hidden space")

    @property
    def hidden(self) -> FinSpace:
        return self.model.hidden

    @property
    def inputs(self) -> FinSpace:
        return self.model.inputs

    @property
    def filtering(self) -> FilteringModel:
        m = self.model
        return m if isinstance(m, FilteringModel) else to_filtering(m)

    def belief(self, y) -> dict:
        return self.psi.column(y)


@dataclass(frozen=True)
class Violation:
    """A failed constraint: ``lhs != rhs`` for transition ``y --s--> y_next`` at hidden value ``h``."""

    y: Any
    s: Any
    y_next: Any
    h: Any
    lhs: Fraction
    rhs: Fraction


@dataclass
class ConsistencyReport:
    checker: str
    violations: list[Violation] = field(default_factory=list)
    impossible_inputs: dict = field(default_factory=dict)
    checked_constraints: int = 0
    unconstrained: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.violations

    @property
    def verdict(self) -> str:
        return "consistent" if self.consistent else "inconsistent"

    def __bool__(self) -> bool:
        return self.consistent


class Predictives(NamedTuple):
    psi_SHH: Kernel  # Y -> H ⊗ H' ⊗ S
    psi_SH: Kernel  # Y -> H' ⊗ S
    psi_S: Kernel  # Y -> S


def to_filtering(model: InferenceModel) -> FilteringModel:
    """The static-hidden-state filtering model: copy ``h``, keep one copy, emit from the other."""
    H = model.hidden
    return FilteringModel(H, compose(copy(H), tensor(identity(H), model.phi)))


def predictives(i: Interpretation) -> Predictives:
    H, S = i.hidden, i.inputs
    kappa = i.filtering.kappa
    shh = compose(compose(i.psi, copy(H)), tensor(identity(H), kappa))
    sh = marginalize(shh, (1, 2), (H, H, S))
    s = marginalize(sh, 1, (H, S))
    return Predictives(shh, sh, s)


def _check_spaces(m: Machine, i: Interpretation) -> None:
    if i.psi.src != m.states:
        raise SpaceMismatchError(f"belief map reads {i.psi.src.name}, machine states are {m.states.name}")
    if i.inputs != m.inputs:
        raise SpaceMismatchError(f"model emits {i.inputs.name}, machine reads {m.inputs.name}")


def _impossible(m: Machine, psi_S: Kernel) -> dict:
    out = {}
    for y in m.states:
        zeros = tuple(s for s in m.inputs if psi_S(s, y) == 0)
        if zeros:
            out[y] = zeros
    return out


def _edge_check(m: Machine, i: Interpretation, name: str, lhs_of, psi_S: Kernel, ignore: Collection) -> ConsistencyReport:
    report = ConsistencyReport(name, impossible_inputs=_impossible(m, psi_S))
    for y in m.states:
        if y in ignore:
            continue
        for s in m.inputs:
            prior_s = psi_S(s, y)
            succ = m.transition(y, s)
            for y2 in m.states:
                if y2 not in succ or y2 in ignore:
                    continue
                for h in i.hidden:
                    report.checked_constraints += 1
                    if prior_s == 0:
                        continue
                    lhs = lhs_of(y, s, h)
                    rhs = prior_s * i.psi(h, y2)
                    if lhs != rhs:
                        report.violations.append(Violation(y, s, y2, h, lhs, rhs))
    return report


def check_filtering(m: Machine, i: Interpretation, ignore: Collection = ()) -> ConsistencyReport:
    """Check ``psi_SH(h, s | y) = psi_S(s | y) psi(h | y')`` on every possible transition.

    States in ``ignore`` are left out of every constraint, as source or target.
    """
    _check_spaces(m, i)
    H, S = i.hidden, i.inputs
    pred = predictives(i)
    return _edge_check(
        m, i, "filtering", lambda y, s, h: pred.psi_SH(join((h, s), (H, S)), y), pred.psi_S, ignore
    )


def check_inference(m: Machine, i: Interpretation, ignore: Collection = ()) -> ConsistencyReport:
    """Check ``psi(h | y) phi(s | h) = psi_S(s | y) psi(h | y')`` on every possible transition."""
    if not isinstance(i.model, InferenceModel):
        raise TypeError("check_inference needs an inference model; use check_filtering")
    _check_spaces(m, i)
    phi = i.model.phi
    psi_S = compose(i.psi, phi)
    return _edge_check(m, i, "inference", lambda y, s, h: i.psi(h, y) * phi(s, h), psi_S, ignore)


def predict_update_read(m: Machine, psi: Kernel, psi_S: Kernel) -> Kernel:
    """``Y -> S⊗H``: draw ``s`` from ``psi_S``, update the machine on it, read the belief at the new state."""
    Y, S = m.states, m.inputs
    k = compose(copy(Y), tensor(psi_S, identity(Y)))
    k = compose(k, tensor(copy(S), identity(Y)))
    k = compose(k, rearrange((S, S, Y), (0, 2, 1)))
    k = compose(k, tensor(identity(S), m.gamma))
    return compose(k, tensor(identity(S), psi))


def check_conjugate_form(m: Machine, i: Interpretation) -> ConsistencyReport:
    """Compare the two joint kernels ``Y -> S⊗H`` of the conjugate-prior equation.

    Left: draw ``h`` from the belief and emit ``s`` from it. Right: draw ``s``
    from the predictive, update the machine on it and read the new belief.
    """
    if not isinstance(i.model, InferenceModel):
        raise TypeError("conjugate form needs an inference model")
    if not m.deterministic:
        raise NondeterministicMachineError(
            "conjugate-prior form is equivalent to consistency only for deterministic machines"
        )
    _check_spaces(m, i)
    Y, S, H = m.states, m.inputs, i.hidden
    phi, psi = i.model.phi, i.psi
    lhs = compose(compose(psi, copy(H)), tensor(phi, identity(H)))
    rhs = predict_update_read(m, psi, compose(psi, phi))

    report = ConsistencyReport("conjugate", impossible_inputs=_impossible(m, compose(psi, phi)))
    for y in Y:
        for s in S:
            y2 = m.next_state(y, s)
            for h in H:
                e = join((s, h), (S, H))
                report.checked_constraints += 1
                a, b = lhs(e, y), rhs(e, y)
                if a != b:
                    report.violations.append(Violation(y, s, y2, h, a, b))
    return report


def subjectively_impossible_inputs(i: Interpretation, y) -> set:
    if y not in i.psi.src:
        raise KeyError(f"{y!r} is not a machine state")
    psi_S = predictives(i).psi_S
    return {s for s in i.inputs if psi_S(s, y) == 0}


def trivial_interpretation(m: Machine, H: FinSpace, prior: Kernel, emission: Kernel | None = None) -> Interpretation:
    """Same belief at every state, hidden state frozen, inputs drawn from a fixed ``emission``."""
    if prior.dst != H:
        raise SpaceMismatchError("prior must be a distribution over H")
    emission = uniform(m.inputs) if emission is None else emission
    psi = Kernel(m.states, H, [prior.cols[0]] * len(m.states))
    return Interpretation(psi, FilteringModel(H, tensor(identity(H), emission)))


@dataclass(frozen=True)
class Propagation:
    psi: Kernel
    unconstrained: tuple


class BeliefConflict(Exception):
    """Two transitions force different posteriors onto the same state."""

    def __init__(self, state, belief_a, belief_b, witnesses):
        self.state = state
        self.belief_a = belief_a
        self.belief_b = belief_b
        self.witnesses = witnesses
        super().__init__(f"state {state!r} is forced to two different beliefs by {witnesses[0]} and {witnesses[1]}")


def _as_column(H: FinSpace, belief) -> tuple:
    if isinstance(belief, Kernel):
        if belief.dst != H or belief.src != UNIT:
            raise SpaceMismatchError("seed beliefs must be distributions over the hidden space")
        return belief.cols[0]
    return Kernel.from_columns(UNIT, H, {(): belief}).cols[0]


def propagate(m: Machine, model: InferenceModel, seeds: Mapping[Any, Any]) -> Propagation:
    """Synthesise a consistent belief map from seed beliefs by pushing Bayes posteriors along transitions.

    Breadth-first from the seeds (in state order); states never reached get
    the uniform belief, are reported as unconstrained and are then propagated
    from as well. Raises :class:`BeliefConflict` when some state would need
    two different beliefs.
    """
    if not seeds:
        raise ValueError("propagate needs at least one seed")
    Y, S, H = m.states, m.inputs, model.hidden
    if model.inputs != S:
        raise SpaceMismatchError("model and machine disagree on the input space")
    for y in seeds:
        Y.index(y)
    beliefs: dict = {}
    origin: dict = {}
    queue: deque = deque()
    for y in Y:
        if y in seeds:
            beliefs[y] = _as_column(H, seeds[y])
            origin[y] = ("seed", y)
            queue.append(y)

    def drain():
        while queue:
            y = queue.popleft()
            prior = Kernel(UNIT, H, (beliefs[y],))
            posterior = bayes_invert(prior, model.phi)
            for s in S:
                if sum(p * model.phi(s, h) for p, h in zip(beliefs[y], H)) == 0:
                    continue
                new = posterior.cols[S.index(s)]
                succ = m.transition(y, s)
                for y2 in Y:
                    if y2 not in succ:
                        continue
                    if y2 in beliefs:
                        if beliefs[y2] != new:
                            raise BeliefConflict(y2, beliefs[y2], new, (origin[y2], (y, s)))
                    else:
                        beliefs[y2] = new
                        origin[y2] = (y, s)
                        queue.append(y2)

    drain()
    unconstrained = []
    for y in Y:
        if y not in beliefs:
            beliefs[y] = uniform_fill(H)
            origin[y] = ("unconstrained", y)
            unconstrained.append(y)
            queue.append(y)
            drain()
    return Propagation(Kernel(Y, H, [beliefs[y] for y in Y]), tuple(unconstrained))
