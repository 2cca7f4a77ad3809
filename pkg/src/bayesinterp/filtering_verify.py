"""Multi-step filtering: iterated models, joint beliefs over input sequences,
and the check that the machine's state after ``n`` inputs carries the
conditional of those joint beliefs."""

from __future__ import annotations

from dataclasses import dataclass

from .finstoch import FinSpace, Kernel, compose, identity, join, kernels_equal, marginalize, power, rearrange, split, tensor
from .interpretation import (
    ConsistencyReport,
    FilteringModel,
    Interpretation,
    NondeterministicMachineError,
    Violation,
    predict_update_read,
    predictives,
)
from .machine import Machine, iterate

__all__ = [
    "JointBeliefs",
    "DEFAULT_MAX_DEPTH",
    "iterate_model",
    "joint_beliefs",
    "verify_filtering_conditional",
    "deterministic_equivalence_check",
]

DEFAULT_MAX_DEPTH = 8


@dataclass(frozen=True)
class JointBeliefs:
    horizon: int
    kernel: Kernel  # Y -> S^n ⊗ H
    inputs: FinSpace
    hidden: FinSpace

    @property
    def sequences(self) -> FinSpace:
        return power(self.inputs, self.horizon)

    def __call__(self, seq: tuple, h, y):
        Sn = self.sequences
        return self.kernel(join((_seq_element(seq, self.inputs, self.horizon), h), (Sn, self.hidden)), y)


def _seq_element(seq: tuple, S: FinSpace, n: int):
    return join(tuple(seq), [S] * n)


def _seq_tuple(e, S: FinSpace, n: int) -> tuple:
    return split(e, [S] * n)


def iterate_model(model: FilteringModel, n: int) -> Kernel:
    """``kappa^n : H -> H ⊗ S^n``; the first emission is the leftmost ``S`` factor."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    H, S = model.hidden, model.inputs
    k = identity(H)
    for i in range(1, n + 1):
        prev = power(S, i - 1)
        k = compose(k, tensor(model.kappa, identity(prev)))
        k = compose(k, rearrange((H, S, prev), (0, 2, 1)))
    return k


def joint_beliefs(i: Interpretation, n: int) -> JointBeliefs:
    """Belief at each state about the next ``n`` inputs together with the hidden state after them."""
    model = i.filtering
    H, S = model.hidden, model.inputs
    k = compose(compose(i.psi, iterate_model(model, n)), rearrange((H, power(S, n)), (1, 0)))
    return JointBeliefs(n, k, S, H)


def verify_filtering_conditional(
    m: Machine,
    i: Interpretation,
    n: int,
    *,
    strict: bool = True,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> ConsistencyReport:
    """Check that ``gamma^n`` followed by ``psi`` disintegrates the ``n``-step joint beliefs.

    For every start state ``y``, sequence ``seq`` and hidden ``h``::

        joint(seq, h | y) == marginal(seq | y) * psi(h | gamma^n(seq, y))

    Sequences with zero marginal are listed in ``unconstrained`` as ``(y, seq)``.
    With ``strict=False`` stochastic machines are evaluated too (informational only).
    """
    if n > max_depth:
        raise ValueError(f"depth {n} exceeds the bound {max_depth}; raise max_depth to allow it")
    deterministic = m.deterministic
    if strict and not deterministic:
        raise NondeterministicMachineError(
            "the conditional-of-joint property is only established for deterministic machines"
        )
    Y, S, H = m.states, m.inputs, i.hidden
    Sn = power(S, n)
    joint = joint_beliefs(i, n)
    marginal = marginalize(joint.kernel, 0, (Sn, H))
    gamma_n = iterate(m, n)
    conditional = compose(gamma_n, i.psi)

    report = ConsistencyReport("filtering-conditional" if strict else "filtering-conditional (informational)")
    for y in Y:
        for e in Sn:
            seq = _seq_tuple(e, S, n)
            mass = marginal(e, y)
            if mass == 0:
                report.unconstrained.append((y, seq))
                continue
            src = join((e, y), (Sn, Y))
            y_end = next(iter(gamma_n.column(src))) if deterministic else None
            for h in H:
                report.checked_constraints += 1
                lhs = joint.kernel(join((e, h), (Sn, H)), y)
                rhs = mass * conditional(h, src)
                if lhs != rhs:
                    report.violations.append(Violation(y, seq, y_end, h, lhs, rhs))
    return report


def deterministic_equivalence_check(m: Machine, i: Interpretation) -> bool:
    """For a deterministic machine: ``psi_SH' (s, h | y) == psi_S(s | y) psi(h | gamma(y, s))`` as kernels."""
    if not m.deterministic:
        raise NondeterministicMachineError("this equivalence is stated for deterministic machines only")
    H, S = i.hidden, i.inputs
    pred = predictives(i)
    lhs = compose(pred.psi_SH, rearrange((H, S), (1, 0)))
    rhs = predict_update_read(m, i.psi, pred.psi_S)
    return kernels_equal(lhs, rhs)
