from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bayesinterp import randgen
from bayesinterp.finstoch import FinSpace, Kernel, power, product, uniform
from bayesinterp.filtering_verify import (
    deterministic_equivalence_check,
    iterate_model,
    joint_beliefs,
    verify_filtering_conditional,
)
from bayesinterp.interpretation import (
    FilteringModel,
    Interpretation,
    NondeterministicMachineError,
    check_filtering,
    predictives,
    trivial_interpretation,
)

seeds = st.integers(0, 2**32 - 1)


def random_filtering(rng, m, max_hidden=3):
    H = randgen.space(rng, "H", max_hidden)
    kappa = randgen.kernel(rng, H, product(H, m.inputs), zero_prob=0.5)
    psi = randgen.kernel(rng, m.states, H, zero_prob=0.4)
    return Interpretation(psi, FilteringModel(H, kappa))


@given(seeds)
def test_one_step_joint_is_the_predictive(seed):
    rng = random.Random(seed)
    m = randgen.machine(rng)
    i = random_filtering(rng, m)
    H, S = i.hidden, i.inputs
    joint = joint_beliefs(i, 1)
    psi_SH = predictives(i).psi_SH
    for y in m.states:
        for s in S:
            for h in H:
                assert joint((s,), h, y) == psi_SH((h, s), y)


@given(seeds, st.integers(0, 2))
def test_joint_chain_rule(seed, n):
    """Horizon n+1 joint = horizon n joint followed by one more kappa step."""
    rng = random.Random(seed)
    m = randgen.machine(rng, 2, 2)
    i = random_filtering(rng, m, 2)
    H, S = i.hidden, i.inputs
    kappa = i.model.kappa
    short, long = joint_beliefs(i, n), joint_beliefs(i, n + 1)
    for y in m.states:
        for seq in itertools.product(S.elements, repeat=n):
            for s in S:
                for h2 in H:
                    expected = sum(short(seq, h, y) * kappa((h2, s), h) for h in H)
                    assert long(seq + (s,), h2, y) == expected


def test_iterate_model_emission_order():
    # hidden value counts up; emission reports the value before the step
    H = FinSpace("H", (0, 1, 2))
    S = FinSpace("S", (0, 1, 2))
    kappa = Kernel.from_function(H, product(H, S), lambda h: (min(h + 1, 2), h))
    k2 = iterate_model(FilteringModel(H, kappa), 2)
    assert k2.column(0) == {(2, 0, 1): 1}


def test_three_state_deterministic_all_depths(three_state_det):
    m, i = three_state_det
    for n in range(6):
        report = verify_filtering_conditional(m, i, n)
        assert report.consistent, n
        assert len(report.unconstrained) + report.checked_constraints // len(i.hidden) == 3 * 2**n


def test_unconstrained_sequences_at_depth_three(three_state_det):
    m, i = three_state_det
    report = verify_filtering_conditional(m, i, 3)
    from_y0 = [seq for y, seq in report.unconstrained if y == "y0"]
    # from y0 only the constant sequences have positive probability
    assert len(from_y0) == 6
    assert ("s1", "s1", "s1") not in from_y0 and ("s2", "s2", "s2") not in from_y0


def test_perturbed_psi_fails(three_state_det, perturbed_psi):
    m, i = three_state_det
    report = verify_filtering_conditional(m, perturbed_psi(i), 1)
    v = report.violations[0]
    assert (v.y, v.s, v.y_next, v.h) == ("y0", ("s1",), "y1", "h1")


def test_stochastic_machine_rejected(three_state):
    m, i = three_state
    with pytest.raises(NondeterministicMachineError):
        verify_filtering_conditional(m, i, 2)
    informational = verify_filtering_conditional(m, i, 2, strict=False)
    assert informational.checker.endswith("(informational)")


def test_depth_bound(three_state_det):
    m, i = three_state_det
    with pytest.raises(ValueError, match="exceeds"):
        verify_filtering_conditional(m, i, 9)
    with pytest.raises(ValueError):
        verify_filtering_conditional(m, i, 2, max_depth=1)
    assert verify_filtering_conditional(m, i, 9, max_depth=9).consistent


def test_equivalence_check_three_state(three_state_det, perturbed_psi):
    m, i = three_state_det
    assert deterministic_equivalence_check(m, i) is True
    assert deterministic_equivalence_check(m, perturbed_psi(i)) is False
    assert check_filtering(m, perturbed_psi(i)).consistent is False


def test_equivalence_check_constant_psi(three_state_det):
    m, _ = three_state_det
    H = FinSpace("H", ("a", "b"))
    i = trivial_interpretation(m, H, uniform(H))
    assert deterministic_equivalence_check(m, i)


@given(seeds)
def test_equivalence_check_matches_filtering_checker(seed):
    rng = random.Random(seed)
    m = randgen.machine(rng, deterministic=True)
    i = random_filtering(rng, m)
    assert deterministic_equivalence_check(m, i) == check_filtering(m, i).consistent


@given(seeds)
def test_consistent_deterministic_implies_conditional(seed):
    rng = random.Random(seed)
    m = randgen.machine(rng, 3, 2, deterministic=True)
    H = randgen.space(rng, "H", 2)
    i = trivial_interpretation(m, H, randgen.distribution(rng, H), randgen.distribution(rng, m.inputs))
    assert check_filtering(m, i).consistent
    for n in range(4):
        assert verify_filtering_conditional(m, i, n).consistent


def test_joint_beliefs_sequences_space(three_state_det):
    _, i = three_state_det
    joint = joint_beliefs(i, 2)
    assert joint.sequences == power(i.inputs, 2)
    total = sum(joint(seq, h, "y0") for seq in itertools.product(i.inputs.elements, repeat=2) for h in i.hidden)
    assert total == 1
