"""Small worked examples with hand-derived values, grouped by module."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from bayesinterp import randgen
from bayesinterp.filtering_verify import iterate_model, joint_beliefs, verify_filtering_conditional
from bayesinterp.finstoch import (
    UNIT,
    FinSpace,
    Kernel,
    bayes_invert,
    compose,
    copy,
    disintegrate,
    dist,
    identity,
    is_deterministic,
    join,
    kernels_equal,
    marginalize,
    point,
    power,
    product,
    swap,
    tensor,
    uniform,
)
from bayesinterp.interpretation import (
    BeliefConflict,
    FilteringModel,
    InferenceModel,
    Interpretation,
    check_conjugate_form,
    check_filtering,
    check_inference,
    predictives,
    propagate,
    subjectively_impossible_inputs,
    to_filtering,
    trivial_interpretation,
)
from bayesinterp.machine import (
    Environment,
    Machine,
    is_full_support,
    iterate,
    simulate_coupled,
    step,
    support_graph,
)
from bayesinterp.parametric import (
    CountingState,
    DiffState,
    SIGNS,
    beta_predictive,
    beta_posterior,
    BetaBelief,
    beta_update_check,
    check_diff_consistency,
    counting_machine,
    counting_step,
    diff_step,
    machine_map_g,
    pulled_back_interpretation,
    verify_intertwiner,
)
from bayesinterp.specfile import load_spec

A = FinSpace("A", ("a0", "a1"))
B = FinSpace("B", ("b0", "b1"))
C = FinSpace("C", ("c0", "c1"))
F = Kernel.from_columns(A, B, {"a0": {"b0": "1/3", "b1": "2/3"}, "a1": {"b0": 1}})
G = Kernel.from_columns(B, C, {"b0": {"c0": "1/2", "c1": "1/2"}, "b1": {"c1": 1}})


# -- kernels -------------------------------------------------------------------------


def test_compose_example():
    # a0: 1/3 * 1/2 into c0, the rest into c1
    assert compose(F, G).column("a0") == {"c0": Fraction(1, 6), "c1": Fraction(5, 6)}
    assert compose(identity(A), F) == F


def test_tensor_example():
    assert tensor(F, G)(("b0", "c1"), ("a0", "b1")) == Fraction(1, 3)
    assert tensor(identity(A), identity(B)) == identity(product(A, B))


def test_marginals_of_a_tensor():
    p, q = dist(A, {"a0": "1/4", "a1": "3/4"}), dist(B, {"b1": 1})
    assert marginalize(tensor(p, q), 0) == p
    assert marginalize(tensor(p, q), 1) == q


def test_copy_and_swap_examples():
    bit = FinSpace("bit", (0, 1))
    assert copy(bit).column(0) == {(0, 0): 1} and copy(bit).column(1) == {(1, 1): 1}
    assert compose(swap(A, B), swap(B, A)) == identity(product(A, B))


def test_marginalize_example():
    Z = FinSpace("Z", ("z",))
    q = Kernel.from_columns(Z, product(A, B), {"z": {("a0", "b0"): "1/4", ("a0", "b1"): "1/4", ("a1", "b0"): "1/2"}})
    assert marginalize(q, 0).column("z") == {"a0": Fraction(1, 2), "a1": Fraction(1, 2)}


def test_disintegrate_examples():
    q = dist(product(A, B), {("a0", "b0"): "1/2", ("a0", "b1"): "1/4", ("a1", "b1"): "1/4"})
    _, cond = disintegrate(q)
    assert cond.column("a0") == {"b0": Fraction(2, 3), "b1": Fraction(1, 3)}
    p, r = dist(A, {"a0": 1}), dist(B, {"b0": "1/5", "b1": "4/5"})
    _, cond = disintegrate(tensor(p, r))
    assert cond.column("a0") == r.column()
    assert cond.column("a1") == {"b0": Fraction(1, 2), "b1": Fraction(1, 2)}


def test_bayes_invert_examples():
    assert bayes_invert(uniform(A), Kernel.from_function(A, A, lambda a: a)).column("a1") == {"a1": 1}
    prior = dist(A, {"a0": "1/3", "a1": "2/3"})
    f = Kernel.from_columns(A, B, {"a0": {"b0": "3/4", "b1": "1/4"}, "a1": {"b0": "1/4", "b1": "3/4"}})
    # (1/3 * 3/4) / (1/3 * 3/4 + 2/3 * 1/4) = 3/5
    assert bayes_invert(prior, f).column("b0") == {"a0": Fraction(3, 5), "a1": Fraction(2, 5)}


def test_determinism_and_equality_examples():
    coin = FinSpace("coin", ("h", "t"))
    assert is_deterministic(identity(A))
    assert not is_deterministic(Kernel(UNIT, coin, [(Fraction(1, 2), Fraction(1, 2))]))
    tiny = Fraction(1, 10**9)
    nudged = Kernel(A, B, [(Fraction(1, 3) + tiny, Fraction(2, 3) - tiny), (1, 0)])
    assert kernels_equal(F, F) and not kernels_equal(F, nudged)


# -- machines -----------------------------------------------------------------------------


def test_step_examples(three_state):
    m, _ = three_state
    assert step(m, point(m.states, "y0"), "s1") == point(m.states, "y1")
    assert step(m, dist(m.states, {"y0": "1/2", "y1": "1/2"}), "s1") == point(m.states, "y1")


def test_iterate_examples(three_state, three_state_det):
    m, _ = three_state
    assert iterate(m, 0) == identity(m.states)
    two = iterate(m, 2)
    expected = step(m, step(m, point(m.states, "y0"), "s1"), "s2")
    assert two.cols[two.src.index(("s1", "s2", "y0"))] == expected.cols[0]
    det, _ = three_state_det
    assert is_deterministic(iterate(det, 3), "columns")


def test_support_graph_examples(three_state_det):
    m, _ = three_state_det
    g = support_graph(m)
    assert all(len(g.successors(y, s)) == 1 for y in m.states for s in m.inputs)
    Y, S = FinSpace("Y", ("p", "q")), FinSpace("S", ("s",))
    full = Machine(Y, S, Kernel(product(Y, S), Y, [uniform(Y).cols[0]] * 2))
    assert len(support_graph(full)) == 2 * 2 * 1
    assert is_full_support(full)
    single = FinSpace("Y", ("only",))
    assert is_full_support(Machine.from_function(single, S, lambda y, s: y))


@given(st.integers(0, 2**32 - 1))
def test_support_graph_matches_nonzero_entries(seed):
    m = randgen.machine(random.Random(seed))
    edges = {(y, s, y2) for (y, s), y2, p in m.gamma.items() if p}
    assert set(support_graph(m).edges) == edges


def test_simulation_edge_cases():
    Y, S, X = FinSpace("Y", ("p", "q")), FinSpace("S", ("s",)), FinSpace("X", ("x",))
    m = Machine.from_function(Y, S, lambda y, s: "q" if y == "p" else "p")
    env = Environment(X, Kernel.from_function(X, product(X, S), lambda x: (x, "s")), point(X, "x"))
    assert len(simulate_coupled(m, env, point(Y, "p"), 0, seed=1)) == 0
    a = simulate_coupled(m, env, point(Y, "p"), 6, seed=1)
    b = simulate_coupled(m, env, point(Y, "p"), 6, seed=99)
    assert [s.y for s in a] == [s.y for s in b] == ["q", "p"] * 3


# -- interpretations ----------------------------------------------------------------------


def test_to_filtering_examples(three_state):
    _, i = three_state
    kappa = to_filtering(i.model).kappa
    for hj, si in itertools.product(("h1", "h2"), ("s1", "s2")):
        assert kappa((hj, si), hj) == (1 if hj[1] == si[1] else 0)
    H = FinSpace("H", ("h",))
    phi = Kernel(H, C, [(Fraction(1, 4), Fraction(3, 4))])
    assert to_filtering(InferenceModel(H, phi)).kappa.column("h") == {("h", "c0"): Fraction(1, 4), ("h", "c1"): Fraction(3, 4)}
    flat = Kernel(A, C, [(Fraction(1, 3), Fraction(2, 3))] * 2)
    assert to_filtering(InferenceModel(A, flat)).kappa.column("a1") == {("a1", "c0"): Fraction(1, 3), ("a1", "c1"): Fraction(2, 3)}


def test_predictives_examples(three_state):
    _, i = three_state
    p = predictives(i)
    assert p.psi_S.column("y1") == {"s1": 1}
    H = FinSpace("H", ("u", "v"))
    kappa = Kernel.from_function(H, product(H, C), lambda h: ("v", "c1") if h == "u" else ("u", "c0"))
    one = Interpretation(Kernel.from_function(A, H, lambda a: "u"), FilteringModel(H, kappa))
    q = predictives(one)
    assert q.psi_SHH.column("a0") == {("u", "v", "c1"): 1}
    assert q.psi_SH.column("a0") == {("v", "c1"): 1}
    assert q.psi_S.column("a0") == {"c1": 1}


def test_full_support_pair_is_inconsistent():
    doc = load_spec("full_support_2state.spec")
    assert not check_inference(doc.machine, doc.interpretation).consistent


def test_positive_model_has_no_impossible_inputs():
    rng = random.Random(0)
    m = randgen.machine(rng)
    i = randgen.inference_interpretation(rng, m)
    phi = Kernel(i.hidden, m.inputs, [randgen.column(rng, len(m.inputs), 0.0) for _ in i.hidden])
    positive = Interpretation(i.psi, InferenceModel(i.hidden, phi))
    assert all(subjectively_impossible_inputs(positive, y) == set() for y in m.states)


def test_singleton_hidden_space_always_consistent():
    m = randgen.machine(random.Random(1))
    H = FinSpace("H", ("h",))
    assert check_filtering(m, trivial_interpretation(m, H, point(H, "h"))).consistent


def test_propagate_conflict_on_full_support():
    doc = load_spec("full_support_2state.spec")
    H = doc.model.hidden
    try:
        propagate(doc.machine, doc.model, {"y0": dist(H, {"h0": "1/3", "h1": "2/3"})})
    except BeliefConflict as exc:
        # the first posterior from y0 under s0 is (3/5, 2/5) and lands back on the seeded y0
        assert exc.state == "y0"
        assert exc.belief_a == (Fraction(1, 3), Fraction(2, 3))
        assert exc.belief_b == (Fraction(3, 5), Fraction(2, 5))
    else:
        raise AssertionError("expected a conflict")


def test_propagate_fixed_point():
    doc = load_spec("full_support_2state.spec")
    H, S = doc.model.hidden, doc.machine.inputs
    flat = InferenceModel(H, Kernel(H, S, [(Fraction(1, 4), Fraction(3, 4))] * 2))
    seed = dist(H, {"h0": "2/7", "h1": "5/7"})
    result = propagate(doc.machine, flat, {"y0": seed})
    assert result.psi.cols == (seed.cols[0],) * 2


def test_conjugate_form_constant_belief_under_flat_model(three_state_det):
    m, i = three_state_det
    flat = InferenceModel(i.hidden, Kernel(i.hidden, m.inputs, [(Fraction(1, 2), Fraction(1, 2))] * 2))
    constant = Kernel(m.states, i.hidden, [(Fraction(1, 3), Fraction(2, 3))] * 3)
    assert check_conjugate_form(m, Interpretation(constant, flat)).consistent


@given(st.integers(0, 2**32 - 1))
def test_impossible_input_rows_are_free(seed):
    doc = load_spec("three_state.spec")
    m, i = doc.machine, doc.interpretation
    rng = random.Random(seed)
    cols = list(m.gamma.cols)
    for y, s in (("y1", "s2"), ("y2", "s1")):
        cols[m.gamma.src.index((y, s))] = tuple(randgen.column(rng, 3, 0.5))
    changed = Machine(m.states, m.inputs, Kernel(m.gamma.src, m.gamma.dst, cols))
    assert check_inference(changed, i).consistent


# -- joint beliefs --------------------------------------------------------------------------


def test_iterate_model_examples(three_state):
    _, i = three_state
    kappa = to_filtering(i.model)
    assert iterate_model(kappa, 0) == identity(i.hidden)
    assert iterate_model(kappa, 1) == kappa.kappa
    assert iterate_model(kappa, 2).column("h1") == {("h1", "s1", "s1"): 1}


def test_joint_beliefs_example(three_state):
    _, i = three_state
    joint = joint_beliefs(i, 2)
    assert joint.kernel.column("y0") == {("s1", "s1", "h1"): Fraction(1, 2), ("s2", "s2", "h2"): Fraction(1, 2)}
    # a point belief only sees what its own hidden value emits
    assert joint.kernel.column("y2") == {("s2", "s2", "h2"): 1}


def test_one_step_conditional_on_consistent_machine(three_state_det):
    m, i = three_state_det
    assert check_filtering(m, i).consistent
    assert verify_filtering_conditional(m, i, 1).consistent


# -- coin machines ------------------------------------------------------------------------


def test_counting_examples():
    assert counting_step(counting_step(CountingState(3, 5), 1), -1) == CountingState(4, 6)
    assert beta_predictive(CountingState(1, 1)).column() == {1: Fraction(1, 2), -1: Fraction(1, 2)}
    assert beta_predictive(CountingState(3, 5)).column() == {1: Fraction(3, 8), -1: Fraction(5, 8)}
    assert beta_update_check(CountingState(1, 1), 1)
    assert beta_update_check(CountingState(4, 2), -1)
    assert beta_posterior(BetaBelief(4, 2), -1) == BetaBelief(4, 3)


def test_predictive_martingale():
    for i in range(1, 60):
        for j in range(1, 61 - i):
            pred = beta_predictive(CountingState(i, j))
            after = sum(pred(s) * beta_predictive(counting_step(CountingState(i, j), s))(1) for s in SIGNS)
            assert after == Fraction(i, i + j)


def test_difference_examples():
    assert diff_step(DiffState(0), 1) == DiffState(1)
    assert diff_step(DiffState(0), -1) == DiffState(-1)
    k = DiffState(2)
    for _ in range(3):
        k = diff_step(k, -1)
    assert k == DiffState(-1)
    assert check_diff_consistency(1).checked_constraints == 2 * 2 * 2
    assert check_diff_consistency(10).consistent


def test_machine_map_examples():
    assert machine_map_g(CountingState(1, 1)) == DiffState(0)
    assert machine_map_g(CountingState(4, 1)) == DiffState(3)
    assert machine_map_g(CountingState(2, 5)) == DiffState(-3)
    assert verify_intertwiner(1) and verify_intertwiner(8)


def test_pulled_back_value():
    i = pulled_back_interpretation(3)
    assert i.psi("h+1", CountingState(3, 1)) == Fraction(9, 10)
    assert counting_machine(2).states.elements[-1] == "outside"


def test_power_sequence_layout():
    S = FinSpace("S", ("s1", "s2"))
    assert power(S, 2).elements == (("s1", "s1"), ("s1", "s2"), ("s2", "s1"), ("s2", "s2"))
    assert join((("s1", "s2"), "h"), (power(S, 2), FinSpace("H", ("h",)))) == ("s1", "s2", "h")
