"""The two countably infinite coin machines, checked exactly on finite windows.

* The counting machine keeps ``(i, j)`` = (1 + number of +1 inputs, 1 + number
  of -1 inputs) and is read as a Beta(i, j) belief about a coin's bias ``h``.
* The difference machine keeps ``k = #(+1) - #(-1)`` and is read as a belief
  over two coins, one landing +1 with probability 3/4 and one with 1/4.
* ``g(i, j) = i - j`` maps the first machine onto the second, so the second
  machine's interpretation pulls back to the first.

Windows truncate the state space. Transitions that would leave the window go
to a single ``OUTSIDE`` sink, and every constraint touching the sink is
skipped, so exactly the constraints shared with the infinite machine are
checked.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Callable

from .finstoch import FinSpace, Kernel, compose, identity, kernels_equal, product, tensor, uniform_fill
from .interpretation import ConsistencyReport, InferenceModel, Interpretation, Violation, check_inference
from .machine import Machine

__all__ = [
    "CountingState",
    "BetaBelief",
    "DiffState",
    "TwoPointBelief",
    "SIGNS",
    "COIN_PAIR",
    "OUTSIDE",
    "ADOPTED",
    "LITERAL",
    "counting_step",
    "beta_predictive",
    "beta_posterior",
    "beta_update_check",
    "check_counting_consistency",
    "diff_step",
    "diff_posterior",
    "printed_diff_posterior",
    "coin_pair_model",
    "difference_machine",
    "difference_interpretation",
    "check_diff_consistency",
    "machine_map_g",
    "verify_intertwiner",
    "intertwiner_mismatches",
    "counting_machine",
    "pulled_back_interpretation",
    "pullback_interpretation",
]

SIGNS = FinSpace("S", (1, -1))
COIN_PAIR = FinSpace("H", ("h+1", "h-1"))
OUTSIDE = "outside"
DEFAULT_DIFF_WINDOW = 64

# Likelihood of s under bias h is h**a * (1 - h)**b with (a, b) = CONVENTION[s].
ADOPTED = {1: (1, 0), -1: (0, 1)}
# Transposed pairing: +1 weighted by (1 - h). Breaks conjugacy with counting_step.
LITERAL = {1: (0, 1), -1: (1, 0)}
CONVENTIONS = {"adopted": ADOPTED, "literal": LITERAL}


@dataclass(frozen=True, order=True)
class CountingState:
    i: int
    j: int

    def __post_init__(self):
        if self.i < 1 or self.j < 1:
            raise ValueError("counts start at 1")

    def __str__(self) -> str:
        return f"({self.i},{self.j})"


@dataclass(frozen=True, order=True)
class BetaBelief:
    alpha: int
    beta: int

    def __post_init__(self):
        if self.alpha < 1 or self.beta < 1:
            raise ValueError("Beta hyperparameters must be at least 1")

    def __str__(self) -> str:
        return f"Beta({self.alpha},{self.beta})"


@dataclass(frozen=True, order=True)
class DiffState:
    k: int

    def __str__(self) -> str:
        return str(self.k)


@dataclass(frozen=True)
class TwoPointBelief:
    p_plus: Fraction

    def __post_init__(self):
        if not 0 <= self.p_plus <= 1:
            raise ValueError("p_plus must lie in [0, 1]")

    @property
    def p_minus(self) -> Fraction:
        return 1 - self.p_plus

    def as_column(self) -> tuple:
        return (self.p_plus, self.p_minus)


def _convention(convention: str | dict) -> dict:
    return CONVENTIONS[convention] if isinstance(convention, str) else convention


def _check_sign(s) -> None:
    if s not in (1, -1):
        raise ValueError(f"input must be +1 or -1, got {s!r}")


# -- counting machine -------------------------------------------------------


def counting_step(state: CountingState, s: int) -> CountingState:
    _check_sign(s)
    return CountingState(state.i + 1, state.j) if s == 1 else CountingState(state.i, state.j + 1)


def _beta_fn(a: int, b: int) -> Fraction:
    """B(a, b) for positive integers, exactly."""
    return Fraction(factorial(a - 1) * factorial(b - 1), factorial(a + b - 1))


def beta_predictive(state: CountingState, convention: str | dict = "adopted") -> Kernel:
    """Predictive distribution of the next input under a Beta(i, j) belief."""
    conv = _convention(convention)
    b0 = _beta_fn(state.i, state.j)
    probs = {s: _beta_fn(state.i + a, state.j + b) / b0 for s, (a, b) in conv.items()}
    return Kernel.from_columns(product(), SIGNS, {(): probs})


def beta_posterior(belief: BetaBelief, s: int, convention: str | dict = "adopted") -> BetaBelief:
    """Conjugate update: h**a (1-h)**b times Beta(alpha, beta) is proportional to Beta(alpha+a, beta+b)."""
    _check_sign(s)
    a, b = _convention(convention)[s]
    return BetaBelief(belief.alpha + a, belief.beta + b)


def _density_term(coef: Fraction, belief: BetaBelief, a: int = 0, b: int = 0) -> tuple:
    # coef * h**(alpha-1+a) * (1-h)**(beta-1+b) / B(alpha, beta), as (coefficient, exponents)
    return coef / _beta_fn(belief.alpha, belief.beta), belief.alpha - 1 + a, belief.beta - 1 + b


def beta_update_check(state: CountingState, s: int, convention: str | dict = "adopted") -> bool:
    """Both sides of the conjugate-prior equation at ``(state, s)`` as monomials in ``h``.

    Left: prior density times likelihood. Right: predictive probability of
    ``s`` times the density at the machine's next state. Equal iff the
    machine's update is the exact Bayes update.
    """
    a, b = _convention(convention)[s]
    prior = BetaBelief(state.i, state.j)
    nxt = counting_step(state, s)
    lhs = _density_term(Fraction(1), prior, a, b)
    rhs = _density_term(beta_predictive(state, convention)(s), BetaBelief(nxt.i, nxt.j))
    return lhs == rhs


def check_counting_consistency(window: int, convention: str | dict = "adopted") -> ConsistencyReport:
    """Compare Bayes-posterior hyperparameters with the machine's next state for all i, j <= window."""
    report = ConsistencyReport(f"counting-conjugacy ({convention if isinstance(convention, str) else 'custom'})")
    for i in range(1, window + 1):
        for j in range(1, window + 1):
            y = CountingState(i, j)
            for s in SIGNS:
                y2 = counting_step(y, s)
                post = beta_posterior(BetaBelief(i, j), s, convention)
                for name, got, want in (("alpha", post.alpha, y2.i), ("beta", post.beta, y2.j)):
                    report.checked_constraints += 1
                    if got != want:
                        report.violations.append(Violation(y, s, y2, name, Fraction(got), Fraction(want)))
    return report


# -- difference machine -----------------------------------------------------


def diff_step(state: DiffState, s: int) -> DiffState:
    _check_sign(s)
    return DiffState(state.k + s)


def diff_posterior(state: DiffState | int, window: int = DEFAULT_DIFF_WINDOW) -> TwoPointBelief:
    """Belief in the +1-biased coin after a net count ``k``: ``3**k / (1 + 3**k)``."""
    k = state.k if isinstance(state, DiffState) else state
    if abs(k) > window:
        raise OverflowError(f"|k| = {abs(k)} exceeds the window {window}")
    odds = Fraction(3) ** k
    return TwoPointBelief(odds / (1 + odds))


def printed_diff_posterior(k: int) -> tuple[Fraction, Fraction]:
    """Alternative closed form ``(1/(2(1+3**k)), 1/(2(1+3**-k)))``, kept for comparison only.

    It is not a distribution (the two values sum to 1/2 at ``k = 0``).
    """
    t = Fraction(3) ** k
    return 1 / (2 * (1 + t)), 1 / (2 * (1 + 1 / t))


def coin_pair_model() -> InferenceModel:
    q, r = Fraction(3, 4), Fraction(1, 4)
    phi = Kernel.from_columns(COIN_PAIR, SIGNS, {"h+1": {1: q, -1: r}, "h-1": {1: r, -1: q}})
    return InferenceModel(COIN_PAIR, phi)


def _windowed(states: list, step: Callable) -> Machine:
    Y = FinSpace("Y", tuple(states) + (OUTSIDE,))
    inside = set(states)

    def nxt(y, s):
        if y == OUTSIDE:
            return OUTSIDE
        y2 = step(y, s)
        return y2 if y2 in inside else OUTSIDE

    return Machine.from_function(Y, SIGNS, nxt)


def difference_machine(window: int) -> Machine:
    """States -window..window plus the ``OUTSIDE`` sink."""
    return _windowed([DiffState(k) for k in range(-window, window + 1)], diff_step)


def difference_interpretation(m: Machine, printed: bool = False) -> Interpretation:
    cols = []
    for y in m.states:
        if y == OUTSIDE:
            cols.append(uniform_fill(COIN_PAIR))
        elif printed:
            p_plus = printed_diff_posterior(y.k)[0]
            cols.append(TwoPointBelief(p_plus).as_column())
        else:
            cols.append(diff_posterior(y).as_column())
    return Interpretation(Kernel(m.states, COIN_PAIR, cols), coin_pair_model())


def check_diff_consistency(window: int, printed: bool = False) -> ConsistencyReport:
    """Run the inference check on the windowed difference machine.

    ``printed=True`` substitutes the first value of :func:`printed_diff_posterior`
    as the +1 belief, with the -1 belief taken as its complement.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    m = difference_machine(window)
    return check_inference(m, difference_interpretation(m, printed), ignore={OUTSIDE})


# -- machine map and pullback -------------------------------------------------


def machine_map_g(state: CountingState) -> DiffState:
    return DiffState(state.i - state.j)


def _counting_states(n: int) -> list[CountingState]:
    return [CountingState(i, j) for i in range(1, n + 1) for j in range(1, n + 1)]


def _diff_space(name: str, values) -> FinSpace:
    return FinSpace(name, tuple(sorted(set(values))))


def _intertwiner_sides(window: int, g: Callable) -> tuple[Kernel, Kernel]:
    Y0 = FinSpace("Y0", tuple(_counting_states(window)))
    Y0_next = FinSpace("Y0+", tuple(_counting_states(window + 1)))
    D = _diff_space("D", (g(y) for y in Y0))
    E = _diff_space("E", [g(y) for y in Y0_next] + [diff_step(d, s) for d in D for s in SIGNS])
    gamma0 = Kernel.from_function(product(Y0, SIGNS), Y0_next, lambda e: counting_step(*e))
    gamma1 = Kernel.from_function(product(D, SIGNS), E, lambda e: diff_step(*e))
    lhs = compose(gamma0, Kernel.from_function(Y0_next, E, g))
    rhs = compose(tensor(Kernel.from_function(Y0, D, g), identity(SIGNS)), gamma1)
    return lhs, rhs


def verify_intertwiner(window: int, g: Callable = machine_map_g) -> bool:
    """``gamma0 ; g == (g ⊗ id) ; gamma1`` as kernels on ``{1..window}^2 ⊗ S``."""
    if window < 1:
        raise ValueError("window must be at least 1")
    return kernels_equal(*_intertwiner_sides(window, g))


def intertwiner_mismatches(window: int, g: Callable = machine_map_g) -> list[tuple]:
    lhs, rhs = _intertwiner_sides(window, g)
    return [a for a, l_col, r_col in zip(lhs.src.elements, lhs.cols, rhs.cols) if l_col != r_col]


def counting_machine(window: int) -> Machine:
    """States ``{1..window}^2`` plus the ``OUTSIDE`` sink."""
    return _windowed(_counting_states(window), counting_step)


def pulled_back_interpretation(window: int) -> Interpretation:
    """Belief map ``g ; psi1`` on the windowed counting machine, with the coin-pair model."""
    m = counting_machine(window)
    inside = FinSpace("Y0", tuple(y for y in m.states if y != OUTSIDE))
    D = _diff_space("D", (machine_map_g(y) for y in inside))
    psi1 = Kernel(D, COIN_PAIR, [diff_posterior(d).as_column() for d in D])
    pulled = compose(Kernel.from_function(inside, D, machine_map_g), psi1)
    cols = [pulled.cols[inside.index(y)] if y != OUTSIDE else uniform_fill(COIN_PAIR) for y in m.states]
    return Interpretation(Kernel(m.states, COIN_PAIR, cols), coin_pair_model())


def pullback_interpretation(window: int) -> ConsistencyReport:
    """Check the pulled-back interpretation on the windowed counting machine."""
    if window < 1:
        raise ValueError("window must be at least 1")
    return check_inference(counting_machine(window), pulled_back_interpretation(window), ignore={OUTSIDE})
