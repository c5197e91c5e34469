#!/usr/bin/env python3

import math, logging, itertools, functools
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import attr
import numpy

from . import models
from .models import SearchResult, TraceStep, BETA_R, BETA_T, EXHAUSTIVE_CAP
from .objective import compare

log = logging.getLogger(__name__)


class InvalidLength(models.Error):
    pass


class NoNeighbor(models.Error):
    pass


class TooLarge(models.Error):

    def __init__(self, count, cap):
        self.count = count
        super().__init__(f'{count} candidate masks above the cap of {cap}')


class SelectionMask(namedtuple('SelectionMask', 'bits')):
    """ Boolean filter over the source positions, the summary keeps the set bits in source order """

    __slots__ = ()

    @classmethod
    def from_positions(cls, n, positions):
        selected = set(positions)
        return cls(tuple(i in selected for i in range(n)))

    @classmethod
    def parse(cls, text):
        return cls(tuple(c == '1' for c in text))

    @property
    def positions(self):
        return tuple(i for i, bit in enumerate(self.bits) if bit)

    @property
    def popcount(self):
        return sum(self.bits)

    def realize(self, x):
        return tuple(token for token, bit in zip(x, self.bits) if bit)

    def __str__(self):
        return ''.join('1' if bit else '0' for bit in self.bits)


def _positive(instance, attribute, value):
    if value <= 0:
        raise models.ConfigError(f'{attribute.name} must be > 0, got {value}')


@attr.s(frozen=True, slots=True)
class SearchBudget:
    """ R restarts of T steps each """

    restarts = attr.ib(converter=int, validator=_positive)
    steps = attr.ib(converter=int, validator=_positive)
    beta_r = attr.ib(default=None)
    beta_t = attr.ib(default=None)

    def override(self, restarts=None, steps=None):
        return attr.evolve(self, restarts=restarts or self.restarts, steps=steps or self.steps)


def derive_budget(n, s, beta_r=BETA_R, beta_t=BETA_T):
    """ R = max(1, round(beta_r * n * s^2)), T = max(1, round(beta_t * n * s^2)) """
    if n < 1 or not 1 <= s <= n:
        raise InvalidLength(f'need 1 <= s <= n, got n={n} s={s}')
    if beta_r <= 0 or beta_t <= 0:
        raise models.ConfigError(f'betas must be > 0, got beta_r={beta_r} beta_t={beta_t}')
    size = n * s * s
    return SearchBudget(max(1, models.round_half_up(beta_r * size)),
                        max(1, models.round_half_up(beta_t * size)),
                        beta_r, beta_t)


def random_mask(n, s, rng):
    """ Uniformly random s-subset of the n positions """
    if not 1 <= s <= n:
        raise InvalidLength(f'need 1 <= s <= n, got n={n} s={s}')
    positions = rng.choice(n, size=s, replace=False)
    return SelectionMask.from_positions(n, positions.tolist())


def swap_neighbor(mask, rng):
    """ Clear one selected position and set one unselected, both uniformly """
    selected = [i for i, bit in enumerate(mask.bits) if bit]
    unselected = [i for i, bit in enumerate(mask.bits) if not bit]
    if not selected or not unselected:
        raise NoNeighbor(f'mask {mask} has no swap neighbor')

    bits = list(mask.bits)
    bits[selected[rng.integers(len(selected))]] = False
    bits[unselected[rng.integers(len(unselected))]] = True
    return SelectionMask(tuple(bits))


def restart_rng(seed, restart):
    """ Generator of one restart; independent of how many restarts run """
    return numpy.random.default_rng([seed, restart])


def check_length(n, s):
    """ s is clamped to n with a warning """
    if n < 1 or s < 1:
        raise InvalidLength(f'need n >= 1 and s >= 1, got n={n} s={s}')
    if s > n:
        log.warning(f'Summary length {s} above source length {n}, using {n}')
        return n
    return s


RestartOutcome = namedtuple('RestartOutcome', 'restart step mask value evaluations trace')


def _climb(x, s, scorer, steps, seed, keep_trace, restart):
    """ One first-choice hill climbing run """
    rng = restart_rng(seed, restart)
    cache = {}

    def evaluate(mask):
        value = cache.get(mask)
        if value is None:
            value = cache[mask] = scorer(mask.realize(x))
            # the neighborhood keeps the popcount, nothing infeasible is ever scored
            assert value.feasible, f'infeasible mask {mask} scored'
        return value

    current = random_mask(len(x), s, rng)
    value = evaluate(current)
    best = RestartOutcome(restart, 0, current, value, 0, None)
    trace = [TraceStep(restart, 0, value.log_score, str(current))] if keep_trace else None

    for step in range(1, steps + 1):
        candidate = swap_neighbor(current, rng)
        candidate_value = evaluate(candidate)
        if compare(candidate_value, value) >= 0:
            current, value = candidate, candidate_value
            if keep_trace:
                trace.append(TraceStep(restart, step, value.log_score, str(current)))
            if value.log_score > best.value.log_score:
                best = best._replace(step=step, mask=current, value=value)

    log.debug(f'restart {restart}: {best.value.log_score:.4f} at step {best.step}, {len(cache)} evaluations')
    return best._replace(evaluations=len(cache), trace=trace)


def fchc(x, s, objective, budget, seed=0, workers=1, trace=False):
    """ First-choice hill climbing with restarts.

    Each restart draws its own random start and accepts a swap neighbor iff
    its score is not lower. The best mask over all restarts is returned,
    ties going to the earliest (restart, step).
    """
    x = tuple(x)
    s = check_length(len(x), s)
    scorer = objective.retarget(s).bind(x)

    if s == len(x):
        mask = SelectionMask((True,) * len(x))
        value = scorer(x)
        steps = [TraceStep(0, 0, value.log_score, str(mask))] if trace else None
        return SearchResult(mask, value, steps, 1)

    run = functools.partial(_climb, x, s, scorer, budget.steps, seed, trace)
    restarts = range(budget.restarts)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, restarts))
    else:
        outcomes = [run(restart) for restart in restarts]

    best = outcomes[0]
    for outcome in outcomes[1:]:
        if outcome.value.log_score > best.value.log_score:
            best = outcome

    steps = [step for outcome in outcomes for step in outcome.trace] if trace else None
    evaluations = sum(outcome.evaluations for outcome in outcomes)
    return SearchResult(best.mask, best.value, steps, evaluations)


def exhaustive_search(x, s, objective, cap=EXHAUSTIVE_CAP):
    """ Score every s-subset of positions.

    combinations() yields the masks as bit strings in descending order
    (1100, 1010, ..., 0011), so keeping the last maximum with >= breaks
    ties towards the smallest bit string.
    """
    x = tuple(x)
    n = len(x)
    if not 1 <= s <= n:
        raise InvalidLength(f'need 1 <= s <= n, got n={n} s={s}')
    count = math.comb(n, s)
    if count > cap:
        raise TooLarge(count, cap)

    scorer = objective.retarget(s).bind(x)
    best_mask = best_value = None
    for positions in itertools.combinations(range(n), s):
        value = scorer(tuple(x[i] for i in positions))
        if best_value is None or value.log_score >= best_value.log_score:
            best_mask, best_value = positions, value

    return SearchResult(SelectionMask.from_positions(n, best_mask), best_value, None, count)


def is_subsequence(summary, source):
    """ Two pointer check that summary keeps source order """
    it = iter(source)
    return all(token in it for token in summary)
