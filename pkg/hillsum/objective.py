#!/usr/bin/env python3

import math, logging
from collections import namedtuple

import attr

from . import models
from .models import ObjectiveValue, GAMMA

log = logging.getLogger(__name__)

NEG_INFINITY = float('-inf')
LM_MODES = ('bidirectional', 'forward_only', 'none')

INFEASIBLE = ObjectiveValue(NEG_INFINITY, None, None, False)

Scorers = namedtuple('Scorers', 'forward backward similarity', defaults=(None, None, None))


def _positive_length(instance, attribute, value):
    if value < 1:
        raise models.ConfigError(f'{attribute.name} must be >= 1, got {value}')


def _non_negative(instance, attribute, value):
    if value < 0:
        raise models.ConfigError(f'{attribute.name} must be >= 0, got {value}')


def _lm_mode(instance, attribute, value):
    if value not in LM_MODES:
        raise models.ConfigError(f'lm_mode must be one of {LM_MODES}, got {value!r}')


@attr.s(frozen=True, slots=True)
class ObjectiveConfig:
    """ f(y; x, s) = f_lm(y) * f_sim(y; x) ** gamma * f_len(y; s) """

    target_length = attr.ib(converter=int, validator=_positive_length)
    gamma = attr.ib(default=GAMMA, converter=float, validator=_non_negative)
    use_similarity = attr.ib(default=True, converter=bool)
    lm_mode = attr.ib(default='bidirectional', validator=_lm_mode)

    def __attrs_post_init__(self):
        if not self.use_similarity and self.lm_mode == 'none':
            raise models.ConfigError('objective without fluency nor similarity is constant')

    def retarget(self, target_length):
        return attr.evolve(self, target_length=target_length)


def score(config, scorers, x, y, source_vector=None):
    """ Log-space objective of candidate y for source x.
    Infeasible lengths return -inf before any scorer runs.
    """
    if not x:
        raise models.ConfigError('empty source sentence')
    if len(y) != config.target_length:
        return INFEASIBLE

    log_score = 0.0
    f_lm = f_sim = None

    if config.lm_mode == 'bidirectional':
        ln_lm = (scorers.forward.log_prob(y) + scorers.backward.log_prob(y)) / (2 * len(y))
        log_score += ln_lm
        f_lm = math.exp(ln_lm)
    elif config.lm_mode == 'forward_only':
        ln_lm = scorers.forward.log_prob(y) / len(y)
        log_score += ln_lm
        f_lm = math.exp(ln_lm)

    if config.use_similarity:
        model = scorers.similarity
        if source_vector is None:
            source_vector = model.embed(x)
        f_sim = model.cosine(source_vector, model.embed(y))
        log_score += config.gamma * math.log(f_sim)

    return ObjectiveValue(log_score, f_lm, f_sim, True)


def compare(a, b):
    """ -1, 0 or 1 ; -inf is below every feasible value """
    if a.log_score > b.log_score:
        return 1
    if a.log_score < b.log_score:
        return -1
    return 0


class Objective:
    """ A config bound to its scorers """

    def __init__(self, config, scorers):
        if config.lm_mode != 'none' and scorers.forward is None:
            raise models.ConfigError('fluency term needs a forward language model')
        if config.lm_mode == 'bidirectional' and scorers.backward is None:
            raise models.ConfigError('bidirectional fluency needs a backward language model')
        if config.use_similarity and scorers.similarity is None:
            raise models.ConfigError('similarity term needs a similarity model')
        self.config = config
        self.scorers = scorers

    @property
    def target_length(self):
        return self.config.target_length

    def retarget(self, target_length):
        if target_length == self.config.target_length:
            return self
        return Objective(self.config.retarget(target_length), self.scorers)

    def __call__(self, x, y):
        return score(self.config, self.scorers, x, y)

    def bind(self, x):
        """ Scoring function of candidates for one source, e(x) computed once """
        source_vector = self.scorers.similarity.embed(x) if self.config.use_similarity else None

        def _score(y):
            return score(self.config, self.scorers, x, y, source_vector)
        return _score
