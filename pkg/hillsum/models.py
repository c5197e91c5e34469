#!/usr/bin/env python3

from collections import namedtuple

""" Records shared by every module of hillsum.
A sentence is a plain tuple of token strings all the way through; the
records below carry the results the modules hand to each other. """

# reserved tokens of the language models
BOS = '<s>'
EOS = '</s>'
UNK = '<unk>'

# search defaults
GAMMA = 12.0
BETA_T = 0.1
BETA_R = 0.035
EPSILON = 1e-6
EXHAUSTIVE_CAP = 2_000_000


class Error(Exception):
    """ Base class of every error raised on purpose by hillsum """


class ConfigError(Error):
    pass


def round_half_up(value):
    """ 7.5 -> 8, 0.175 -> 0 ; python's round() would go to the even number """
    return int(value + 0.5) if value >= 0 else -int(-value + 0.5)


def join(tokens):
    return ' '.join(tokens)


Record = namedtuple('Record', 'source references')


class ParallelDataset:
    """ Source sentences with zero (plain format) or more references """

    def __init__(self, records):
        self.records = list(records)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __repr__(self):
        return f'ParallelDataset({len(self.records)} records)'

    @property
    def sources(self):
        return [record.source for record in self.records]

    @property
    def has_references(self):
        return bool(self.records) and all(record.references for record in self.records)


FluencyScore = namedtuple('FluencyScore', 'log_prob_forward log_prob_backward token_count f_lm')

SentenceVector = namedtuple('SentenceVector', 'components coverage')

ObjectiveValue = namedtuple('ObjectiveValue', 'log_score f_lm f_sim feasible')

SearchResult = namedtuple('SearchResult', 'best_mask best_value trace evaluations',
                          defaults=(None, 0))

# one accepted move of the hill climber, step 0 being the random start
TraceStep = namedtuple('TraceStep', 'restart step score mask')

RougeScore = namedtuple('RougeScore', 'precision recall f1')

PositionHistogram = namedtuple('PositionHistogram', 'bins counted')


class aioObject(object):
    """ Inheriting this class allows you to define an async __init__.
    So you can create objects by doing something like 'await MyClass(params)'
    https://stackoverflow.com/questions/33128325/how-to-set-class-attribute-with-await-in-init
    """
    async def __new__(cls, *a, **kw):
        instance = super().__new__(cls)
        await instance.__init__(*a, **kw)
        return instance

    async def __init__(self):
        pass
