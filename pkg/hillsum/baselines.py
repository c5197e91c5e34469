#!/usr/bin/env python3

import logging
from collections import Counter

import attr
import pandas

from . import models, rouge
from .models import PositionHistogram, RougeScore
from .rouge import LengthMismatch

log = logging.getLogger(__name__)

KINDS = ('words_n', 'percent_p', 'chars_c')
# Lead-N-8, Lead-P-50, Lead-C-75
PREFIXES = {'words_n': 'N', 'percent_p': 'P', 'chars_c': 'C'}


class OverlappingBrackets(models.Error):
    pass


def _check_parameter(instance, attribute, value):
    if instance.kind == 'percent_p':
        if not 0 < value <= 100:
            raise models.ConfigError(f'Lead-P needs a percentage in (0, 100], got {value}')
    elif value < 1:
        raise models.ConfigError(f'Lead-{PREFIXES[instance.kind]} needs a parameter >= 1, got {value}')


@attr.s(frozen=True, slots=True)
class LeadSpec:

    kind = attr.ib(validator=attr.validators.in_(KINDS))
    parameter = attr.ib(validator=_check_parameter)

    @classmethod
    def parse(cls, text):
        """ 'N-8', 'P-50' or 'C-75' """
        letter, _, value = text.upper().partition('-')
        kinds = {prefix: kind for kind, prefix in PREFIXES.items()}
        if letter not in kinds or not value:
            raise models.ConfigError(f'expected N-<words>, P-<percent> or C-<chars>, got {text!r}')
        try:
            number = float(value)
        except ValueError:
            raise models.ConfigError(f'bad Lead parameter {value!r}')
        if kinds[letter] != 'percent_p':
            number = int(number)
        return cls(kinds[letter], number)

    def __str__(self):
        value = self.parameter
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        return f'Lead-{PREFIXES[self.kind]}-{value}'


def lead(x, spec):
    """ A prefix of the source sentence """
    x = tuple(x)
    if not x:
        raise models.ConfigError('empty source sentence')
    if spec.kind == 'words_n':
        return x[:min(int(spec.parameter), len(x))]
    if spec.kind == 'percent_p':
        return x[:max(1, models.round_half_up(spec.parameter / 100 * len(x)))]
    return rouge.truncate(x, int(spec.parameter))


SHORT = {'rouge-1': 'r1', 'rouge-2': 'r2', 'rouge-l': 'rl'}


def score_columns(report, field):
    """ r1, r2, rl hold the headline field; r1_precision, r1_recall, r1_f1 ... the whole triple """
    columns = {}
    for metric, short in SHORT.items():
        columns[short] = report.loc[metric, field]
        for name in RougeScore._fields:
            columns[f'{short}_{name}'] = report.loc[metric, name]
    return columns


def lead_sweep(dataset, kind, params, protocol=rouge.EvalProtocol()):
    """ One evaluation per Lead parameter
    ::return:: DataFrame with param, the score_columns of each metric and avg_len
    """
    if not params:
        raise models.ConfigError('lead sweep needs at least one parameter')
    if kind not in ('words_n', 'percent_p'):
        raise models.ConfigError(f'lead sweep runs over words_n or percent_p, got {kind!r}')

    rows = []
    for param in sorted(params):
        spec = LeadSpec(kind, param)
        summaries = [lead(source, spec) for source in dataset.sources]
        report = rouge.evaluate(dataset, summaries, protocol)
        rows.append(dict(param=param, **score_columns(report, protocol.headline),
                         avg_len=report.loc['rouge-1', 'avg_len_words']))
        log.debug(f'{spec}: {rows[-1]}')
    return pandas.DataFrame(rows)


def align(summary, source):
    """ Source index of every summary token; each token takes the leftmost
    unused occurrence, unmatched tokens get None """
    used = set()
    positions = []
    for token in summary:
        match = next((i for i, other in enumerate(source) if other == token and i not in used), None)
        if match is not None:
            used.add(match)
        positions.append(match)
    return positions


def positional_bias(sources, summaries):
    """ Share of summary tokens taken from each quarter of the source """
    if len(sources) != len(summaries):
        raise LengthMismatch(f'{len(summaries)} summaries for {len(sources)} sources')

    counts = Counter()
    skipped = 0
    for source, summary in zip(sources, summaries):
        n = len(source)
        for position in align(summary, source):
            if position is None:
                skipped += 1
                continue
            counts[min(3, (4 * position) // n)] += 1

    if skipped:
        log.info(f'{skipped} summary tokens not found in their source')
    total = sum(counts.values())
    bins = tuple(counts[b] / total if total else 0.0 for b in range(4))
    return PositionHistogram(bins, total)


def extractiveness(dataset):
    """ Share of reference tokens also found in the source, clipped counts """
    found = total = 0
    for record in dataset:
        source = Counter(record.source)
        for reference in record.references:
            found += sum((Counter(reference) & source).values())
            total += len(reference)
    return found / total if total else 0.0


def _check_brackets(brackets):
    ordered = sorted(brackets)
    for lo, hi in ordered:
        if lo >= hi:
            raise OverlappingBrackets(f'empty bracket [{lo}, {hi})')
    for (lo_a, hi_a), (lo_b, hi_b) in zip(ordered, ordered[1:]):
        if lo_b < hi_a:
            raise OverlappingBrackets(f'[{lo_a}, {hi_a}) overlaps [{lo_b}, {hi_b})')
    return ordered


def bracket_report(runs, dataset, protocol, brackets):
    """ Group runs by their average output length, brackets are [lo, hi)
    ::return:: ({(lo, hi): DataFrame}, [unassigned run names])
    """
    brackets = _check_brackets(brackets)
    grouped = {bracket: [] for bracket in brackets}
    unassigned = []

    for name, summaries in runs:
        report = rouge.evaluate(dataset, summaries, protocol)
        avg_len = report.loc['rouge-1', 'avg_len_words']
        bracket = next(((lo, hi) for lo, hi in brackets if lo <= avg_len < hi), None)
        if bracket is None:
            log.warning(f'Run {name} with average length {avg_len:.1f} is outside every bracket')
            unassigned.append(name)
            continue
        field = protocol.headline
        grouped[bracket].append(dict(name=name,
                                     r1=report.loc['rouge-1', field],
                                     r2=report.loc['rouge-2', field],
                                     rl=report.loc['rouge-l', field],
                                     avg_len=avg_len))

    tables = {bracket: pandas.DataFrame(rows, columns=['name', 'r1', 'r2', 'rl', 'avg_len'])
              for bracket, rows in grouped.items() if rows}
    return tables, unassigned
