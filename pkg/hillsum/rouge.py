#!/usr/bin/env python3

import logging
from collections import Counter

import attr
import pandas

from . import models
from .models import RougeScore

log = logging.getLogger(__name__)

METRICS = ('rouge-1', 'rouge-2', 'rouge-l')
TRUNCATE_AT = 75


class LengthMismatch(models.Error):
    pass


def _one_of(*choices):
    def _validate(instance, attribute, value):
        if value not in choices:
            raise models.ConfigError(f'{attribute.name} must be one of {choices}, got {value!r}')
    return _validate


@attr.s(frozen=True, slots=True)
class EvalProtocol:
    """ f1 for headline generation, truncated recall for DUC style data """

    variant = attr.ib(default='f1', validator=_one_of('f1', 'truncated_recall_75'))
    multi_ref = attr.ib(default='max', validator=_one_of('max', 'average'))
    lowercase = attr.ib(default=True, converter=bool)

    @property
    def headline(self):
        """ The field a report is read by """
        return 'f1' if self.variant == 'f1' else 'recall'

    def __str__(self):
        return f'{self.variant}/{self.multi_ref}'


def _score(matches, candidate_total, reference_total):
    precision = matches / candidate_total if candidate_total else 0.0
    recall = matches / reference_total if reference_total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return RougeScore(precision, recall, f1)


def ngrams(tokens, order):
    return Counter(tuple(tokens[i:i + order]) for i in range(len(tokens) - order + 1))


def rouge_n(candidate, reference, order=1):
    """ Clipped n-gram overlap """
    if order not in (1, 2):
        raise models.ConfigError(f'rouge order must be 1 or 2, got {order}')
    candidate_grams = ngrams(tuple(candidate), order)
    reference_grams = ngrams(tuple(reference), order)
    matches = sum((candidate_grams & reference_grams).values())
    return _score(matches, sum(candidate_grams.values()), sum(reference_grams.values()))


def lcs_length(a, b):
    """ Longest common subsequence, one row of the table kept at a time """
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token in a:
        current = [0]
        for j, other in enumerate(b, start=1):
            if token == other:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(candidate, reference):
    return _score(lcs_length(tuple(candidate), tuple(reference)), len(candidate), len(reference))


def truncate(candidate, limit=TRUNCATE_AT):
    """ Cut the space-joined candidate at limit characters, a partial last token is dropped """
    text = models.join(candidate)
    if len(text) <= limit:
        return tuple(candidate)
    cut = text[:limit]
    if text[limit] != ' ':
        # the character after the cut belongs to the same token
        cut = cut.rsplit(' ', 1)[0] if ' ' in cut else ''
    return tuple(cut.split())


def truncate_75(candidate):
    return truncate(candidate, TRUNCATE_AT)


def score_instance(candidate, references, protocol):
    """ ::return:: {metric: RougeScore} aggregated over the references """
    if protocol.lowercase:
        candidate = tuple(token.lower() for token in candidate)
        references = [tuple(token.lower() for token in ref) for ref in references]
    if protocol.variant == 'truncated_recall_75':
        candidate = truncate_75(candidate)

    result = {}
    for metric in METRICS:
        if metric == 'rouge-l':
            scores = [rouge_l(candidate, ref) for ref in references]
        else:
            scores = [rouge_n(candidate, ref, int(metric[-1])) for ref in references]

        if protocol.multi_ref == 'max':
            # the reference maximizing the headline field gives the whole triple
            result[metric] = max(scores, key=lambda score: getattr(score, protocol.headline))
        else:
            result[metric] = RougeScore(*(sum(field) / len(scores) for field in zip(*scores)))
    return result


def evaluate(dataset, summaries, protocol=EvalProtocol()):
    """ Mean of per-instance ROUGE over the dataset.
    ::return:: DataFrame indexed by metric with precision, recall, f1,
    avg_len_words, n_instances and protocol columns
    """
    if len(summaries) != len(dataset):
        raise LengthMismatch(f'{len(summaries)} summaries for {len(dataset)} records')
    if not dataset.has_references:
        raise LengthMismatch('every record needs at least one reference to be evaluated')

    per_instance = [score_instance(summary, record.references, protocol)
                    for record, summary in zip(dataset, summaries)]

    count = len(per_instance)
    avg_len = sum(len(summary) for summary in summaries) / count if count else 0.0
    rows = []
    for metric in METRICS:
        fields = [instance[metric] for instance in per_instance]
        mean = [sum(values) / count if count else 0.0 for values in zip(*fields)] or [0.0] * 3
        rows.append(dict(metric=metric, precision=mean[0], recall=mean[1], f1=mean[2],
                         avg_len_words=avg_len, n_instances=count, protocol=str(protocol)))

    log.info(f'Evaluated {count} instances with {protocol}')
    return pandas.DataFrame(rows).set_index('metric')
