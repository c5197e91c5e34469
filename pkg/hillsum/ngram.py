#!/usr/bin/env python3

import math, logging
from collections import Counter, defaultdict

from . import models
from .models import BOS, EOS, UNK, FluencyScore
from .corpus import EmptyCorpus

log = logging.getLogger(__name__)

ORDER = 4
DISCOUNT = 0.75
DIRECTIONS = ('forward', 'backward')

LN10 = math.log(10)
# ARPA convention for entries that only carry a back-off weight, like <s>
NO_PROB = -99.0


class EmptySequence(models.Error):
    pass


class FormatError(models.Error):

    def __init__(self, offset, reason):
        self.offset = offset
        super().__init__(f'byte {offset}: {reason}')


class NGramLanguageModel:
    """ Back-off n-gram model in natural log space.

    probs maps an n-gram tuple (history + token) to ln p(token | history),
    bows maps a history tuple to its ln back-off weight. Every vocabulary
    token except BOS has a unigram entry, so every lookup ends somewhere.
    Trained models store interpolated Kneser-Ney in this form, which is also
    exactly what an ARPA file holds.
    """

    def __init__(self, order, direction, probs, bows, discount=None):
        if order < 1:
            raise models.ConfigError(f'order must be >= 1, got {order}')
        if direction not in DIRECTIONS:
            raise models.ConfigError(f'unknown direction {direction!r}')
        self.order = order
        self.direction = direction
        self.probs = probs
        self.bows = bows
        self.discount = discount
        self.vocab = frozenset(ngram[0] for ngram in probs if len(ngram) == 1)

    @property
    def predictable(self):
        """ The tokens a distribution p(.|h) is defined over """
        return self.vocab - {BOS}

    def counts(self):
        """ Number of entries per order, as in the ARPA header """
        counts = Counter(len(ngram) for ngram in set(self.probs) | set(self.bows))
        return [counts[k] for k in range(1, self.order + 1)]

    def conditional(self, history, token):
        """ ln p(token | history), history is cut to the last order-1 tokens """
        if token not in self.vocab or token == BOS:
            token = UNK
        history = tuple(history)[-(self.order - 1):] if self.order > 1 else ()
        return _lookup(self.probs, self.bows, history, token)

    def prepare(self, tokens):
        """ Reverse for backward models and pad with order-1 BOS """
        tokens = tuple(tokens)
        if self.direction == 'backward':
            tokens = tokens[::-1]
        return (BOS,) * (self.order - 1) + tokens

    def log_prob(self, tokens):
        """ Sum of ln p(y_i | context) over the tokens, EOS excluded """
        if not tokens:
            raise EmptySequence('cannot score an empty sequence')
        padded = self.prepare(tokens)
        start = self.order - 1
        total = 0.0
        for i in range(start, len(padded)):
            total += self.conditional(padded[i - start:i], padded[i])
        return total

    def save(self, path):
        save(self, path)


def _reversed_if(sentence, direction):
    return tuple(sentence)[::-1] if direction == 'backward' else tuple(sentence)


def train(corpus, order=ORDER, direction='forward', discount=DISCOUNT):
    """ Interpolated Kneser-Ney with a fixed discount.

    Tokens seen once are mapped to UNK before counting; each sentence is
    padded with order-1 BOS and one EOS. The highest order uses raw counts,
    lower orders use continuation counts (number of distinct left extensions).
    """
    if order < 1:
        raise models.ConfigError(f'order must be >= 1, got {order}')
    if direction not in DIRECTIONS:
        raise models.ConfigError(f'unknown direction {direction!r}')
    if not 0 < discount < 1:
        raise models.ConfigError(f'discount must be in (0, 1), got {discount}')

    sentences = [_reversed_if(sentence, direction) for sentence in corpus]
    if not sentences:
        raise EmptyCorpus('cannot train a language model on zero sentences')

    frequency = Counter(token for sentence in sentences for token in sentence)
    vocab = {token for token, count in frequency.items() if count > 1} | {EOS, UNK}

    # raw counts of the highest order
    levels = {order: Counter()}
    for sentence in sentences:
        padded = [BOS] * (order - 1) + [t if t in vocab else UNK for t in sentence] + [EOS]
        for i in range(order - 1, len(padded)):
            levels[order][tuple(padded[i - order + 1:i + 1])] += 1

    # continuation counts for the lower orders
    for k in range(order - 1, 0, -1):
        levels[k] = Counter(ngram[1:] for ngram in levels[k + 1])

    probs = {}
    bows = {}
    uniform = math.log(1.0 / len(vocab))
    for k in range(1, order + 1):
        totals = Counter()
        types = Counter()
        for ngram, count in levels[k].items():
            totals[ngram[:-1]] += count
            types[ngram[:-1]] += 1

        # interpolation weight of each history
        weights = {h: discount * types[h] / totals[h] for h in totals}

        def lower(history, token):
            if k == 1:
                return uniform
            return _lookup(probs, bows, history[1:], token)

        for ngram, count in levels[k].items():
            history, token = ngram[:-1], ngram[-1]
            p = max(count - discount, 0) / totals[history] \
                + weights[history] * math.exp(lower(history, token))
            probs[ngram] = math.log(p)

        if k == 1:
            # the unigram level must cover the whole vocabulary
            for token in vocab:
                if (token,) not in probs:
                    probs[(token,)] = math.log(weights[()]) + uniform
        else:
            for history, weight in weights.items():
                bows[history] = math.log(weight)

    model = NGramLanguageModel(order, direction, probs, bows, discount)
    log.info(f'{direction} {order}-gram model trained on {len(sentences)} sentences, '
             f'vocabulary {len(vocab)}, counts {model.counts()}')
    return model


def _lookup(probs, bows, history, token):
    """ Back off from the longest context until an entry is found """
    backoff = 0.0
    for start in range(len(history) + 1):
        context = history[start:]
        ln_prob = probs.get(context + (token,))
        if ln_prob is not None:
            return backoff + ln_prob
        backoff += bows.get(context, 0.0)
    raise KeyError(token)


def sequence_log_prob(model, tokens):
    return model.log_prob(tokens)


def fluency(forward, backward, tokens):
    """ Inverse bidirectional perplexity
    f_lm = exp((L_fwd + L_bwd) / (2 |y|))
    """
    if forward.direction != 'forward' or backward.direction != 'backward':
        raise models.ConfigError('fluency needs a forward and a backward model')
    fwd = forward.log_prob(tokens)
    bwd = backward.log_prob(tokens)
    count = len(tokens)
    return FluencyScore(fwd, bwd, count, math.exp((fwd + bwd) / (2 * count)))


def save(model, path):
    """ Write the model as an ARPA file, the direction in a header comment """
    entries = defaultdict(dict)
    for ngram, ln_prob in model.probs.items():
        entries[len(ngram)][ngram] = ln_prob
    for history in model.bows:
        entries[len(history)].setdefault(history, None)

    with open(path, 'w', encoding='utf-8') as f:
        f.write(f'; direction={model.direction}\n')
        if model.discount is not None:
            f.write(f'; discount={model.discount}\n')
        f.write('\n\\data\\\n')
        for k in range(1, model.order + 1):
            f.write(f'ngram {k}={len(entries[k])}\n')

        for k in range(1, model.order + 1):
            f.write(f'\n\\{k}-grams:\n')
            for ngram in sorted(entries[k]):
                ln_prob = entries[k][ngram]
                log10_prob = NO_PROB if ln_prob is None else ln_prob / LN10
                line = f'{log10_prob:.12g}\t{" ".join(ngram)}'
                if ngram in model.bows:
                    line += f'\t{model.bows[ngram] / LN10:.12g}'
                f.write(line + '\n')
        f.write('\n\\end\\\n')
    log.info(f'{model.direction} model written to {path}')


def load(path):
    """ Read an ARPA file. Entries at -99 only carry a back-off weight. """
    with open(path, 'rb') as f:
        data = f.read()

    header = {}
    declared = {}
    probs = {}
    bows = {}
    section = None
    offset = 0
    finished = False

    for raw in data.splitlines(keepends=True):
        line_offset = offset
        offset += len(raw)
        try:
            line = raw.decode('utf-8').strip()
        except UnicodeDecodeError:
            raise FormatError(line_offset, 'not valid utf-8')

        if not line:
            continue
        if section is None:
            if line.startswith(';'):
                for field in line[1:].split():
                    key, _, value = field.partition('=')
                    header[key] = value
            elif line == '\\data\\':
                section = 'data'
            else:
                raise FormatError(line_offset, 'expected \\data\\')
            continue

        if line == '\\end\\':
            finished = True
            break
        if line.startswith('\\') and line.endswith('-grams:'):
            try:
                section = int(line[1:-len('-grams:')])
            except ValueError:
                raise FormatError(line_offset, f'bad section header {line!r}')
            if section not in declared:
                raise FormatError(line_offset, f'undeclared section {line!r}')
            continue

        if section == 'data':
            key, _, value = line.partition('=')
            try:
                declared[int(key.split()[1])] = int(value)
            except (IndexError, ValueError):
                raise FormatError(line_offset, f'bad count line {line!r}')
            continue

        fields = line.split()
        if len(fields) not in (section + 1, section + 2):
            raise FormatError(line_offset, f'expected a {section}-gram entry, got {line!r}')
        try:
            log10_prob = float(fields[0])
            bow = float(fields[-1]) if len(fields) == section + 2 else None
        except ValueError:
            raise FormatError(line_offset, f'bad number in {line!r}')

        ngram = tuple(fields[1:section + 1])
        if log10_prob > NO_PROB:
            probs[ngram] = log10_prob * LN10
        if bow is not None:
            bows[ngram] = bow * LN10

    if not finished:
        raise FormatError(offset, 'truncated file, \\end\\ not found')
    if not declared:
        raise FormatError(offset, 'no \\data\\ counts')

    found = Counter(len(ngram) for ngram in set(probs) | set(bows))
    for k, count in declared.items():
        if found[k] != count:
            raise FormatError(offset, f'{k}-grams: {count} declared, {found[k]} read')
    if (UNK,) not in probs:
        raise FormatError(offset, f'no unigram entry for {UNK}')

    direction = header.get('direction', 'forward')
    discount = float(header['discount']) if 'discount' in header else None
    model = NGramLanguageModel(max(declared), direction, probs, bows, discount)
    log.info(f'{direction} {model.order}-gram model loaded from {path}')
    return model
