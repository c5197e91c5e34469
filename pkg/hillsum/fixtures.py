#!/usr/bin/env python3

import os, logging

import numpy

from . import corpus
from .models import Record, ParallelDataset
from .similarity import EmbeddingTable

""" Deterministic synthetic news sentences with headline-like references.
Every sentence is built from slots (who, did, what, where, when, ...);
the reference keeps the content words of the first three slots, the way a
headline keeps the gist of a lead sentence. """

log = logging.getLogger(__name__)

SUBJECTS = [
    'the prime minister', 'police', 'a chinese delegation', 'the central bank',
    'rebels', 'the company', 'officials', 'two grenades', 'the supreme court',
    'a container ship', 'the president', 'fire fighters', 'the union', 'troops',
]
VERBS = [
    'met with', 'arrested', 'approved', 'rejected', 'announced', 'attacked',
    'visited', 'criticized', 'exploded near', 'ran aground near', 'blocked', 'signed',
]
OBJECTS = [
    'a new budget', 'the opposition leader', 'trade talks', 'a police station',
    'the french port', 'the new law', 'a peace deal', 'the capital',
    'oil prices', 'the border town', 'a rescue plan', 'foreign ministers',
]
FILLERS = [
    '', '', 'in a surprise move', 'after weeks of talks', 'amid growing tension',
    'for the second time', 'despite strong protests',
]
TIMES = ['on monday', 'on tuesday', 'early friday', 'last week', 'this morning', 'on sunday']
TAILS = [
    '.', ', officials said .', ', news reports said .', ', according to state media .',
    ', a spokesman said .',
]
STOPWORDS = {'the', 'a', 'an', 'with', 'near', 'on', 'in', 'of', 'for', 'to', 'this',
             'after', 'at', ',', '.', 'said', 'according'}
SLOTS = (SUBJECTS, VERBS, OBJECTS)


def _pick(rng, options):
    return options[rng.integers(len(options))]


def sentence_pair(rng):
    """ ::return:: source tokens, reference tokens """
    parts = [_pick(rng, slot) for slot in SLOTS]
    source = ' '.join(parts + [_pick(rng, FILLERS), _pick(rng, TIMES), _pick(rng, TAILS)])
    reference = [token for token in ' '.join(parts).split() if token not in STOPWORDS]
    return corpus.tokenize(source), tuple(reference)


def make_corpus(size, seed=0):
    """ Sources and references mixed, as a language model training corpus """
    rng = numpy.random.default_rng(seed)
    sentences = []
    for _ in range(size):
        source, reference = sentence_pair(rng)
        sentences.append(source if rng.random() < 0.5 else reference)
    return sentences


def make_dataset(size, seed=1, min_length=1):
    rng = numpy.random.default_rng(seed)
    records = []
    while len(records) < size:
        source, reference = sentence_pair(rng)
        if len(source) >= min_length:
            records.append(Record(source, (reference,)))
    return ParallelDataset(records)


def make_prefix_dataset(size, seed=2, low=0.4, high=0.6):
    """ References are 40-60% prefixes of sources of 20 to 30 distinct tokens """
    rng = numpy.random.default_rng(seed)
    records = []
    for _ in range(size):
        n = int(rng.integers(20, 31))
        source = tuple(f'w{i}' for i in rng.permutation(200)[:n])
        keep = max(1, int(round(rng.uniform(low, high) * n)))
        records.append(Record(source, (source[:keep],)))
    return ParallelDataset(records)


def make_embeddings(dim=16, seed=3, vocabulary=None):
    """ Words of the same slot share a direction; function words get short vectors """
    rng = numpy.random.default_rng(seed)
    groups = [SUBJECTS, VERBS, OBJECTS, FILLERS, TIMES, TAILS]
    directions = rng.normal(size=(len(groups), dim))

    vectors = {}
    for direction, group in zip(directions, groups):
        for phrase in group:
            for token in phrase.split():
                if token in vectors:
                    continue
                vector = 0.5 * direction + rng.normal(size=dim)
                if token in STOPWORDS:
                    vector *= 0.1
                vectors[token] = vector
    for token in vocabulary or ():
        if token not in vectors:
            vectors[token] = rng.normal(size=dim)

    tokens = sorted(vectors)
    return EmbeddingTable(tokens, numpy.stack([vectors[token] for token in tokens]))


def write_fixtures(out, sentences=1000, records=100, dim=16, seed=0):
    """ corpus.txt, dataset.tsv and vectors.txt under out
    ::return:: the three paths """
    os.makedirs(out, exist_ok=True)
    paths = [os.path.join(out, name) for name in ('corpus.txt', 'dataset.tsv', 'vectors.txt')]

    with open(paths[0], 'w', encoding='utf-8') as f:
        for sentence in make_corpus(sentences, seed):
            f.write(' '.join(sentence) + '\n')
    corpus.save_dataset(make_dataset(records, seed + 1), paths[1])
    make_embeddings(dim, seed + 2).save(paths[2])

    log.info(f'Fixtures written to {out}')
    return paths
