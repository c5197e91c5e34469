#!/usr/bin/env python3

import logging

import numpy

from . import models
from .models import SentenceVector, EPSILON

log = logging.getLogger(__name__)


class FormatError(models.Error):

    def __init__(self, line, reason):
        self.line = line
        super().__init__(f'line {line}: {reason}')


class DimensionMismatch(FormatError):
    pass


class EmbeddingTable:
    """ Word vectors stacked in a matrix, one row per token """

    def __init__(self, tokens, matrix):
        matrix = numpy.asarray(matrix, dtype=numpy.float64)
        if matrix.ndim != 2 or matrix.shape[1] < 1:
            raise models.ConfigError(f'expected a (tokens, dim) matrix, got shape {matrix.shape}')
        if len(tokens) != matrix.shape[0]:
            raise models.ConfigError(f'{len(tokens)} tokens for {matrix.shape[0]} vectors')
        if not numpy.isfinite(matrix).all():
            raise models.ConfigError('embedding matrix has non finite entries')
        self.index = {token: row for row, token in enumerate(tokens)}
        self.matrix = matrix

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.index)

    def __contains__(self, token):
        return token in self.index

    def vector(self, token):
        return self.matrix[self.index[token]]

    def scaled(self, factor):
        tokens = sorted(self.index, key=self.index.get)
        return EmbeddingTable(tokens, self.matrix * factor)

    def save(self, path):
        tokens = sorted(self.index, key=self.index.get)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(f'{len(tokens)} {self.dim}\n')
            for token in tokens:
                values = ' '.join(f'{v:.6f}' for v in self.vector(token))
                f.write(f'{token} {values}\n')


def load_embeddings(path):
    """ word2vec text format: "vocab_size dim" then "token v1 ... v_dim"
    Duplicate tokens keep their first row.
    """
    tokens = []
    rows = []
    seen = set()
    size = dim = None
    with open(path, 'rb') as f:
        for number, raw in enumerate(f, start=1):
            try:
                fields = raw.decode('utf-8').split()
            except UnicodeDecodeError:
                raise FormatError(number, 'not valid utf-8')

            if number == 1:
                try:
                    size, dim = (int(field) for field in fields)
                except ValueError:
                    raise FormatError(number, 'expected the header "vocab_size dim"')
                if dim < 1:
                    raise FormatError(number, f'dimension must be >= 1, got {dim}')
                continue

            if not fields:
                continue
            token, values = fields[0], fields[1:]
            if len(values) != dim:
                raise DimensionMismatch(number, f'{len(values)} values for dimension {dim}')
            try:
                vector = [float(v) for v in values]
            except ValueError:
                raise FormatError(number, f'non numeric value in row for {token!r}')
            if not all(numpy.isfinite(vector)):
                raise FormatError(number, f'non finite value in row for {token!r}')

            if token in seen:
                log.warning(f'Duplicate vector for {token!r} at line {number}, keeping the first one')
                continue
            seen.add(token)
            tokens.append(token)
            rows.append(vector)

    if dim is None:
        raise FormatError(1, 'empty embedding file')
    if len(tokens) != size:
        log.warning(f'Header announces {size} vectors, {len(tokens)} read from {path}')

    log.info(f'{len(tokens)} vectors of dimension {dim} loaded from {path}')
    return EmbeddingTable(tokens, numpy.array(rows, dtype=numpy.float64).reshape(len(rows), dim))


class SimilarityModel:
    """ f_SIM: idf weighted average of word vectors compared by cosine """

    def __init__(self, table, idf):
        self.table = table
        self.idf = idf

    def embed(self, tokens):
        if not tokens:
            raise models.ConfigError('cannot embed an empty sentence')
        rows = []
        weights = []
        for token in tokens:
            row = self.table.index.get(token)
            if row is not None:
                rows.append(row)
                weights.append(self.idf.idf(token))

        if not rows:
            return SentenceVector(numpy.zeros(self.table.dim), 0.0)
        weights = numpy.asarray(weights)
        components = weights @ self.table.matrix[rows] / weights.sum()
        return SentenceVector(components, len(rows) / len(tokens))

    def cosine(self, a, b):
        """ Cosine of two sentence vectors clamped to [EPSILON, 1] """
        norm = numpy.linalg.norm(a.components) * numpy.linalg.norm(b.components)
        if norm == 0:
            return EPSILON
        value = float(a.components @ b.components / norm)
        return min(1.0, max(EPSILON, value))

    def similarity(self, x, y):
        return self.cosine(self.embed(x), self.embed(y))


def embed(table, idf, tokens):
    return SimilarityModel(table, idf).embed(tokens)


def similarity(table, idf, x, y):
    return SimilarityModel(table, idf).similarity(x, y)
