#!/usr/bin/env python3

import os, math, logging
from collections import Counter

from . import models
from .models import Record, ParallelDataset

log = logging.getLogger(__name__)


class EmptyCorpus(models.Error):
    pass


class ParseError(models.Error):

    def __init__(self, line, reason):
        self.line = line
        super().__init__(f'line {line}: {reason}')


class EmptyReference(ParseError):

    def __init__(self, line):
        super().__init__(line, 'source without any reference')


def data_path(name):
    """ Path of a file bundled in hillsum/data """
    dir = os.path.dirname(os.path.realpath(__file__))
    return f'{dir}/data/{name}'


def tokenize(text, lowercase=True):
    """ Whitespace tokenizer, 'a  b\\tc' -> ('a', 'b', 'c') """
    if lowercase:
        text = text.lower()
    return tuple(text.split())


def read_lines(path):
    """ ::yield:: line number, line ; the file is utf-8 """
    with open(path, 'rb') as f:
        for number, raw in enumerate(f, start=1):
            try:
                yield number, raw.decode('utf-8').rstrip('\r\n')
            except UnicodeDecodeError:
                raise ParseError(number, 'not valid utf-8')


def read_corpus(path, lowercase=True):
    """ One pre-tokenized sentence per line, blank lines are skipped
    ::yield:: token tuple """
    for _, line in read_lines(path):
        tokens = tokenize(line, lowercase)
        if tokens:
            yield tokens


class IdfTable:
    """ Sentence level document frequencies with smoothed idf
    idf(w) = ln((N + 1) / (df(w) + 1)) + 1
    """

    def __init__(self, doc_count, df):
        self.doc_count = doc_count
        self.df = dict(df)
        for token, count in self.df.items():
            if count > doc_count:
                raise models.ConfigError(f'df({token})={count} above document count {doc_count}')

    def __len__(self):
        return len(self.df)

    def __eq__(self, other):
        return isinstance(other, IdfTable) and (self.doc_count, self.df) == (other.doc_count, other.df)

    def idf(self, token):
        return math.log((self.doc_count + 1) / (self.df.get(token, 0) + 1)) + 1

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(f'{self.doc_count}\n')
            for token in sorted(self.df):
                f.write(f'{token}\t{self.df[token]}\n')
        log.info(f'idf table with {len(self.df)} tokens written to {path}')

    @classmethod
    def load(cls, path):
        lines = read_lines(path)
        try:
            _, header = next(lines)
            doc_count = int(header)
        except StopIteration:
            raise ParseError(1, 'empty idf file')
        except ValueError:
            raise ParseError(1, f'expected the document count, got {header!r}')

        df = {}
        for number, line in lines:
            if not line:
                continue
            fields = line.split('\t')
            if len(fields) != 2 or not fields[1].isdigit():
                raise ParseError(number, f'expected "token<TAB>df", got {line!r}')
            df[fields[0]] = int(fields[1])
        return cls(doc_count, df)


def build_idf(corpus):
    """ Document frequencies over a stream of sentences """
    doc_count = 0
    df = Counter()
    for sentence in corpus:
        doc_count += 1
        df.update(set(sentence))
    if not doc_count:
        raise EmptyCorpus('cannot build an idf table from zero sentences')
    log.debug(f'idf over {doc_count} sentences, {len(df)} types')
    return IdfTable(doc_count, df)


def load_dataset(path, format='tsv', lowercase=True):
    """ plain : one source sentence per line, no references
    tsv : source TAB ref1 [TAB ref2 ...]
    Blank lines are skipped.
    """
    if format not in ('plain', 'tsv'):
        raise models.ConfigError(f'unknown dataset format {format!r}')

    records = []
    for number, line in read_lines(path):
        if not line.strip():
            continue

        if format == 'plain':
            records.append(Record(tokenize(line, lowercase), ()))
            continue

        source, *fields = line.split('\t')
        # a trailing tab is tolerated, an empty field in between is not
        if fields and not fields[-1].strip():
            fields.pop()
        if not source.strip():
            raise ParseError(number, 'empty source')
        if not fields:
            raise EmptyReference(number)
        if any(not field.strip() for field in fields):
            raise ParseError(number, 'empty reference field')

        references = tuple(tokenize(field, lowercase) for field in fields)
        records.append(Record(tokenize(source, lowercase), references))

    log.info(f'{len(records)} records loaded from {path}')
    return ParallelDataset(records)


def save_dataset(dataset, path):
    with open(path, 'w', encoding='utf-8') as f:
        for record in dataset:
            fields = [models.join(record.source)] + [models.join(ref) for ref in record.references]
            f.write('\t'.join(fields) + '\n')
