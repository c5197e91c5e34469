#!/usr/bin/env python3

import sys, json, logging, contextlib

import pandas

from . import models, corpus

log = logging.getLogger(__name__)


@contextlib.contextmanager
def output(path):
    """ Open path for writing, '-' or None is stdout """
    if path in (None, '-'):
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            yield f


def write_table(frame, path=None, index=False):
    """ .json -> list of records, anything else -> TSV """
    with output(path) as f:
        if path and path.endswith('.json'):
            frame = frame.reset_index() if index else frame
            f.write(frame.to_json(orient='records', indent=1))
            f.write('\n')
        else:
            frame.to_csv(f, sep='\t', index=index, float_format='%.6f')
    log.info(f'Report of {len(frame)} rows written to {path or "stdout"}')


def write_histogram(histogram, path=None):
    """ Four columns, one row, for plotting """
    frame = pandas.DataFrame([histogram.bins], columns=['q1', 'q2', 'q3', 'q4'])
    with output(path) as f:
        frame.to_csv(f, index=False, float_format='%.6f')


def dumps(record):
    return json.dumps(record, ensure_ascii=False)


def write_jsonl(records, f):
    for record in records:
        f.write(dumps(record) + '\n')


def read_summaries(path, lowercase=True):
    """ JSON-lines written by summarize or baseline, or one summary per line.
    Records carrying an error come back as empty summaries.
    """
    summaries = []
    failed = 0
    for number, line in corpus.read_lines(path):
        if not line.strip():
            # an empty plain summary
            summaries.append(())
            continue
        if line.lstrip().startswith('{'):
            try:
                record = json.loads(line)
            except ValueError as e:
                raise corpus.ParseError(number, f'bad JSON record: {e}')
            if 'summary' not in record:
                failed += 1
                summaries.append(())
                continue
            line = record['summary']
        summaries.append(corpus.tokenize(line, lowercase))

    if failed:
        log.warning(f'{failed} records of {path} have no summary, scored as empty')
    return summaries


def summary_record(index, source, summary, s, value, evaluations, seed):
    """ The JSON-lines record of one summarized sentence """
    return {
        'id': index,
        'source': models.join(source),
        'summary': models.join(summary),
        's': s,
        'score': value.log_score if value else None,
        'f_lm': value.f_lm if value else None,
        'f_sim': value.f_sim if value else None,
        'evaluations': evaluations,
        'seed': seed,
    }
