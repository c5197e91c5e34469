#!/usr/bin/env python3

import math, asyncio, logging
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import attr
import numpy
import pandas
from aiostream import stream

from . import models, corpus, ngram, similarity, objective, search, rouge, baselines, report
from .models import BETA_R, BETA_T, GAMMA

log = logging.getLogger(__name__)

# (name, lm_mode, use_similarity) of the objective ablation
ABLATIONS = [
    ('lm_bidirectional+sim', 'bidirectional', True),
    ('lm_forward+sim', 'forward_only', True),
    ('lm_bidirectional', 'bidirectional', False),
    ('lm_forward', 'forward_only', False),
    ('sim', 'none', True),
]

Outcome = namedtuple('Outcome', 'index source s result error')

GAP_COLUMNS = ['id', 'n', 's', 'fchc', 'exhaustive', 'objective_gap', 'rouge_l_gap',
               'fchc_evaluations', 'exhaustive_evaluations']


def _optional_positive(instance, attribute, value):
    if value is not None and value <= 0:
        raise models.ConfigError(f'{attribute.name} must be > 0, got {value}')


def _positive(instance, attribute, value):
    if value <= 0:
        raise models.ConfigError(f'{attribute.name} must be > 0, got {value}')


def _non_negative(instance, attribute, value):
    if value < 0:
        raise models.ConfigError(f'{attribute.name} must be >= 0, got {value}')


@attr.s(frozen=True, slots=True)
class RunConfig:
    """ Everything a summarization run depends on """

    dataset = attr.ib()
    dataset_format = attr.ib(default='tsv')
    lm_forward = attr.ib(default=None)
    lm_backward = attr.ib(default=None)
    embeddings = attr.ib(default=None)
    idf = attr.ib(default=None)
    output = attr.ib(default=None)
    trace = attr.ib(default=None)
    length_words = attr.ib(default=None, validator=_optional_positive)
    length_ratio = attr.ib(default=None, validator=_optional_positive)
    gamma = attr.ib(default=GAMMA, converter=float, validator=_non_negative)
    beta_r = attr.ib(default=BETA_R, converter=float, validator=_positive)
    beta_t = attr.ib(default=BETA_T, converter=float, validator=_positive)
    restarts = attr.ib(default=None, validator=_optional_positive)
    steps = attr.ib(default=None, validator=_optional_positive)
    seed = attr.ib(default=0, converter=int, validator=_non_negative)
    workers = attr.ib(default=1, converter=int, validator=_positive)
    use_similarity = attr.ib(default=True, converter=bool)
    lm_mode = attr.ib(default='bidirectional')
    lowercase = attr.ib(default=True, converter=bool)

    def __attrs_post_init__(self):
        if (self.length_words is None) == (self.length_ratio is None):
            raise models.ConfigError('exactly one of --len and --len-ratio is needed')
        if self.length_ratio is not None and self.length_ratio > 100:
            raise models.ConfigError(f'--len-ratio is a percentage, got {self.length_ratio}')

    @classmethod
    def from_args(cls, args):
        lm_mode = 'bidirectional'
        if getattr(args, 'no_lm', False):
            lm_mode = 'none'
        elif getattr(args, 'lm_forward_only', False):
            lm_mode = 'forward_only'
        return cls(dataset=args.dataset,
                   dataset_format=args.format,
                   lm_forward=args.lm_fwd,
                   lm_backward=args.lm_bwd,
                   embeddings=args.embeddings,
                   idf=args.idf,
                   output=getattr(args, 'output', None),
                   trace=getattr(args, 'trace', None),
                   length_words=args.len,
                   length_ratio=args.len_ratio,
                   gamma=args.gamma,
                   beta_r=args.beta_r,
                   beta_t=args.beta_t,
                   restarts=args.restarts,
                   steps=args.steps,
                   seed=args.seed,
                   workers=args.workers,
                   use_similarity=not args.no_sim,
                   lm_mode=lm_mode)

    def objective_config(self, lm_mode=None, use_similarity=None):
        return objective.ObjectiveConfig(
            target_length=1,
            gamma=self.gamma,
            use_similarity=self.use_similarity if use_similarity is None else use_similarity,
            lm_mode=lm_mode or self.lm_mode)

    def resolve_length(self, n):
        """ Summary length for a source of n tokens, at most n """
        if self.length_words is not None:
            s = int(self.length_words)
            if s > n:
                log.warning(f'Source of {n} tokens is shorter than --len {s}, keeping all of it')
                s = n
            return s
        return min(n, max(1, models.round_half_up(self.length_ratio / 100 * n)))

    def budget(self, n, s, factor=1.0):
        budget = search.derive_budget(n, s, self.beta_r * factor, self.beta_t * factor)
        return budget.override(self.restarts, self.steps)


class App(models.aioObject):
    """ Loads the scorers once and runs searches over datasets """

    async def __init__(self, config, needs=None):
        self.config = config
        self.pool = ThreadPoolExecutor(max_workers=config.workers)

        # which models the run needs, all of them for an ablation
        if needs is None:
            needs = set()
            if config.lm_mode != 'none':
                needs.add('forward')
            if config.lm_mode == 'bidirectional':
                needs.add('backward')
            if config.use_similarity:
                needs.add('similarity')

        loaders = {}
        paths = {'forward': config.lm_forward, 'backward': config.lm_backward,
                 'embeddings': config.embeddings, 'idf': config.idf}
        wanted = {'forward': 'forward' in needs, 'backward': 'backward' in needs,
                  'embeddings': 'similarity' in needs, 'idf': 'similarity' in needs}
        functions = {'forward': ngram.load, 'backward': ngram.load,
                     'embeddings': similarity.load_embeddings, 'idf': corpus.IdfTable.load}

        for name, path in paths.items():
            if not wanted[name]:
                continue
            if path is None:
                raise models.ConfigError(f'the run needs a {name} file')
            loaders[name] = path

        loop = asyncio.get_running_loop()
        # loading in parallel, each model in the pool
        loaded = await asyncio.gather(*(loop.run_in_executor(self.pool, functions[name], path)
                                        for name, path in loaders.items()))
        loaded = dict(zip(loaders, loaded))

        for name in ('forward', 'backward'):
            model = loaded.get(name)
            if model is not None and model.direction != name:
                raise models.ConfigError(f'{paths[name]} holds a {model.direction} model, '
                                         f'expected {name}')

        sim = None
        if 'embeddings' in loaded:
            sim = similarity.SimilarityModel(loaded['embeddings'], loaded['idf'])
        self.scorers = objective.Scorers(loaded.get('forward'), loaded.get('backward'), sim)
        self.objective = objective.Objective(config.objective_config(), self.scorers)
        log.info(f'Models ready: {", ".join(loaders) or "none"}')

    def close(self):
        self.pool.shutdown()

    def load_dataset(self):
        return corpus.load_dataset(self.config.dataset, self.config.dataset_format,
                                   self.config.lowercase)

    def summarize_one(self, index, source, objective_=None, factor=1.0, trace=False, workers=1):
        """ Hill climbing on one sentence, errors are kept in the outcome """
        objective_ = objective_ or self.objective
        try:
            if not source:
                raise search.InvalidLength('empty source sentence')
            s = self.config.resolve_length(len(source))
            budget = self.config.budget(len(source), s, factor)
            result = search.fchc(source, s, objective_, budget, self.config.seed, workers, trace)
            log.debug(f'#{index}: s={s} score={result.best_value.log_score:.4f} '
                      f'evaluations={result.evaluations}')
            return Outcome(index, source, s, result, None)
        except Exception as e:
            log.error(f'Instance {index} failed: {e}')
            return Outcome(index, source, None, None, f'{type(e).__name__}: {e}')

    async def map_instances(self, function, items):
        """ function(item) over items in the pool, results in input order """
        loop = asyncio.get_running_loop()

        async def _work(item):
            return await loop.run_in_executor(self.pool, function, item)

        xs = stream.map(stream.iterate(items), _work, ordered=True, task_limit=self.config.workers)
        async with xs.stream() as streamer:
            async for result in streamer:
                yield result

    async def summarize(self, dataset, objective_=None, factor=1.0, trace=False):
        # a single sentence gets the workers for its restarts instead
        workers = self.config.workers if len(dataset) == 1 else 1

        def _one(item):
            index, source = item
            return self.summarize_one(index, source, objective_, factor, trace, workers)

        async for outcome in self.map_instances(_one, list(enumerate(dataset.sources))):
            yield outcome

    async def collect(self, dataset, objective_=None, factor=1.0):
        return [outcome async for outcome in self.summarize(dataset, objective_, factor)]

    async def run_summarize(self):
        """ Write one JSON record per sentence ::return:: exit code """
        dataset = self.load_dataset()
        log.info(f'Summarizing {len(dataset)} sentences with {self.config}')
        failed = 0
        keep_trace = self.config.trace is not None

        with report.output(self.config.output) as out, report.output(
                self.config.trace if keep_trace else None) as trace_out:
            async for outcome in self.summarize(dataset, trace=keep_trace):
                if outcome.error:
                    failed += 1
                    out.write(report.dumps({'id': outcome.index,
                                            'source': models.join(outcome.source),
                                            'error': outcome.error}) + '\n')
                    continue
                result = outcome.result
                out.write(report.dumps(report.summary_record(
                    outcome.index, outcome.source, result.best_mask.realize(outcome.source),
                    outcome.s, result.best_value, result.evaluations, self.config.seed)) + '\n')
                if keep_trace:
                    report.write_jsonl(({'id': outcome.index, **step._asdict()} for step in result.trace),
                                       trace_out)

        if failed:
            log.warning(f'{failed} of {len(dataset)} sentences failed')
            return 1
        return 0

    def _gap(self, item, protocol, cap):
        index, record = item
        outcome = self.summarize_one(index, record.source)
        if outcome.error:
            raise models.Error(f'instance {index}: {outcome.error}')
        found = outcome.result
        best = search.exhaustive_search(record.source, outcome.s, self.objective, cap)

        rouge_gap = math.nan
        if record.references:
            def rouge_l_of(mask):
                summary = mask.realize(record.source)
                return rouge.score_instance(summary, record.references, protocol)['rouge-l'].f1
            rouge_gap = rouge_l_of(best.best_mask) - rouge_l_of(found.best_mask)

        return dict(id=index, n=len(record.source), s=outcome.s,
                    fchc=found.best_value.log_score, exhaustive=best.best_value.log_score,
                    objective_gap=best.best_value.log_score - found.best_value.log_score,
                    rouge_l_gap=rouge_gap, fchc_evaluations=found.evaluations,
                    exhaustive_evaluations=best.evaluations)

    async def exhaustive_gap(self, dataset, protocol=rouge.EvalProtocol(), cap=models.EXHAUSTIVE_CAP):
        """ Exhaustive optimum against fchc on every instance
        ::return:: DataFrame, one row per instance """
        rows = [row async for row in self.map_instances(
            lambda item: self._gap(item, protocol, cap), list(enumerate(dataset)))]
        frame = pandas.DataFrame(rows, columns=GAP_COLUMNS)
        log.info(gap_summary(frame))
        return frame

    def _rows_for(self, name, dataset, outcomes, protocol):
        done = [outcome for outcome in outcomes if outcome.result]
        row = dict(name=name,
                   mean_score=numpy.mean([o.result.best_value.log_score for o in done]) if done else math.nan,
                   mean_evaluations=numpy.mean([o.result.evaluations for o in done]) if done else math.nan,
                   failed=len(outcomes) - len(done))
        if dataset.has_references:
            summaries = [o.result.best_mask.realize(o.source) if o.result else () for o in outcomes]
            scores = rouge.evaluate(dataset, summaries, protocol)
            row.update(r1=scores.loc['rouge-1', protocol.headline],
                       r2=scores.loc['rouge-2', protocol.headline],
                       rl=scores.loc['rouge-l', protocol.headline],
                       avg_len=scores.loc['rouge-1', 'avg_len_words'])
        return row

    async def ablation(self, dataset, protocol=rouge.EvalProtocol()):
        """ fchc under each objective variant with the same seed """
        rows = []
        for name, lm_mode, use_similarity in ABLATIONS:
            config = self.config.objective_config(lm_mode=lm_mode, use_similarity=use_similarity)
            objective_ = objective.Objective(config, self.scorers)
            outcomes = await self.collect(dataset, objective_)
            rows.append(self._rows_for(name, dataset, outcomes, protocol))
            log.info(f'ablation {name} done')
        return pandas.DataFrame(rows)

    async def budget_sweep(self, dataset, factors, protocol=rouge.EvalProtocol()):
        """ fchc with both betas scaled by each factor """
        rows = []
        for factor in sorted(factors):
            outcomes = await self.collect(dataset, factor=factor)
            row = self._rows_for(f'x{factor:g}', dataset, outcomes, protocol)
            rows.append(dict(factor=factor, **row))
            log.info(f'budget x{factor:g}: mean score {row["mean_score"]:.4f}')
        return pandas.DataFrame(rows)


def train_lm(corpus_path, out, order=ngram.ORDER, direction='forward', discount=ngram.DISCOUNT,
             lowercase=True):
    model = ngram.train(corpus.read_corpus(corpus_path, lowercase), order, direction, discount)
    model.save(out)
    return model


def train_idf(corpus_path, out, lowercase=True):
    table = corpus.build_idf(corpus.read_corpus(corpus_path, lowercase))
    table.save(out)
    return table


def baseline(dataset, spec):
    """ Lead summaries as summarize-like records """
    for index, record in enumerate(dataset):
        summary = baselines.lead(record.source, spec)
        yield {'id': index, 'source': models.join(record.source),
               'summary': models.join(summary), 's': len(summary), 'baseline': str(spec)}


def evaluate(dataset, summaries, protocol):
    return rouge.evaluate(dataset, summaries, protocol)


def brackets(dataset, runs, protocol, bracket_list):
    """ One table with a bracket column, runs outside every bracket marked 'none' """
    tables, unassigned = baselines.bracket_report(runs, dataset, protocol, bracket_list)
    frames = [table.assign(bracket=f'[{lo:g}, {hi:g})') for (lo, hi), table in sorted(tables.items())]
    if unassigned:
        frames.append(pandas.DataFrame({'name': unassigned, 'bracket': 'none'}))
    if not frames:
        return pandas.DataFrame(columns=['bracket', 'name', 'r1', 'r2', 'rl', 'avg_len'])
    frame = pandas.concat(frames, ignore_index=True)
    return frame[['bracket', 'name', 'r1', 'r2', 'rl', 'avg_len']]


def gap_summary(frame, tolerance=1e-9):
    """ One line: how often fchc missed the optimum and whether it mattered """
    # tolerance for float noise between equal masks
    missed = frame[frame.objective_gap > tolerance]
    line = f'fchc missed the optimum on {len(missed)} of {len(frame)} instances'
    if len(missed) and missed.rouge_l_gap.notna().any():
        better = (missed.rouge_l_gap > 0).mean()
        line += f', the better objective gave a higher ROUGE-L on {better:.0%} of those'
    return line
