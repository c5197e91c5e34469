#!/usr/bin/env python3

import sys, logging, asyncio, argparse

from . import models, controller, corpus, ngram, rouge, baselines, fixtures, report
from .models import BETA_R, BETA_T, GAMMA, EXHAUSTIVE_CAP

log = logging.getLogger(__name__)

OK, FATAL = 0, 2


def _model_flags(parser):
    """ Flags of every command running the hill climber """
    parser.add_argument('dataset', help='Sentences to summarize, see --format.')
    parser.add_argument('--format', choices=('tsv', 'plain'), default='tsv',
            help='tsv: source TAB reference..., plain: one source per line.')
    parser.add_argument('--lm-fwd', help='Forward ARPA language model.')
    parser.add_argument('--lm-bwd', help='Backward ARPA language model.')
    parser.add_argument('--embeddings', help='Word vectors, word2vec text format.')
    parser.add_argument('--idf', help='idf table written by train-idf.')

    length = parser.add_mutually_exclusive_group(required=True)
    length.add_argument('--len', type=int, help='Summary length in words.')
    length.add_argument('--len-ratio', type=float,
            help='Summary length in percent of each source sentence.')

    parser.add_argument('--gamma', type=float, default=GAMMA,
            help='Exponent of the similarity term (default %(default)s).')
    parser.add_argument('--beta-r', type=float, default=BETA_R,
            help='Restarts per n*s^2 (default %(default)s).')
    parser.add_argument('--beta-t', type=float, default=BETA_T,
            help='Steps per restart per n*s^2 (default %(default)s).')
    parser.add_argument('--restarts', type=int, help='Fixed number of restarts.')
    parser.add_argument('--steps', type=int, help='Fixed number of steps per restart.')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--workers', type=int, default=1,
            help='Threads for sentences, or for the restarts of a single sentence.')

    parser.add_argument('--no-sim', action='store_true', help='Drop the similarity term.')
    lm = parser.add_mutually_exclusive_group()
    lm.add_argument('--lm-forward-only', action='store_true',
            help='Fluency from the forward model alone.')
    lm.add_argument('--no-lm', action='store_true', help='Drop the fluency term.')


def _protocol_flags(parser):
    parser.add_argument('--truncate-75', action='store_true',
            help='Recall of summaries cut at 75 characters instead of F1.')
    parser.add_argument('--multi-ref', choices=('max', 'avg'), default='max',
            help='Aggregation over several references.')
    parser.add_argument('--keep-case', action='store_true', help='Case sensitive matching.')


def _output_flag(parser):
    parser.add_argument('-o', '--output', help='Output file, stdout when missing.')


def parse_args(argv):
    parser = argparse.ArgumentParser(prog='hillsum', add_help=False,
            description='Unsupervised sentence summarization by hill climbing over word masks.')

    parser.add_argument('-h', '--help', action='help',
            help='Shows this help message and exits.')

    parser.add_argument('-v', '--verbose', action='count', default=0,
            help='Increase verbosity output up to 3.')

    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    train_lm = commands.add_parser('train-lm', help='Train a Kneser-Ney language model.')
    train_lm.add_argument('corpus', help='One tokenized sentence per line.')
    train_lm.add_argument('out', help='ARPA file to write.')
    train_lm.add_argument('--order', type=int, default=ngram.ORDER)
    train_lm.add_argument('--direction', choices=ngram.DIRECTIONS, default='forward')
    train_lm.add_argument('--discount', type=float, default=ngram.DISCOUNT)

    train_idf = commands.add_parser('train-idf', help='Count document frequencies.')
    train_idf.add_argument('corpus')
    train_idf.add_argument('out')

    summarize = commands.add_parser('summarize', help='Summarize every sentence of a dataset.')
    _model_flags(summarize)
    _output_flag(summarize)
    summarize.add_argument('--trace', help='JSON-lines file of every accepted move.')

    baseline = commands.add_parser('baseline', help='Lead summaries of a dataset.')
    baseline.add_argument('dataset')
    baseline.add_argument('--format', choices=('tsv', 'plain'), default='tsv')
    baseline.add_argument('--lead', default='N-8', help='N-<words>, P-<percent> or C-<chars>.')
    _output_flag(baseline)

    evaluate = commands.add_parser('evaluate', help='ROUGE of summaries against references.')
    evaluate.add_argument('summaries', help='Output of summarize or baseline, or plain lines.')
    evaluate.add_argument('dataset', help='tsv dataset with references.')
    _protocol_flags(evaluate)
    _output_flag(evaluate)

    fixture = commands.add_parser('fixtures', help='Write a synthetic corpus, dataset and vectors.')
    fixture.add_argument('outdir')
    fixture.add_argument('--sentences', type=int, default=1000)
    fixture.add_argument('--records', type=int, default=100)
    fixture.add_argument('--dim', type=int, default=16)
    fixture.add_argument('--seed', type=int, default=0)

    analyze = commands.add_parser('analyze', help='Analyses of summaries and of the search.')
    analyses = analyze.add_subparsers(dest='analysis', metavar='ANALYSIS')
    analyses.required = True

    sweep = analyses.add_parser('lead-sweep', help='ROUGE of Lead baselines over a parameter range.')
    sweep.add_argument('dataset')
    sweep.add_argument('--kind', choices=('words_n', 'percent_p'), default='words_n')
    sweep.add_argument('--params', default='2:20', help='LO:HI inclusive, or a comma list.')
    _protocol_flags(sweep)
    _output_flag(sweep)

    bias = analyses.add_parser('positional-bias', help='Source quarters summary words come from.')
    bias.add_argument('dataset')
    bias.add_argument('summaries')
    bias.add_argument('--format', choices=('tsv', 'plain'), default='tsv')
    _output_flag(bias)

    gap = analyses.add_parser('exhaustive-gap', help='Hill climbing against the exhaustive optimum.')
    _model_flags(gap)
    _protocol_flags(gap)
    _output_flag(gap)
    gap.add_argument('--cap', type=int, default=EXHAUSTIVE_CAP,
            help='Most candidate masks enumerated per sentence.')

    brackets = analyses.add_parser('brackets', help='ROUGE tables by average summary length.')
    brackets.add_argument('dataset')
    brackets.add_argument('runs', nargs='+', help='NAME=PATH of summary files.')
    brackets.add_argument('--bracket', action='append', required=True,
            help='LO:HI average length bracket, repeatable.')
    _protocol_flags(brackets)
    _output_flag(brackets)

    ablation = analyses.add_parser('ablation', help='Hill climbing under each objective variant.')
    _model_flags(ablation)
    _protocol_flags(ablation)
    _output_flag(ablation)

    budget = analyses.add_parser('budget-sweep', help='Hill climbing with scaled search budgets.')
    _model_flags(budget)
    _protocol_flags(budget)
    _output_flag(budget)
    budget.add_argument('--factors', default='0.25,0.5,1,2,4', help='Comma list of multipliers.')

    extract = analyses.add_parser('extractiveness', help='Share of reference words found in sources.')
    extract.add_argument('dataset')

    return parser.parse_args(argv)


def set_logger(args):
    ''' Set logging levels from arguments '''

    logging.basicConfig(
        stream=sys.stderr,
        format='%(asctime)s %(name)s \t %(levelname)-7s %(message)s',
        datefmt='%m-%d %H:%M:%S')

    root_logger = logging.getLogger()
    async_log = logging.getLogger('asyncio')
    async_log.disabled = True

    if args.verbose == 0:
        root_logger.setLevel(logging.WARNING)

    if args.verbose == 1:
        root_logger.setLevel(logging.INFO)
        root_logger.info('Info active')

    if args.verbose >= 2:
        root_logger.setLevel(logging.DEBUG)
        root_logger.debug('Debug active')

    if args.verbose >= 3:
        async_log.disabled = False
        root_logger.debug('Debug active for asyncio')

    return root_logger


def protocol_of(args):
    return rouge.EvalProtocol(variant='truncated_recall_75' if args.truncate_75 else 'f1',
                              multi_ref='average' if args.multi_ref == 'avg' else 'max',
                              lowercase=not args.keep_case)


def parse_params(text, kind):
    """ '2:20' -> 2..20, '30,50,70' -> [30, 50, 70] """
    number = int if kind == 'words_n' else float
    try:
        if ':' in text:
            lo, hi = (int(part) for part in text.split(':'))
            return list(range(lo, hi + 1))
        return [number(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise models.ConfigError(f'bad parameter list {text!r}')


def parse_bracket(text):
    try:
        lo, hi = (float(part) for part in text.split(':'))
    except ValueError:
        raise models.ConfigError(f'expected LO:HI, got {text!r}')
    return lo, hi


def parse_run(text):
    """ NAME=PATH, the path alone names the run """
    name, sep, path = text.partition('=')
    return (name, path) if sep else (text, text)


def parse_factors(text):
    try:
        factors = [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise models.ConfigError(f'bad factor list {text!r}')
    if not factors or min(factors) <= 0:
        raise models.ConfigError(f'factors must be > 0, got {text!r}')
    return factors


async def with_app(config, job, needs=None):
    """ Load the models, run job(app) and release the pool """
    app = await controller.App(config, needs)
    try:
        return await job(app)
    finally:
        app.close()


def run_train_lm(args):
    model = controller.train_lm(args.corpus, args.out, args.order, args.direction, args.discount)
    print(f'vocab\t{len(model.vocab)}')
    for order, count in enumerate(model.counts(), start=1):
        print(f'ngram {order}\t{count}')
    return OK


def run_train_idf(args):
    table = controller.train_idf(args.corpus, args.out)
    print(f'sentences\t{table.doc_count}')
    print(f'types\t{len(table)}')
    return OK


def run_summarize(args):
    config = controller.RunConfig.from_args(args)
    return asyncio.run(with_app(config, lambda app: app.run_summarize()))


def run_baseline(args):
    dataset = corpus.load_dataset(args.dataset, args.format)
    spec = baselines.LeadSpec.parse(args.lead)
    with report.output(args.output) as out:
        report.write_jsonl(controller.baseline(dataset, spec), out)
    return OK


def run_evaluate(args):
    protocol = protocol_of(args)
    dataset = corpus.load_dataset(args.dataset, 'tsv', protocol.lowercase)
    summaries = report.read_summaries(args.summaries, protocol.lowercase)
    report.write_table(controller.evaluate(dataset, summaries, protocol), args.output, index=True)
    return OK


def run_fixtures(args):
    for path in fixtures.write_fixtures(args.outdir, args.sentences, args.records, args.dim, args.seed):
        print(path)
    return OK


def run_analyze(args):
    analysis = args.analysis

    if analysis == 'lead-sweep':
        protocol = protocol_of(args)
        dataset = corpus.load_dataset(args.dataset, 'tsv', protocol.lowercase)
        table = baselines.lead_sweep(dataset, args.kind, parse_params(args.params, args.kind), protocol)
        report.write_table(table, args.output)

    elif analysis == 'positional-bias':
        dataset = corpus.load_dataset(args.dataset, args.format)
        summaries = report.read_summaries(args.summaries)
        report.write_histogram(baselines.positional_bias(dataset.sources, summaries), args.output)

    elif analysis == 'brackets':
        protocol = protocol_of(args)
        dataset = corpus.load_dataset(args.dataset, 'tsv', protocol.lowercase)
        runs = [(name, report.read_summaries(path, protocol.lowercase))
                for name, path in map(parse_run, args.runs)]
        table = controller.brackets(dataset, runs, protocol, [parse_bracket(b) for b in args.bracket])
        report.write_table(table, args.output)

    elif analysis == 'extractiveness':
        print(f'{baselines.extractiveness(corpus.load_dataset(args.dataset)):.6f}')

    elif analysis in ('exhaustive-gap', 'ablation', 'budget-sweep'):
        config = controller.RunConfig.from_args(args)
        protocol = protocol_of(args)

        async def job(app):
            dataset = app.load_dataset()
            if analysis == 'exhaustive-gap':
                return await app.exhaustive_gap(dataset, protocol, args.cap)
            if analysis == 'ablation':
                return await app.ablation(dataset, protocol)
            return await app.budget_sweep(dataset, parse_factors(args.factors), protocol)

        needs = {'forward', 'backward', 'similarity'} if analysis == 'ablation' else None
        table = asyncio.run(with_app(config, job, needs))
        report.write_table(table, args.output)
        if analysis == 'exhaustive-gap':
            print(controller.gap_summary(table), file=sys.stderr)

    return OK


COMMANDS = {
    'train-lm': run_train_lm,
    'train-idf': run_train_idf,
    'summarize': run_summarize,
    'baseline': run_baseline,
    'evaluate': run_evaluate,
    'fixtures': run_fixtures,
    'analyze': run_analyze,
}


def run(args):
    """ ::return:: exit code, 0 success, 1 some sentences failed, 2 fatal """
    try:
        return COMMANDS[args.command](args)
    except (models.Error, OSError) as e:
        log.debug('fatal error', exc_info=True)
        print(f'hillsum: error: {e}', file=sys.stderr)
        return FATAL


def main(argv=sys.argv[1:]):

    args = parse_args(argv)
    set_logger(args)

    return run(args)


if __name__ == "__main__":
    sys.exit(main())
