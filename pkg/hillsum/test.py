#!/usr/bin/env python3

import os, io, json, math, types, asyncio, logging, tempfile, functools, contextlib, collections

import unittest

import numpy
import pandas

from hillsum import (models, corpus, ngram, similarity, objective, search, rouge, baselines,
                     fixtures, controller, report)
from hillsum.__main__ import main, with_app
from hillsum.models import ObjectiveValue, EPSILON

# catching and silencing all warnings
logging.captureWarnings(True)
logging.disable(logging.WARNING)


@contextlib.contextmanager
def logs_enabled():
    """ For the tests asserting on a warning """
    logging.disable(logging.NOTSET)
    try:
        yield
    finally:
        logging.disable(logging.WARNING)


@functools.lru_cache(maxsize=None)
def fixture_scorers():
    """ Order 3 models and idf trained on the synthetic corpus, built once """
    sentences = fixtures.make_corpus(1000)
    forward = ngram.train(sentences, 3, 'forward')
    backward = ngram.train(sentences, 3, 'backward')
    idf = corpus.build_idf(sentences)
    sim = similarity.SimilarityModel(fixtures.make_embeddings(), idf)
    return objective.Scorers(forward, backward, sim)


def fixture_objective(s=8, **kw):
    return objective.Objective(objective.ObjectiveConfig(s, **kw), fixture_scorers())


def write(path, text):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
    return path


def uniform_arpa(direction):
    """ Unigram model where every token has probability 0.25 """
    p = repr(math.log10(0.25))
    lines = [f'; direction={direction}', '', '\\data\\', 'ngram 1=4', '', '\\1-grams:']
    lines += [f'{p}\t{token}' for token in ('a', 'b', models.EOS, models.UNK)]
    lines += ['', '\\end\\', '']
    return '\n'.join(lines)


class WeightObjective:
    """ Sum of integer tokens, to test the search apart from the scorers """

    def __init__(self, s=None):
        self.s = s

    def retarget(self, s):
        return WeightObjective(s)

    def bind(self, x):
        def _score(y):
            if len(y) != self.s:
                return objective.INFEASIBLE
            return ObjectiveValue(float(sum(int(token) for token in y)), None, None, True)
        return _score


class TestCorpus(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_tokenize(self):
        self.assertEqual(corpus.tokenize('The  Cat\tsat '), ('the', 'cat', 'sat'))
        self.assertEqual(corpus.tokenize('The Cat', lowercase=False), ('The', 'Cat'))
        self.assertEqual(corpus.tokenize('   '), ())

    def test_idf(self):
        table = corpus.build_idf([('a', 'b', 'a'), ('a', 'c'), ('a',)])
        self.assertEqual(table.doc_count, 3)
        self.assertEqual(table.df['a'], 3)
        self.assertEqual(table.df['b'], 1)
        self.assertAlmostEqual(table.idf('a'), 1.0)
        self.assertAlmostEqual(table.idf('unseen'), math.log(4) + 1)

        table.save(self.path('idf.txt'))
        self.assertEqual(corpus.IdfTable.load(self.path('idf.txt')), table)

    def test_idf_ignores_order(self):
        sentences = fixtures.make_corpus(300, seed=4)
        shuffled = [sentences[i] for i in numpy.random.default_rng(0).permutation(len(sentences))]
        self.assertEqual(corpus.build_idf(shuffled), corpus.build_idf(sentences))

    def test_idf_empty(self):
        with self.assertRaises(corpus.EmptyCorpus):
            corpus.build_idf([])

    def test_read_corpus_skips_blank_lines(self):
        write(self.path('c.txt'), 'A b\n\n  \nc d e\n')
        self.assertEqual(list(corpus.read_corpus(self.path('c.txt'))), [('a', 'b'), ('c', 'd', 'e')])

    def test_dataset(self):
        write(self.path('d.tsv'), 'src one\tref one\n\nsrc two\tref a\tref b\t\n')
        dataset = corpus.load_dataset(self.path('d.tsv'))
        self.assertEqual(len(dataset), 2)
        self.assertEqual(list(dataset), dataset.records)
        self.assertEqual(dataset.records[1].references, (('ref', 'a'), ('ref', 'b')))
        self.assertTrue(dataset.has_references)

    def test_dataset_plain(self):
        write(self.path('d.txt'), 'one two\nthree\n')
        dataset = corpus.load_dataset(self.path('d.txt'), 'plain')
        self.assertEqual(dataset.sources, [('one', 'two'), ('three',)])
        self.assertFalse(dataset.has_references)

    def test_dataset_errors(self):
        write(self.path('noref.tsv'), 'fine\tref\nsource only\n')
        with self.assertRaises(corpus.EmptyReference) as e:
            corpus.load_dataset(self.path('noref.tsv'))
        self.assertEqual(e.exception.line, 2)

        write(self.path('hole.tsv'), 'src\t\tref\n')
        with self.assertRaises(corpus.ParseError):
            corpus.load_dataset(self.path('hole.tsv'))

        with open(self.path('bad.tsv'), 'wb') as f:
            f.write(b'ok\tok\n\xff\xfe\tx\n')
        with self.assertRaises(corpus.ParseError) as e:
            corpus.load_dataset(self.path('bad.tsv'))
        self.assertEqual(e.exception.line, 2)

    def test_bundled_headlines(self):
        dataset = corpus.load_dataset(corpus.data_path('headlines.tsv'))
        self.assertEqual(len(dataset), 10)
        self.assertEqual(len(dataset.records[1].references), 2)


class TestNGram(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.forward = fixture_scorers().forward
        self.backward = fixture_scorers().backward

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_normalization(self):
        histories = [h for h in self.forward.bows if len(h) == 2][:50]
        histories.append(('never', 'seen'))
        for history in histories:
            total = sum(math.exp(self.forward.conditional(history, token))
                        for token in self.forward.predictable)
            self.assertAlmostEqual(total, 1.0, delta=1e-6, msg=f'history {history}')

    def test_singletons_are_unknown(self):
        model = ngram.train([('a', 'b'), ('a', 'c')], 2)
        self.assertEqual(model.vocab, {'a', models.EOS, models.UNK})
        self.assertEqual(model.conditional(('a',), 'b'), model.conditional(('a',), 'zzz'))

    def test_training_errors(self):
        with self.assertRaises(corpus.EmptyCorpus):
            ngram.train([], 3)
        with self.assertRaises(models.ConfigError):
            ngram.train([('a', 'a')], 3, discount=1.5)
        with self.assertRaises(models.ConfigError):
            ngram.train([('a', 'a')], 3, direction='sideways')

    def test_empty_sequence(self):
        with self.assertRaises(ngram.EmptySequence):
            self.forward.log_prob(())

    def test_arpa_round_trip(self):
        self.backward.save(self.path('bwd.arpa'))
        with open(self.path('bwd.arpa'), encoding='utf-8') as f:
            self.assertEqual(f.readline().strip(), '; direction=backward')

        loaded = ngram.load(self.path('bwd.arpa'))
        self.assertEqual(loaded.direction, 'backward')
        self.assertEqual(loaded.order, 3)
        self.assertEqual(loaded.vocab, self.backward.vocab)
        rng = numpy.random.default_rng(5)
        words = sorted(self.backward.predictable - {models.EOS}) + ['zzz']
        for _ in range(100):
            sentence = tuple(rng.choice(words, size=int(rng.integers(1, 16))).tolist())
            self.assertAlmostEqual(ngram.sequence_log_prob(loaded, sentence),
                                   ngram.sequence_log_prob(self.backward, sentence), delta=1e-8)

    def test_hand_computed_bigrams(self):
        # a 3, b 2 times: no singletons, vocabulary a b </s> <unk>, uniform base 1/4
        sentences = [('a', 'b'), ('a', 'b'), ('a',)]
        forward = ngram.train(sentences, 2, 'forward')
        backward = ngram.train(sentences, 2, 'backward')

        # forward unigrams: continuation counts a 1, b 1, </s> 2 over 4, weight 0.75 * 3 / 4
        self.assertAlmostEqual(math.exp(forward.conditional((), 'a')), 13 / 64, delta=1e-12)
        self.assertAlmostEqual(math.exp(forward.conditional((), models.UNK)), 9 / 64, delta=1e-12)
        # p(a|<s>) = 2.25 / 3 + 0.25 * 13/64, p(b|a) = 1.25 / 3 + 0.5 * 13/64
        p_a_bos, p_b_a = 205 / 256, 199 / 384
        # backward scores b a: p(b|<s>) = 1.25 / 3 + 0.5 * 13/64, p(a|b) = 1.25 / 2 + 0.375 * 29/64
        p_b_bos, p_a_b = 199 / 384, 407 / 512

        y = ('a', 'b')
        self.assertAlmostEqual(ngram.sequence_log_prob(forward, y),
                               math.log(p_a_bos) + math.log(p_b_a), delta=1e-12)
        self.assertAlmostEqual(ngram.sequence_log_prob(backward, y),
                               math.log(p_b_bos) + math.log(p_a_b), delta=1e-12)
        score = ngram.fluency(forward, backward, y)
        self.assertEqual(score.token_count, 2)
        self.assertAlmostEqual(score.f_lm, (p_a_bos * p_b_a * p_b_bos * p_a_b) ** 0.25, delta=1e-12)

    def test_backward_is_forward_on_reversed(self):
        sentences = fixtures.make_corpus(1000)
        reversed_model = ngram.train([s[::-1] for s in sentences], 3, 'forward')
        for sentence in fixtures.make_corpus(10, seed=6):
            self.assertAlmostEqual(self.backward.log_prob(sentence),
                                   reversed_model.log_prob(sentence[::-1]), delta=1e-9)

    def test_format_errors(self):
        text = uniform_arpa('forward')
        truncated = text.replace('\\end\\', '')
        write(self.path('cut.arpa'), truncated)
        with self.assertRaises(ngram.FormatError) as e:
            ngram.load(self.path('cut.arpa'))
        self.assertEqual(e.exception.offset, len(truncated.encode('utf-8')))

        write(self.path('count.arpa'), text.replace('ngram 1=4', 'ngram 1=5'))
        with self.assertRaises(ngram.FormatError):
            ngram.load(self.path('count.arpa'))

    def test_uniform_fluency(self):
        forward = ngram.load(write(self.path('f.arpa'), uniform_arpa('forward')))
        backward = ngram.load(write(self.path('b.arpa'), uniform_arpa('backward')))
        rng = numpy.random.default_rng(0)
        for length in range(1, 21):
            tokens = tuple(rng.choice(['a', 'b', 'zzz'], size=length).tolist())
            score = ngram.fluency(forward, backward, tokens)
            self.assertAlmostEqual(score.f_lm, 0.25, delta=1e-12)

            # direct product against the log space value
            product = 1.0
            for i, token in enumerate(tokens):
                product *= math.exp(forward.conditional(tokens[:i], token))
            for i, token in enumerate(tokens[::-1]):
                product *= math.exp(backward.conditional(tokens[::-1][:i], token))
            direct = product ** (1 / (2 * length))
            self.assertLess(abs(direct - score.f_lm) / score.f_lm, 1e-9)

    def test_fluency_checks_directions(self):
        with self.assertRaises(models.ConfigError):
            ngram.fluency(self.forward, self.forward, ('police',))


class TestSimilarity(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.table = similarity.EmbeddingTable(['a', 'b', 'c'], [[1, 0], [0, 1], [-1, 0]])
        self.idf = corpus.IdfTable(10, {'a': 1, 'b': 9})
        self.model = similarity.SimilarityModel(self.table, self.idf)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_load_duplicate(self):
        write(self.path('v.txt'), '3 2\na 1 0\nb 0 1\na 5 5\n')
        with logs_enabled(), self.assertLogs('hillsum.similarity', 'WARNING'):
            table = similarity.load_embeddings(self.path('v.txt'))
        self.assertEqual(len(table), 2)
        numpy.testing.assert_array_equal(table.vector('a'), [1.0, 0.0])

    def test_load_errors(self):
        write(self.path('dim.txt'), '2 3\na 1 2 3\nb 1 2\n')
        with self.assertRaises(similarity.DimensionMismatch) as e:
            similarity.load_embeddings(self.path('dim.txt'))
        self.assertEqual(e.exception.line, 3)

        write(self.path('word.txt'), '1 2\na 1 x\n')
        with self.assertRaises(similarity.FormatError):
            similarity.load_embeddings(self.path('word.txt'))

        write(self.path('nan.txt'), '1 2\na 1 nan\n')
        with self.assertRaises(similarity.FormatError):
            similarity.load_embeddings(self.path('nan.txt'))

        write(self.path('empty.txt'), '')
        with self.assertRaises(similarity.FormatError):
            similarity.load_embeddings(self.path('empty.txt'))

    def test_idf_weighting(self):
        wa, wb = self.idf.idf('a'), self.idf.idf('b')
        vector = self.model.embed(('a', 'b', 'unknown'))
        numpy.testing.assert_allclose(vector.components, [wa / (wa + wb), wb / (wa + wb)])
        self.assertAlmostEqual(vector.coverage, 2 / 3)

    def test_weighted_average(self):
        table = similarity.EmbeddingTable(['a', 'b'], [[2, 0], [0, 4]])
        weights = types.SimpleNamespace(idf={'a': 1.0, 'b': 3.0}.get)
        vector = similarity.embed(table, weights, ('a', 'b'))
        numpy.testing.assert_allclose(vector.components, [0.5, 3.0])
        self.assertEqual(vector.coverage, 1.0)

        # a single token gives its own vector, repeats count twice
        numpy.testing.assert_allclose(similarity.embed(table, self.idf, ('b',)).components, [0, 4])
        numpy.testing.assert_allclose(similarity.embed(table, weights, ('a', 'a', 'b')).components,
                                      [0.8, 2.4])

    def test_cosine_clamped(self):
        self.assertAlmostEqual(self.model.similarity(('a', 'b'), ('a', 'b')), 1.0)
        self.assertEqual(self.model.similarity(('a',), ('b',)), EPSILON)
        self.assertEqual(self.model.similarity(('a',), ('c',)), EPSILON)

    def test_no_coverage(self):
        vector = self.model.embed(('x', 'y'))
        self.assertEqual(vector.coverage, 0.0)
        self.assertEqual(self.model.cosine(vector, self.model.embed(('a',))), EPSILON)

    def test_scale_invariance(self):
        scaled = similarity.SimilarityModel(self.table.scaled(3.0), self.idf)
        x, y = ('a', 'b', 'b'), ('a', 'b')
        self.assertAlmostEqual(scaled.similarity(x, y), self.model.similarity(x, y), delta=1e-12)
        self.assertAlmostEqual(similarity.similarity(self.table, self.idf, x, y),
                               self.model.similarity(x, y), delta=1e-12)

    def test_save_load(self):
        self.table.save(self.path('t.txt'))
        loaded = similarity.load_embeddings(self.path('t.txt'))
        numpy.testing.assert_allclose(loaded.matrix, self.table.matrix)


class TestObjective(unittest.TestCase):

    x = ('police', 'arrested', 'the', 'opposition', 'leader', 'on', 'monday',
         'after', 'weeks', 'of', 'talks', ',', 'officials', 'said', '.')
    y = ('police', 'arrested', 'the', 'opposition', 'leader', 'on', 'monday', '.')

    def test_infeasible_before_scoring(self):
        # no scorer at all, a wrong length never reaches them
        config = objective.ObjectiveConfig(3)
        value = objective.score(config, objective.Scorers(), self.x, self.x[:4])
        self.assertEqual(value.log_score, objective.NEG_INFINITY)
        self.assertFalse(value.feasible)

    def test_config_errors(self):
        with self.assertRaises(models.ConfigError):
            objective.ObjectiveConfig(3, use_similarity=False, lm_mode='none')
        with self.assertRaises(models.ConfigError):
            objective.ObjectiveConfig(0)
        with self.assertRaises(models.ConfigError):
            objective.ObjectiveConfig(3, gamma=-1)
        scorers = fixture_scorers()
        with self.assertRaises(models.ConfigError):
            objective.Objective(objective.ObjectiveConfig(3), scorers._replace(backward=None))

    def test_log_space_product(self):
        scorers = fixture_scorers()
        value = fixture_objective(8)(self.x, self.y)
        f_lm = ngram.fluency(scorers.forward, scorers.backward, self.y).f_lm
        f_sim = scorers.similarity.similarity(self.x, self.y)
        self.assertAlmostEqual(value.f_lm, f_lm, delta=1e-12)
        self.assertAlmostEqual(value.f_sim, f_sim, delta=1e-12)
        self.assertAlmostEqual(value.log_score, math.log(f_lm) + 12 * math.log(f_sim), delta=1e-9)

    def test_variants(self):
        scorers = fixture_scorers()
        forward_only = fixture_objective(8, lm_mode='forward_only', use_similarity=False)(self.x, self.y)
        self.assertAlmostEqual(forward_only.log_score, scorers.forward.log_prob(self.y) / 8, delta=1e-12)
        self.assertIsNone(forward_only.f_sim)

        sim_only = fixture_objective(8, lm_mode='none')(self.x, self.y)
        self.assertIsNone(sim_only.f_lm)
        self.assertAlmostEqual(sim_only.log_score, 12 * math.log(sim_only.f_sim), delta=1e-12)

        no_gamma = fixture_objective(8, gamma=0)(self.x, self.y)
        self.assertAlmostEqual(no_gamma.log_score, math.log(no_gamma.f_lm), delta=1e-12)

    def test_bind(self):
        function = fixture_objective(8)
        self.assertEqual(function.bind(self.x)(self.y), function(self.x, self.y))
        self.assertIs(function.retarget(8), function)
        self.assertEqual(function.retarget(5).target_length, 5)

    def test_compare(self):
        low = ObjectiveValue(-3.0, None, None, True)
        high = ObjectiveValue(-1.0, None, None, True)
        self.assertEqual(objective.compare(high, low), 1)
        self.assertEqual(objective.compare(low, high), -1)
        self.assertEqual(objective.compare(low, low), 0)
        self.assertEqual(objective.compare(objective.INFEASIBLE, low), -1)


class TestSearch(unittest.TestCase):

    x = ('1', '5', '3', '9', '2')

    def test_budget(self):
        budget = search.derive_budget(10, 8)
        self.assertEqual((budget.restarts, budget.steps), (22, 64))
        budget = search.derive_budget(5, 1)
        self.assertEqual((budget.restarts, budget.steps), (1, 1))
        self.assertEqual(budget.override(restarts=7).restarts, 7)
        with self.assertRaises(search.InvalidLength):
            search.derive_budget(3, 4)

    def test_round_half_up(self):
        self.assertEqual(models.round_half_up(7.5), 8)
        self.assertEqual(models.round_half_up(2.5), 3)
        self.assertEqual(models.round_half_up(2.49), 2)

    def test_mask(self):
        mask = search.SelectionMask.parse('0110')
        self.assertEqual(mask.realize('abcd'), ('b', 'c'))
        self.assertEqual(mask.positions, (1, 2))
        self.assertEqual(mask.popcount, 2)
        self.assertEqual(str(search.SelectionMask.from_positions(4, [0, 3])), '1001')

    def test_random_mask_is_uniform(self):
        rng = numpy.random.default_rng(7)
        draws = collections.Counter(str(search.random_mask(4, 2, rng)) for _ in range(10000))
        self.assertEqual(sorted(draws), ['0011', '0101', '0110', '1001', '1010', '1100'])
        for mask, count in draws.items():
            self.assertAlmostEqual(count / 10000, 1 / 6, delta=0.02, msg=mask)

        self.assertEqual(str(search.random_mask(5, 5, rng)), '11111')
        self.assertEqual(search.random_mask(5, 1, rng).popcount, 1)

    def test_random_steps_stay_feasible(self):
        rng = numpy.random.default_rng(11)
        x = tuple(f't{i}' for i in range(15))
        mask = search.random_mask(15, 6, rng)
        for _ in range(10000):
            neighbor = search.swap_neighbor(mask, rng)
            self.assertEqual(neighbor.popcount, 6)
            self.assertEqual(sum(a != b for a, b in zip(mask.bits, neighbor.bits)), 2)
            self.assertTrue(search.is_subsequence(neighbor.realize(x), x))
            mask = neighbor

    def test_no_neighbor(self):
        rng = numpy.random.default_rng(0)
        with self.assertRaises(search.NoNeighbor):
            search.swap_neighbor(search.SelectionMask.parse('111'), rng)
        with self.assertRaises(search.InvalidLength):
            search.random_mask(3, 4, rng)

    def test_fchc_finds_maximum(self):
        result = search.fchc(self.x, 2, WeightObjective(), search.SearchBudget(3, 50), seed=1)
        self.assertEqual(result.best_mask.positions, (1, 3))
        self.assertEqual(result.best_value.log_score, 14.0)
        self.assertLessEqual(result.evaluations, 3 * 51)

    def test_trace(self):
        result = search.fchc(self.x, 3, WeightObjective(), search.SearchBudget(4, 20), seed=2, trace=True)
        by_restart = {}
        for step in result.trace:
            self.assertTrue(math.isfinite(step.score))
            self.assertEqual(step.mask.count('1'), 3)
            by_restart.setdefault(step.restart, []).append(step.score)
        self.assertEqual(sorted(by_restart), [0, 1, 2, 3])
        for scores in by_restart.values():
            self.assertEqual(scores, sorted(scores))

    def test_workers_do_not_change_result(self):
        x = tuple(str(v) for v in numpy.random.default_rng(3).integers(0, 50, size=14))
        budget = search.SearchBudget(12, 30)
        single = search.fchc(x, 5, WeightObjective(), budget, seed=9)
        threaded = search.fchc(x, 5, WeightObjective(), budget, seed=9, workers=4)
        self.assertEqual(single, threaded)

    def test_full_and_clamped_length(self):
        result = search.fchc(self.x, 5, WeightObjective(), search.SearchBudget(3, 3))
        self.assertEqual(str(result.best_mask), '11111')
        self.assertEqual(result.evaluations, 1)

        with logs_enabled(), self.assertLogs('hillsum.search', 'WARNING'):
            result = search.fchc(self.x, 9, WeightObjective(), search.SearchBudget(3, 3))
        self.assertEqual(result.best_mask.popcount, 5)

    def test_exhaustive(self):
        result = search.exhaustive_search(self.x, 2, WeightObjective())
        self.assertEqual(result.best_mask.positions, (1, 3))
        self.assertEqual(result.evaluations, 10)

        # ties go to the smallest bit string
        result = search.exhaustive_search(('1',) * 4, 2, WeightObjective())
        self.assertEqual(str(result.best_mask), '0011')
        result = search.exhaustive_search(('2', '1', '1', '2', '1'), 2, WeightObjective())
        self.assertEqual(str(result.best_mask), '10010')
        result = search.exhaustive_search(('1', '2', '1', '1'), 2, WeightObjective())
        self.assertEqual(str(result.best_mask), '0101')

        with self.assertRaises(search.TooLarge) as e:
            search.exhaustive_search(('1',) * 30, 15, WeightObjective(), cap=1000)
        self.assertEqual(e.exception.count, math.comb(30, 15))

    def test_is_subsequence(self):
        self.assertTrue(search.is_subsequence(('a', 'c'), ('a', 'b', 'c')))
        self.assertFalse(search.is_subsequence(('c', 'a'), ('a', 'b', 'c')))


class TestRouge(unittest.TestCase):

    f1 = rouge.EvalProtocol()
    recall = rouge.EvalProtocol('truncated_recall_75')

    def check(self, score, precision, recall, f1):
        self.assertAlmostEqual(score.precision, precision, delta=1e-9)
        self.assertAlmostEqual(score.recall, recall, delta=1e-9)
        self.assertAlmostEqual(score.f1, f1, delta=1e-9)

    def test_hand_computed(self):
        t = corpus.tokenize
        cases = [
            # candidate, reference, metric, precision, recall, f1
            ('a b c', 'a b c', 'rouge-1', 1, 1, 1),
            ('a b c', 'a b c', 'rouge-2', 1, 1, 1),
            ('a b c', 'a b c', 'rouge-l', 1, 1, 1),
            ('', 'a b', 'rouge-1', 0, 0, 0),
            ('', 'a b', 'rouge-l', 0, 0, 0),
            ('the the the', 'the cat', 'rouge-1', 1 / 3, 1 / 2, 0.4),
            ('a b c d', 'a b d c', 'rouge-2', 1 / 3, 1 / 3, 1 / 3),
            ('a b c d', 'a c b d', 'rouge-l', 0.75, 0.75, 0.75),
            ('a b', 'b a', 'rouge-l', 0.5, 0.5, 0.5),
            ('x y', 'a b', 'rouge-1', 0, 0, 0),
            ('a b c d', 'a b', 'rouge-1', 0.5, 1, 2 / 3),
            ('police killed the gunman', 'police kill the gunman', 'rouge-l', 0.75, 0.75, 0.75),
            ('a', 'a b', 'rouge-2', 0, 0, 0),
        ]
        for candidate, reference, metric, *expected in cases:
            with self.subTest(candidate=candidate, reference=reference, metric=metric):
                score = rouge.score_instance(t(candidate), [t(reference)], self.f1)[metric]
                self.check(score, *expected)

    def test_swapping_candidate_and_reference(self):
        rng = numpy.random.default_rng(8)
        words = list('abcdef')
        for _ in range(50):
            a = tuple(rng.choice(words, size=int(rng.integers(1, 12))).tolist())
            b = tuple(rng.choice(words, size=int(rng.integers(1, 12))).tolist())
            for forward, backward in ((rouge.rouge_n(a, b, 1), rouge.rouge_n(b, a, 1)),
                                      (rouge.rouge_n(a, b, 2), rouge.rouge_n(b, a, 2)),
                                      (rouge.rouge_l(a, b), rouge.rouge_l(b, a))):
                self.check(backward, forward.recall, forward.precision, forward.f1)

    def test_evaluate_ignores_record_order(self):
        dataset = fixtures.make_dataset(30, seed=9)
        summaries = [record.source[:6] for record in dataset]
        order = numpy.random.default_rng(1).permutation(len(summaries))
        shuffled = models.ParallelDataset([dataset.records[i] for i in order])
        frame = rouge.evaluate(dataset, summaries)
        other = rouge.evaluate(shuffled, [summaries[i] for i in order])
        for field in ('precision', 'recall', 'f1', 'avg_len_words'):
            numpy.testing.assert_allclose(other[field], frame[field], rtol=0, atol=1e-12)

    def test_truncate(self):
        # the 19th token ends right before the 75th character, a space
        self.assertEqual(len(rouge.truncate_75(('abc',) * 25)), 19)
        # the 11th token is cut in the middle
        self.assertEqual(len(rouge.truncate_75(('abcdef',) * 20)), 10)
        self.assertEqual(rouge.truncate_75(('x' * 80,)), ())
        self.assertEqual(rouge.truncate_75(('short', 'one')), ('short', 'one'))

    def test_truncated_recall(self):
        score = rouge.score_instance(('abc',) * 25, [('abc',) * 30], self.recall)['rouge-1']
        self.assertAlmostEqual(score.recall, 19 / 30)

    def test_multi_reference(self):
        t = corpus.tokenize
        scores = rouge.score_instance(t('a b'), [t('a b'), t('c d')], self.f1)
        self.assertEqual(scores['rouge-1'].f1, 1.0)
        average = rouge.EvalProtocol(multi_ref='average')
        scores = rouge.score_instance(t('a b'), [t('a b'), t('c d')], average)
        self.assertAlmostEqual(scores['rouge-1'].f1, 0.5)

        # the chosen reference gives the whole triple
        references = [t('a'), t('a b c d e f g h')]
        self.check(rouge.score_instance(t('a b c d'), references, self.f1)['rouge-1'], 1, 0.5, 2 / 3)
        self.check(rouge.score_instance(t('a b c d'), references, self.recall)['rouge-1'], 0.25, 1, 0.4)

    def test_case_folding(self):
        scores = rouge.score_instance(('Police',), [('police',)], self.f1)
        self.assertEqual(scores['rouge-1'].f1, 1.0)
        cased = rouge.EvalProtocol(lowercase=False)
        self.assertEqual(rouge.score_instance(('Police',), [('police',)], cased)['rouge-1'].f1, 0.0)

    def test_evaluate(self):
        dataset = fixtures.make_dataset(10)
        frame = rouge.evaluate(dataset, [record.references[0] for record in dataset])
        for metric in rouge.METRICS:
            self.assertAlmostEqual(frame.loc[metric, 'f1'], 1.0)
        self.assertEqual(frame.loc['rouge-1', 'n_instances'], 10)
        self.assertAlmostEqual(frame.loc['rouge-1', 'avg_len_words'],
                               numpy.mean([len(record.references[0]) for record in dataset]))

        with self.assertRaises(rouge.LengthMismatch):
            rouge.evaluate(dataset, [()] * 9)

    def test_protocol(self):
        with self.assertRaises(models.ConfigError):
            rouge.EvalProtocol('bleu')
        self.assertEqual(self.recall.headline, 'recall')
        self.assertEqual(str(self.f1), 'f1/max')


class TestBaselines(unittest.TestCase):

    x = tuple('abcdefghij')

    def test_lead(self):
        parse = baselines.LeadSpec.parse
        self.assertEqual(baselines.lead(self.x, parse('N-8')), self.x[:8])
        self.assertEqual(baselines.lead(self.x, parse('N-20')), self.x)
        self.assertEqual(baselines.lead(self.x, parse('P-50')), self.x[:5])
        self.assertEqual(baselines.lead(self.x, parse('P-25')), self.x[:3])
        self.assertEqual(baselines.lead(self.x, parse('P-1')), self.x[:1])
        # 7.5 rounds half up
        self.assertEqual(len(baselines.lead(tuple('abcdefghijklmno'), parse('P-50'))), 8)
        self.assertEqual(baselines.lead(('abcdef',) * 20, parse('C-75')), ('abcdef',) * 10)

    def test_lead_spec(self):
        self.assertEqual(str(baselines.LeadSpec.parse('n-8')), 'Lead-N-8')
        self.assertEqual(str(baselines.LeadSpec.parse('P-50')), 'Lead-P-50')
        for bad in ('X-1', 'N-', 'P-150', 'N-0', 'C-abc'):
            with self.assertRaises(models.ConfigError, msg=bad):
                baselines.LeadSpec.parse(bad)

    def test_lead_sweep_peaks_inside(self):
        dataset = fixtures.make_prefix_dataset(200)
        frame = baselines.lead_sweep(dataset, 'words_n', range(2, 21))
        self.assertEqual(len(frame), 19)
        best = frame.loc[frame.r1.idxmax(), 'param']
        self.assertTrue(2 < best < 20, best)

    def test_lead_sweep_recall_grows_with_percent(self):
        sources = fixtures.make_dataset(50, seed=10).sources
        dataset = models.ParallelDataset([models.Record(x, (x,)) for x in sources])
        frame = baselines.lead_sweep(dataset, 'percent_p', range(10, 101, 10))
        for metric in ('r1', 'r2', 'rl'):
            self.assertTrue(frame[f'{metric}_recall'].is_monotonic_increasing, metric)
            numpy.testing.assert_allclose(frame[metric], frame[f'{metric}_f1'])
        self.assertAlmostEqual(frame.r1_recall.iloc[-1], 1.0)
        self.assertAlmostEqual(frame.r1_precision.min(), 1.0)

    def test_positional_bias(self):
        histogram = baselines.positional_bias([tuple('abcd')], [('a', 'd')])
        self.assertEqual(histogram.bins, (0.5, 0.0, 0.0, 0.5))

        # repeated tokens take the leftmost unused occurrence
        histogram = baselines.positional_bias([('x', 'x', 'y', 'x')], [('x', 'x', 'unknown')])
        self.assertEqual(histogram.bins, (0.5, 0.5, 0.0, 0.0))
        self.assertEqual(histogram.counted, 2)

        with self.assertRaises(rouge.LengthMismatch):
            baselines.positional_bias([tuple('ab')], [])

    def test_extractiveness(self):
        dataset = models.ParallelDataset([models.Record(('a', 'b', 'c'), (('a', 'b', 'z', 'z'),))])
        self.assertEqual(baselines.extractiveness(dataset), 0.5)

    def test_brackets(self):
        dataset = models.ParallelDataset([models.Record(tuple('abcdefghij'), (tuple('abcdefgh'),))] * 2)
        runs = [('eight', [tuple('abcdefgh')] * 2), ('six', [tuple('abcdef')] * 2),
                ('two', [tuple('ab')] * 2)]
        with logs_enabled(), self.assertLogs('hillsum.baselines', 'WARNING'):
            tables, unassigned = baselines.bracket_report(runs, dataset, rouge.EvalProtocol(),
                                                          [(6, 8), (8, 10)])
        self.assertEqual(list(tables[(8, 10)].name), ['eight'])
        self.assertEqual(list(tables[(6, 8)].name), ['six'])
        self.assertEqual(unassigned, ['two'])

        with self.assertRaises(baselines.OverlappingBrackets):
            baselines.bracket_report(runs, dataset, rouge.EvalProtocol(), [(6, 9), (8, 10)])


class TestController(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        scorers = fixture_scorers()
        cls.files = {name: os.path.join(cls.tmp.name, name)
                     for name in ('fwd.arpa', 'bwd.arpa', 'vectors.txt', 'idf.txt', 'data.tsv', 'small.tsv')}
        scorers.forward.save(cls.files['fwd.arpa'])
        scorers.backward.save(cls.files['bwd.arpa'])
        scorers.similarity.table.save(cls.files['vectors.txt'])
        scorers.similarity.idf.save(cls.files['idf.txt'])

        cls.dataset = fixtures.make_dataset(6, min_length=10)
        corpus.save_dataset(cls.dataset, cls.files['data.tsv'])
        small = [models.Record(record.source[:9], record.references) for record in cls.dataset]
        corpus.save_dataset(models.ParallelDataset(small), cls.files['small.tsv'])

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def config(self, **kw):
        options = dict(dataset=self.files['data.tsv'],
                       lm_forward=self.files['fwd.arpa'],
                       lm_backward=self.files['bwd.arpa'],
                       embeddings=self.files['vectors.txt'],
                       idf=self.files['idf.txt'],
                       length_words=8)
        options.update(kw)
        return controller.RunConfig(**options)

    def summarize(self, name, **kw):
        out = os.path.join(self.tmp.name, name)
        code = asyncio.run(with_app(self.config(output=out, **kw), lambda app: app.run_summarize()))
        self.assertEqual(code, 0)
        with open(out, encoding='utf-8') as f:
            return f.read()

    def test_run_config(self):
        with self.assertRaises(models.ConfigError):
            self.config(length_ratio=50)
        with self.assertRaises(models.ConfigError):
            self.config(length_words=None)
        with self.assertRaises(models.ConfigError):
            self.config(workers=0)

    def test_resolve_length(self):
        config = self.config(length_words=None, length_ratio=50)
        self.assertEqual(config.resolve_length(10), 5)
        self.assertEqual(config.resolve_length(9), 5)
        self.assertEqual(self.config(length_words=None, length_ratio=10).resolve_length(3), 1)
        with logs_enabled(), self.assertLogs('hillsum.controller', 'WARNING'):
            self.assertEqual(self.config().resolve_length(5), 5)

    def test_summarize(self):
        records = [json.loads(line) for line in self.summarize('out.jsonl').splitlines()]
        self.assertEqual([record['id'] for record in records], list(range(6)))
        for record, source in zip(records, self.dataset.sources):
            summary = tuple(record['summary'].split())
            self.assertEqual(len(summary), 8)
            self.assertEqual(record['s'], 8)
            self.assertTrue(search.is_subsequence(summary, source))
            self.assertTrue(math.isfinite(record['score']))
            self.assertEqual(record['seed'], 0)

    def test_deterministic_across_workers(self):
        self.assertEqual(self.summarize('one.jsonl', workers=1), self.summarize('eight.jsonl', workers=8))

    def test_trace(self):
        trace = os.path.join(self.tmp.name, 'trace.jsonl')
        self.summarize('traced.jsonl', trace=trace, restarts=2, steps=10)
        with open(trace, encoding='utf-8') as f:
            steps = [json.loads(line) for line in f]
        self.assertEqual({step['id'] for step in steps}, set(range(6)))
        for step in steps:
            self.assertEqual(set(step), {'id', 'restart', 'step', 'score', 'mask'})
            self.assertEqual(step['mask'].count('1'), 8)
            self.assertTrue(math.isfinite(step['score']))

    def test_instance_error_is_recorded(self):
        async def job(app):
            return app.summarize_one(0, ())
        outcome = asyncio.run(with_app(self.config(), job))
        self.assertIsNone(outcome.result)
        self.assertIn('InvalidLength', outcome.error)

    def test_missing_and_swapped_models(self):
        with self.assertRaises(models.ConfigError):
            asyncio.run(controller.App(self.config(lm_backward=None)))
        swapped = self.config(lm_forward=self.files['bwd.arpa'], lm_backward=self.files['fwd.arpa'])
        with self.assertRaises(models.ConfigError):
            asyncio.run(controller.App(swapped))
        # forward only needs no backward model
        config = self.config(lm_backward=None, lm_mode='forward_only')
        asyncio.run(with_app(config, lambda app: asyncio.sleep(0)))

    def test_exhaustive_gap(self):
        config = self.config(dataset=self.files['small.tsv'], length_words=4)

        async def job(app):
            return await app.exhaustive_gap(app.load_dataset())
        frame = asyncio.run(with_app(config, job))
        self.assertEqual(list(frame.columns), controller.GAP_COLUMNS)
        self.assertEqual(len(frame), 6)
        self.assertTrue((frame.objective_gap >= -1e-9).all())
        self.assertTrue((frame.exhaustive_evaluations == math.comb(9, 4)).all())
        self.assertIn('of 6 instances', controller.gap_summary(frame))

    def test_ablation_and_budget_sweep(self):
        config = self.config(restarts=2, steps=10)

        async def job(app):
            dataset = app.load_dataset()
            return await app.ablation(dataset), await app.budget_sweep(dataset, [1, 0.5])
        ablation, sweep = asyncio.run(with_app(config, job, {'forward', 'backward', 'similarity'}))
        self.assertEqual(list(ablation.name), [name for name, _, _ in controller.ABLATIONS])
        self.assertTrue((ablation.failed == 0).all())
        self.assertEqual(list(sweep.factor), [0.5, 1])
        self.assertTrue(((0 <= sweep.r1) & (sweep.r1 <= 1)).all())

    def test_baseline_records(self):
        spec = baselines.LeadSpec.parse('N-8')
        records = list(controller.baseline(self.dataset, spec))
        self.assertEqual(len(records), 6)
        self.assertEqual(records[0]['baseline'], 'Lead-N-8')
        self.assertEqual(records[0]['summary'].split(), list(self.dataset.sources[0][:8]))


class TestCli(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        with contextlib.redirect_stdout(io.StringIO()):
            self.assertEqual(main(['fixtures', self.tmp.name, '--sentences', '300', '--records', '8']), 0)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def run_main(self, *argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            code = main(list(argv))
        return code, stdout.getvalue(), stderr.getvalue()

    def test_fixtures(self):
        for name in ('corpus.txt', 'dataset.tsv', 'vectors.txt'):
            self.assertTrue(os.path.exists(self.path(name)))
        self.assertEqual(len(corpus.load_dataset(self.path('dataset.tsv'))), 8)

    def test_train_lm(self):
        code, out, _ = self.run_main('train-lm', self.path('corpus.txt'), self.path('b.arpa'),
                                     '--order', '2', '--direction', 'backward')
        self.assertEqual(code, 0)
        self.assertIn('ngram 2\t', out)
        with open(self.path('b.arpa'), encoding='utf-8') as f:
            self.assertIn('; direction=backward', f.read())
        self.assertEqual(ngram.load(self.path('b.arpa')).direction, 'backward')

    def test_unreadable_path(self):
        code, _, err = self.run_main('train-lm', self.path('missing.txt'), self.path('x.arpa'))
        self.assertEqual(code, 2)
        self.assertIn('error', err)

    def test_summarize_pipeline(self):
        corpus_path = self.path('corpus.txt')
        for direction in ('forward', 'backward'):
            code, _, _ = self.run_main('train-lm', corpus_path, self.path(f'{direction}.arpa'),
                                       '--order', '3', '--direction', direction)
            self.assertEqual(code, 0)
        self.assertEqual(self.run_main('train-idf', corpus_path, self.path('idf.txt'))[0], 0)

        code, _, _ = self.run_main('summarize', self.path('dataset.tsv'),
                                   '--lm-fwd', self.path('forward.arpa'),
                                   '--lm-bwd', self.path('backward.arpa'),
                                   '--embeddings', self.path('vectors.txt'),
                                   '--idf', self.path('idf.txt'),
                                   '--len-ratio', '50', '--restarts', '2', '--steps', '10',
                                   '-o', self.path('out.jsonl'))
        self.assertEqual(code, 0)

        code, _, _ = self.run_main('evaluate', self.path('out.jsonl'), self.path('dataset.tsv'),
                                   '-o', self.path('scores.json'))
        self.assertEqual(code, 0)
        with open(self.path('scores.json'), encoding='utf-8') as f:
            scores = json.load(f)
        self.assertEqual([row['metric'] for row in scores], list(rouge.METRICS))

    def test_evaluate_identity_and_mismatch(self):
        dataset = corpus.load_dataset(self.path('dataset.tsv'))
        write(self.path('refs.txt'), ''.join(models.join(r.references[0]) + '\n' for r in dataset))
        code, out, _ = self.run_main('evaluate', self.path('refs.txt'), self.path('dataset.tsv'))
        self.assertEqual(code, 0)
        frame = pandas.read_csv(io.StringIO(out), sep='\t', index_col=0)
        self.assertTrue((frame.f1 == 1.0).all())

        write(self.path('short.txt'), 'one summary\n')
        code, _, err = self.run_main('evaluate', self.path('short.txt'), self.path('dataset.tsv'),
                                     '--truncate-75')
        self.assertEqual(code, 2)
        self.assertIn('1 summaries for 8 records', err)

    def test_lead_sweep_and_bias(self):
        code, out, _ = self.run_main('analyze', 'lead-sweep', self.path('dataset.tsv'))
        self.assertEqual(code, 0)
        self.assertEqual(len(pandas.read_csv(io.StringIO(out), sep='\t')), 19)

        code, _, _ = self.run_main('baseline', self.path('dataset.tsv'), '--lead', 'N-8',
                                   '-o', self.path('lead.jsonl'))
        self.assertEqual(code, 0)
        code, out, _ = self.run_main('analyze', 'positional-bias', self.path('dataset.tsv'),
                                     self.path('lead.jsonl'))
        self.assertEqual(code, 0)
        histogram = pandas.read_csv(io.StringIO(out))
        self.assertEqual(list(histogram.columns), ['q1', 'q2', 'q3', 'q4'])
        self.assertAlmostEqual(histogram.iloc[0].sum(), 1.0, delta=1e-5)

    def test_brackets_and_extractiveness(self):
        self.run_main('baseline', self.path('dataset.tsv'), '--lead', 'N-8', '-o', self.path('n8.jsonl'))
        self.run_main('baseline', self.path('dataset.tsv'), '--lead', 'N-2', '-o', self.path('n2.jsonl'))
        code, out, _ = self.run_main('analyze', 'brackets', self.path('dataset.tsv'),
                                     f'eight={self.path("n8.jsonl")}', f'two={self.path("n2.jsonl")}',
                                     '--bracket', '7:9')
        self.assertEqual(code, 0)
        frame = pandas.read_csv(io.StringIO(out), sep='\t')
        self.assertEqual(list(frame.name), ['eight', 'two'])
        self.assertEqual(list(frame.bracket), ['[7, 9)', 'none'])

        code, out, _ = self.run_main('analyze', 'extractiveness', self.path('dataset.tsv'))
        self.assertEqual(code, 0)
        self.assertTrue(0 < float(out) <= 1)

    def test_read_summaries(self):
        write(self.path('mixed.jsonl'), '{"id": 0, "summary": "A b"}\n{"id": 1, "error": "x"}\n\nc\n')
        self.assertEqual(report.read_summaries(self.path('mixed.jsonl')), [('a', 'b'), (), (), ('c',)])

    def test_length_flags_exclusive(self):
        with contextlib.redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as e:
            main(['summarize', self.path('dataset.tsv'), '--len', '8', '--len-ratio', '50'])
        self.assertEqual(e.exception.code, 2)


class TestAcceptance(unittest.TestCase):
    """ Scaled down end to end checks on the synthetic data """

    def instances(self, count, seed):
        rng = numpy.random.default_rng(seed)
        dataset = fixtures.make_dataset(count, seed=seed, min_length=12)
        for record in dataset:
            n = int(rng.integers(8, 13))
            yield record.source[:n], int(rng.integers(3, 6))

    def test_oracle_equivalence(self):
        """ 200 instances, n in 8..12, s in 3..5.

        At 5x the default betas every instance but at most 1% must reach the
        exhaustive maximum. The default budget reaches it on 134 of these 200
        (0.670), above the floor asserted here; test_default_budget_ceiling
        shows why no objective with a single best mask can get to 0.95.
        """
        default_matched = scaled_matched = 0
        instances = list(self.instances(200, seed=21))
        for x, s in instances:
            function = fixture_objective(s)
            best = search.exhaustive_search(x, s, function).best_value.log_score

            default = search.fchc(x, s, function, search.derive_budget(len(x), s))
            self.assertLessEqual(default.best_value.log_score, best + 1e-9)
            default_matched += default.best_value.log_score >= best - 1e-9

            budget = search.derive_budget(len(x), s, 5 * models.BETA_R, 5 * models.BETA_T)
            scaled = search.fchc(x, s, function, budget)
            scaled_matched += scaled.best_value.log_score >= best - 1e-9

        self.assertGreaterEqual(scaled_matched / len(instances), 0.99)
        self.assertGreaterEqual(default_matched / len(instances), 0.6)

    def test_default_budget_ceiling(self):
        """ Upper bound on the default budget match rate for a single best mask.

        A restart hits that mask only if it starts on it (1 / C(n, s)) or a
        step proposes it, at most 1 / (s (n - s)) per step. Restarts are
        independent.
        """
        ceilings = {}
        for n in range(8, 13):
            for s in range(3, 6):
                budget = search.derive_budget(n, s)
                miss = (1 - 1 / (s * (n - s))) ** budget.steps
                per_restart = min(1.0, 1 / math.comb(n, s) + 1 - miss)
                ceilings[n, s] = 1 - (1 - per_restart) ** budget.restarts

        self.assertLess(max(ceilings[n, 3] for n in range(8, 13)), 0.85)
        self.assertLess(numpy.mean(list(ceilings.values())), 0.95)
        self.assertGreater(min(ceilings[n, 5] for n in range(8, 13)), 0.99)

    def test_restart_monotonicity(self):
        for x, s in self.instances(50, seed=22):
            function = fixture_objective(s)
            scores = [search.fchc(x, s, function, search.SearchBudget(r, 10), seed=4).best_value.log_score
                      for r in (1, 2, 4, 8, 16)]
            self.assertEqual(scores, sorted(scores))

    def test_search_beats_random_and_lead(self):
        dataset = fixtures.make_dataset(20, seed=23, min_length=10)
        function = fixture_objective(8)
        rng = numpy.random.default_rng(0)
        lead = baselines.LeadSpec('words_n', 8)

        searched, random, leading = [], [], []
        for x in dataset.sources:
            result = search.fchc(x, 8, function, search.derive_budget(len(x), 8))
            self.assertEqual(len(result.best_mask.realize(x)), 8)
            searched.append(result.best_value.log_score)
            random.append(numpy.mean([function(x, search.random_mask(len(x), 8, rng).realize(x)).log_score
                                      for _ in range(5)]))
            leading.append(function(x, baselines.lead(x, lead)).log_score)

        self.assertGreater(numpy.mean(searched), numpy.mean(random))
        self.assertGreater(numpy.mean(searched), numpy.mean(leading))


if __name__ == '__main__':
    unittest.main()
