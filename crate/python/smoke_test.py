"""Smoke test for the ulbound Python extension.

Build and install first:

    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml

then run `python python/smoke_test.py`.
"""

import math

import ulbound

LETOR = """\
2 qid:1 1:0.9 #docid = a
0 qid:1 1:0.1 #docid = b
1 qid:1 1:0.5 #docid = c
0 qid:2 1:0.3 #docid = d
1 qid:2 1:0.7 #docid = e
"""


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    corpus = ulbound.Corpus.parse(LETOR)
    assert len(corpus) == 2 and corpus.g_max == 2
    assert corpus.qids() == ["1", "2"]
    assert corpus.labels("1") == [2, 0, 1]

    # exact and closed-form lower bounds agree for DCG
    dcg = ulbound.MetricSpec("dcg", 2, 4)
    labels = [3, 1, 0, 4, 0]
    assert close(dcg.rlb(labels), dcg.rlb(labels, method="exhaustive"), 1e-12)

    # SP and ERR audit fixtures: closed forms are approximations
    sp = ulbound.MetricSpec("sp", 2, 1)
    assert sp.rlb([1, 0]) == 0.5 and sp.rlb([1, 0], method="exhaustive") == 0.75
    err = ulbound.MetricSpec("err", 2, 4)
    assert close(err.rlb([4, 0]), 0.593262, 1e-6)
    assert err.rlb([4, 0], method="exhaustive") == 45 / 64
    est, se = err.rlb_montecarlo([4, 0], 20000, seed=1)
    assert abs(est - 45 / 64) <= 5 * se

    ndcg = dcg.evaluate([2, 3]) / dcg.iub([2, 3])
    assert close(ndcg, (3 + 7 / math.log2(3)) / (7 + 3 / math.log2(3)))

    assert ulbound.normalize("v2", 0.0, 1.0, 0.5) == (-1.0, False)
    assert ulbound.normalize("upper", 0.3, 0.0, 0.0) == (0.0, True)

    base = {f"m{i}": 8.0 - i for i in range(8)}
    swapped = dict(base, m3=base["m4"], m4=base["m3"])
    assert close(ulbound.kendall_tau(base, swapped), 1 - 2 / 28)
    assert close(ulbound.swap_rate(base, swapped), 1 / 28)
    assert ulbound.pad({"a": 0.4, "b": -0.1}) == (125.0, 0)

    x = [0.1, 0.2, 0.3, 0.4]
    y = [0.2, 0.3, 0.4, 0.6]  # t = -5, df = 3
    assert close(ulbound.paired_ttest(x, y), 0.015392, 1e-5)
    assert 0.0 <= ulbound.bootstrap_test(x, y, 500, 3) <= 1.0

    runs = {"ideal": corpus.rank("ideal"), "feature": corpus.rank("feature:1")}
    scores = ulbound.evaluate_runs(corpus, runs, "ndcg", [1, 2], variant="upper")
    assert scores["ideal"] == {"1": [1.0, 1.0], "2": [1.0, 1.0]}
    tests = ulbound.pairwise_pvalues(scores, [1, 2])
    assert len(tests) == 2

    try:
        ulbound.MetricSpec("ndcg", 0, 4)
    except ValueError:
        pass
    else:
        raise AssertionError("k = 0 must be rejected")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
