"""Slow, obviously-correct reference computations used as test oracles.

Nothing here imports the package under test.
"""

import itertools
import math


def naive_df(docs, w):
    return sum(1 for d in docs if w in d)


def naive_co_df(docs, w, v):
    return sum(1 for d in docs if w in d and v in d)


def naive_pmi(docs, w, v, eps):
    n = len(docs)
    return math.log(n * (naive_co_df(docs, w, v) + eps) / (naive_df(docs, w) * naive_df(docs, v)))


def naive_anchor_polarity(docs, w, pos, neg, eps):
    p = sum(naive_pmi(docs, w, u, eps) for u in pos) / len(pos)
    q = sum(naive_pmi(docs, w, v, eps) for v in neg) / len(neg)
    return p - q


def naive_vocab(docs, min_df):
    seen = []
    for d in docs:
        for t in d:
            if t not in seen:
                seen.append(t)
    return [t for t in seen if naive_df(docs, t) >= min_df]


def exhaustive_best_objective(scores: dict, K: int, candidates=None):
    """Max over disjoint K-subset pairs (P, N) of mean(score[P]) - mean(score[N])."""
    toks = sorted(candidates if candidates is not None else scores)
    best = -math.inf
    for P in itertools.combinations(toks, K):
        rest = [t for t in toks if t not in P]
        sp = math.fsum(scores[t] for t in P)
        for N in itertools.combinations(rest, K):
            val = sp / K - math.fsum(scores[t] for t in N) / K
            best = max(best, val)
    return best


def set_objective(scores: dict, P, N, K):
    return math.fsum(scores[t] for t in sorted(P)) / K - math.fsum(scores[t] for t in sorted(N)) / K


def naive_histogram(polarities, lo, hi, L):
    """Bin by scanning intervals one by one; last interval closed."""
    counts = [0] * L
    for p in polarities:
        if hi == lo:
            counts[0] += 1
            continue
        for j in range(L):
            a = lo + (j / L) * (hi - lo)
            b = lo + ((j + 1) / L) * (hi - lo)
            if a <= p < b or (j == L - 1 and p == hi):
                counts[j] += 1
                break
    n = len(polarities)
    return [c / n for c in counts] if n else [0.0] * L
