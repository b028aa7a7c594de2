"""Good/bad-news polarity lexicon induced from document co-occurrence.

Co-occurrence is counted at document level: a token is either present in a
document or not. PMI between two tokens is

    pmi(w, v) = ln( N * (co_df(w, v) + eps) / (df(w) * df(v)) )

where the additive ``eps`` only touches the joint count so that pairs that
never co-occur still get a finite (strongly negative) score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

DEFAULT_EPSILON = 0.5
DEFAULT_MIN_DF = 5
DEFAULT_K = 100


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class SeedSets:
    pos: tuple[str, ...]
    neg: tuple[str, ...]

    def __post_init__(self):
        if not self.pos or not self.neg:
            raise LexiconError("seed sets must both be non-empty")
        overlap = set(self.pos) & set(self.neg)
        if overlap:
            raise LexiconError(f"seed sets overlap: {sorted(overlap)}")
        if len(set(self.pos)) != len(self.pos) or len(set(self.neg)) != len(self.neg):
            raise LexiconError("duplicate token inside a seed set")


class CorpusStats:
    """Document frequencies and pairwise joint document frequencies.

    Parameters
    ----------
    docs : sequence of token sequences
        The corpus. Only token presence per document matters.
    min_df : int
        Tokens appearing in fewer documents are dropped from the vocabulary.

    Attributes
    ----------
    N : int
        Number of documents.
    vocab : list of str
        Retained tokens in order of first appearance.
    df : dict
        Token to document frequency, over ``vocab`` only.
    """

    def __init__(self, docs: Sequence[Sequence[str]], min_df: int = DEFAULT_MIN_DF):
        if min_df < 1:
            raise LexiconError("min_df must be >= 1")
        if len(docs) == 0:
            raise LexiconError("empty corpus")
        self.N = len(docs)
        self.min_df = min_df

        first_seen: dict[str, int] = {}
        rows, cols = [], []
        for i, doc in enumerate(docs):
            for tok in dict.fromkeys(doc):
                rows.append(i)
                cols.append(first_seen.setdefault(tok, len(first_seen)))
        full = sparse.csc_matrix(
            (np.ones(len(rows), dtype=np.int64), (rows, cols)),
            shape=(self.N, len(first_seen)),
        )
        full_df = np.asarray(full.sum(axis=0)).ravel()
        keep = [tok for tok, col in first_seen.items() if full_df[col] >= min_df]
        if not keep:
            raise LexiconError(f"no token reaches min_df={min_df}")
        self.vocab: list[str] = keep
        self.index = {tok: j for j, tok in enumerate(keep)}
        self._X = full[:, [first_seen[t] for t in keep]].tocsc()
        self._df = np.asarray(self._X.sum(axis=0)).ravel().astype(np.int64)
        self.df = {tok: int(self._df[j]) for j, tok in enumerate(keep)}

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def _col(self, token: str) -> int:
        try:
            return self.index[token]
        except KeyError:
            raise LexiconError(f"token {token!r} not in vocabulary") from None

    def co_df(self, w: str, v: str) -> int:
        a, b = self._col(w), self._col(v)
        return int(self._X[:, a].multiply(self._X[:, b]).sum())

    def co_df_against(self, anchors: Sequence[str]) -> np.ndarray:
        """Joint document frequencies of every vocab token with each anchor, shape (M, A)."""
        cols = [self._col(a) for a in anchors]
        return np.asarray((self._X.T @ self._X[:, cols]).todense(), dtype=np.int64)

    def df_array(self, tokens: Sequence[str] | None = None) -> np.ndarray:
        if tokens is None:
            return self._df.copy()
        return self._df[[self._col(t) for t in tokens]]


def pmi(stats: CorpusStats, w: str, v: str, epsilon: float = DEFAULT_EPSILON) -> float:
    co = stats.co_df(w, v)
    return math.log(stats.N * (co + epsilon) / (stats.df[w] * stats.df[v]))


def pmi_against(stats: CorpusStats, anchors: Sequence[str], epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """PMI of every vocab token against each anchor, shape (M, len(anchors))."""
    co = stats.co_df_against(anchors).astype(np.float64)
    df = stats.df_array().astype(np.float64)
    df_a = stats.df_array(anchors).astype(np.float64)
    return np.log(stats.N * (co + epsilon) / (df[:, None] * df_a[None, :]))


def _anchor_polarity(pm: np.ndarray, n_pos: int) -> np.ndarray:
    return pm[:, :n_pos].mean(axis=1) - pm[:, n_pos:].mean(axis=1)


def check_seeds(stats: CorpusStats, seeds: SeedSets) -> None:
    missing = [s for s in seeds.pos + seeds.neg if s not in stats]
    if missing:
        raise LexiconError(
            f"seed token(s) missing from vocabulary (min_df={stats.min_df}): {', '.join(missing)}"
        )


def seed_polarity_all(stats: CorpusStats, seeds: SeedSets, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Seed polarity for every vocab token, aligned with ``stats.vocab``."""
    check_seeds(stats, seeds)
    pm = pmi_against(stats, seeds.pos + seeds.neg, epsilon)
    return _anchor_polarity(pm, len(seeds.pos))


def seed_polarity(stats: CorpusStats, seeds: SeedSets, w: str, epsilon: float = DEFAULT_EPSILON) -> float:
    check_seeds(stats, seeds)
    stats._col(w)
    pos = sum(pmi(stats, w, u, epsilon) for u in seeds.pos) / len(seeds.pos)
    neg = sum(pmi(stats, w, v, epsilon) for v in seeds.neg) / len(seeds.neg)
    return pos - neg


def rank_tokens(tokens: Sequence[str], scores: Sequence[float]) -> list[str]:
    """Sort by descending score; ties by ascending UTF-8 bytes, then input position."""
    order = sorted(
        range(len(tokens)),
        key=lambda i: (-scores[i], tokens[i].encode("utf-8"), i),
    )
    return [tokens[i] for i in order]


def select_standard_sets(
    stats: CorpusStats,
    seeds: SeedSets,
    K: int,
    epsilon: float = DEFAULT_EPSILON,
    exclude_seeds: bool = False,
) -> tuple[list[str], list[str]]:
    """Choose the K-token positive and negative standard sets.

    The objective (mean seed polarity over the positive set minus that over
    the negative set) is separable, so the top K and bottom K of the
    seed-polarity ranking maximise it.
    """
    scores = seed_polarity_all(stats, seeds, epsilon)
    tokens = list(stats.vocab)
    if exclude_seeds:
        seedset = set(seeds.pos) | set(seeds.neg)
        keep = [i for i, t in enumerate(tokens) if t not in seedset]
        tokens = [tokens[i] for i in keep]
        scores = scores[keep]
    if K < 1:
        raise LexiconError("K must be >= 1")
    if 2 * K > len(tokens):
        raise LexiconError(f"2K={2 * K} exceeds candidate vocabulary size {len(tokens)}")
    ranked = rank_tokens(tokens, list(scores))
    return ranked[:K], ranked[-K:]


@dataclass
class PolarityLexicon:
    polarity: dict[str, float]
    p_star: list[str]
    n_star: list[str]
    K: int
    epsilon: float
    min_df: int
    N: int
    seeds: SeedSets | None = None
    seed_scores: dict[str, float] = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.polarity)

    def __contains__(self, token):
        return token in self.polarity

    def get(self, token, default=None):
        return self.polarity.get(token, default)

    def header(self) -> str:
        return f"# K={self.K} epsilon={self.epsilon!r} min_df={self.min_df} N={self.N}"

    def to_tsv(self, path: str | Path) -> None:
        ps, ns = set(self.p_star), set(self.n_star)
        ranked = rank_tokens(list(self.polarity), list(self.polarity.values()))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.header() + "\n")
            for tok in ranked:
                fh.write(f"{tok}\t{self.polarity[tok]!r}\t{int(tok in ps)}\t{int(tok in ns)}\n")

    @classmethod
    def from_tsv(cls, path: str | Path, seeds: SeedSets | None = None) -> "PolarityLexicon":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            if not header.startswith("#"):
                raise LexiconError(f"{path}: missing header line")
            meta = dict(kv.split("=", 1) for kv in header[1:].split())
            polarity, p_star, n_star = {}, [], []
            for lineno, line in enumerate(fh, start=2):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 4:
                    raise LexiconError(f"{path}: line {lineno}: expected 4 tab-separated fields")
                tok, val, inp, inn = parts
                polarity[tok] = float(val)
                if inp == "1":
                    p_star.append(tok)
                if inn == "1":
                    n_star.append(tok)
        return cls(
            polarity=polarity,
            p_star=p_star,
            n_star=n_star,
            K=int(meta["K"]),
            epsilon=float(meta["epsilon"]),
            min_df=int(meta["min_df"]),
            N=int(meta["N"]),
            seeds=seeds,
        )


def build_lexicon(
    docs: Sequence[Sequence[str]],
    seeds: SeedSets,
    K: int = DEFAULT_K,
    min_df: int = DEFAULT_MIN_DF,
    epsilon: float = DEFAULT_EPSILON,
    exclude_seeds: bool = False,
) -> PolarityLexicon:
    stats = CorpusStats(docs, min_df)
    seed_scores = seed_polarity_all(stats, seeds, epsilon)
    p_star, n_star = select_standard_sets(stats, seeds, K, epsilon, exclude_seeds)
    pm = pmi_against(stats, p_star + n_star, epsilon)
    pol = _anchor_polarity(pm, K)
    return PolarityLexicon(
        polarity={t: float(pol[j]) for j, t in enumerate(stats.vocab)},
        p_star=p_star,
        n_star=n_star,
        K=K,
        epsilon=epsilon,
        min_df=min_df,
        N=stats.N,
        seeds=seeds,
        seed_scores={t: float(seed_scores[j]) for j, t in enumerate(stats.vocab)},
    )


def parse_seed_text(text: str) -> SeedSets:
    pos: list[str] = []
    neg: list[str] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "POS:":
            current = pos
        elif line == "NEG:":
            current = neg
        elif current is None:
            raise LexiconError(f"seed file line {lineno}: token before POS:/NEG: section")
        else:
            current.append(line)
    return SeedSets(tuple(pos), tuple(neg))


def load_seeds(path: str | Path | None = None) -> SeedSets:
    """Load a seed file; with no path, the bundled default seed words."""
    if path is None:
        text = resources.files("stocknews").joinpath("data/default_seeds.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_seed_text(text)


def write_seeds(seeds: SeedSets, path: str | Path) -> None:
    lines = ["POS:", *seeds.pos, "NEG:", *seeds.neg]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def iter_tokens(docs: Iterable) -> list[tuple[str, ...]]:
    """Accept Documents or raw token sequences."""
    return [tuple(getattr(d, "tokens", d)) for d in docs]
