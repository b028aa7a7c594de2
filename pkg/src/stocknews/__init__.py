"""Next-day stock direction from prices and a PMI-induced news polarity lexicon."""

from .corpus import AlignedSeries, DataError, Document, PriceBar, PriceSeries, align, load_news, load_prices
from .features import FeatureSequence, HistogramSpec, assemble, histogram, labels, make_spec, returns
from .lexicon import CorpusStats, PolarityLexicon, SeedSets, build_lexicon, load_seeds, pmi, seed_polarity, select_standard_sets
from .model import RnnDims, RnnParams, TrainConfig, backward, forward, init_params, loss, predict, train

__version__ = "0.1.0"
