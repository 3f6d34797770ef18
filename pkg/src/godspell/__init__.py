"""godspell: segmentation, authorless topic modeling, a two-stage
divine-action annotation cascade, agreement metrics, and corpus statistics
for collections of long-form fiction."""

__version__ = "0.1.0"

from . import annotate, corpus, evaluation, report, stats, topics  # noqa: F401
