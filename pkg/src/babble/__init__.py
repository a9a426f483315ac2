"""babble: train classifiers from natural-language labeling explanations.

Explanations are parsed into candidate labeling functions by a rule-based
chart parser, vetted by a filter bank that needs no ground truth, aggregated
over an unlabeled pool by a generative model of function accuracy, and
distilled into a noise-aware discriminative classifier.
"""

from .corpus import Dataset, Example, Explanation, load_aliases, load_examples, load_explanations
from .execution import coverage, execute, perturb, signature
from .filterbank import FilterReport, run_filter_bank
from .grammar import Grammar, build_default_grammar
from .lf import LogicalForm, lf_from_sexpr, lf_to_sexpr, normalize
from .parsing import parse, parse_all, parse_text, tokenize_explanation
from .synth import Cue, SynthSpec, synth_corpus

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Example",
    "Explanation",
    "load_aliases",
    "load_examples",
    "load_explanations",
    "coverage",
    "execute",
    "perturb",
    "signature",
    "FilterReport",
    "run_filter_bank",
    "Grammar",
    "build_default_grammar",
    "LogicalForm",
    "lf_from_sexpr",
    "lf_to_sexpr",
    "normalize",
    "parse",
    "parse_all",
    "parse_text",
    "tokenize_explanation",
    "Cue",
    "SynthSpec",
    "synth_corpus",
    "__version__",
]
