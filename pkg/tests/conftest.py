import pytest

from babble.grammar import build_default_grammar
from babble.parsing import ChartParser

SPOUSE_ALIASES = {"spouse": frozenset({"wife", "husband", "spouse", "bride", "groom"})}


@pytest.fixture(scope="session")
def grammar():
    return build_default_grammar(SPOUSE_ALIASES)


@pytest.fixture(scope="session")
def parser(grammar):
    return ChartParser(grammar)
