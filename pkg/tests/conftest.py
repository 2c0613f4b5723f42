import pathlib

import pytest

from hatekit import emojikit, hashseg

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def lexicon():
    return hashseg.load_lexicon(str(DATA / "lexicon_small.txt"))


@pytest.fixture(scope="session")
def registry():
    return emojikit.load_descriptions(str(DATA / "emoji_descriptions.tsv"))


@pytest.fixture(scope="session")
def word_table():
    return emojikit.load_embedding_table(str(DATA / "word_vecs.txt"), name="words")


@pytest.fixture(scope="session")
def emoji_table():
    return emojikit.load_embedding_table(str(DATA / "emoji_vecs.txt"), name="emoji")
