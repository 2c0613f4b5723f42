"""Multilingual hate-speech detection pipeline.

Submodules:
    textprep    tweet cleaning, entity extraction, script filtering
    hashseg     hashtag word segmentation (unigram Viterbi)
    emojikit    emoji descriptions and embedding tables, mean pooling
    embedkit    sentence-embedding backends (hash / remote service)
    corpus      dataset ingestion, stats, splits, SOUP resampling
    classifier  feature fusion and the trainable classification head
    metrics     confusion matrices, macro-F1, comparison report
    figures     matplotlib rendering of reports and histories
    cli         command-line entry point
"""

__version__ = "0.1.0"
