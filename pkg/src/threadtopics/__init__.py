"""Toolkit for reconstructing community verdicts from discussion threads,
discovering and naming latent topics, and computing co-occurrence,
coherence, agreement and moral-lexicon statistics over them."""

__version__ = "0.1.0"
