"""Label-aware masked-LM data augmentation for token-labeled (NER) corpora."""
__version__ = "0.1.0"
