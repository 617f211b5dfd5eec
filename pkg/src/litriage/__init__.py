"""Biomedical literature triage with a knowledge-enhanced multi-channel CNN.

Modules:

``kg``          typed concept graphs and homophily / structural random walks
``embed``       skip-gram concept embeddings and word2vec I/O
``text``        documents, tokenisation, vocabularies, concept linking, encoding
``datasets``    date-cutoff and stratified splits, negative sampling, keywords
``nn``          numpy layers with explicit backward passes, Adam, gradient checks
``model``       the two-channel CNN, training, prediction, checkpoints, ablations
``evaluation``  precision / recall / F1 and ablation report tables
``cli``         the ``litriage`` command
"""

from .errors import TriageError

__version__ = "0.1.0"

__all__ = ["TriageError", "__version__"]
