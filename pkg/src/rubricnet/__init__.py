"""rubricnet: multi-aspect scoring of short written responses.

A small library plus CLI that scores free-text answers against a 5-aspect
binary rubric with a Bi-LSTM attention network trained by handwritten
backpropagation, compares it against Naive Bayes / logistic regression /
MLP baselines, and ships the statistics and benchmarking harness used to
compare model families.
"""

__version__ = "0.1.0"

N_ASPECTS = 5
