"""Fleet failure-risk modeling with fuzzy SVMs.

Training stack for predicting near-term vehicle repair risk from service
history: kernels and an SMO solver tolerant of indefinite kernels, fuzzy
membership weighting in input or kernel space, a layered ensemble for the
hard-to-separate remainder, plus data preparation, model selection,
evaluation and a command line front end.
"""

__version__ = "0.1.0"

from ._core import BACKEND

__all__ = ["BACKEND", "__version__"]
