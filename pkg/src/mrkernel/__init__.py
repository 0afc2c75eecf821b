"""Metamorphic-relation prediction for matrix functions.

The pipeline: represent each function as a control-flow graph, compare
graphs with a labeled random-walk kernel, and classify with a
precomputed-kernel SVM.  A metamorphic-testing harness executes the
relations against matrix functions to produce ground-truth labels.
"""

__version__ = "0.1.0"
