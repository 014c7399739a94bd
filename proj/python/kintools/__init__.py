"""Kinship recognition toolkit on precomputed face embeddings.

Thin wrapper over the compiled extension; everything useful lives in
``kintools._kintools`` and is re-exported here.
"""

from ._kintools import *  # noqa: F401,F403
from ._kintools import __doc__ as _doc

__doc__ = _doc
