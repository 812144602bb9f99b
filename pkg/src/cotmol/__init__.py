"""Behavior-graph analysis and random-walk synthesis of long chain-of-thought traces."""

__version__ = "0.1.0"

from .errors import CotmolError
from .seeds import derive_seed
from .trace import BehaviorLabel, LabeledTrace, Step, Trace, extract_boxed, segment

__all__ = [
    "BehaviorLabel",
    "CotmolError",
    "LabeledTrace",
    "Step",
    "Trace",
    "__version__",
    "derive_seed",
    "extract_boxed",
    "segment",
]
