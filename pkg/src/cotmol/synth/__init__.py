"""Random-walk trace synthesis and lexical/summary transforms."""

from .keywords import KeywordEntry, KeywordPlan, apply_keyword_plan, build_plan, load_table
from .prompts import render_behavior_prompt, summarization_prompt
from .walk import (
    SAMPLING_DEFAULTS,
    ShiftReport,
    SynthesisConfig,
    SyntheticTrace,
    distribution_shift,
    sample_walk,
    synthesize,
    synthesize_many,
)

__all__ = [
    "KeywordEntry",
    "KeywordPlan",
    "SAMPLING_DEFAULTS",
    "ShiftReport",
    "SynthesisConfig",
    "SyntheticTrace",
    "apply_keyword_plan",
    "build_plan",
    "distribution_shift",
    "load_table",
    "render_behavior_prompt",
    "sample_walk",
    "summarization_prompt",
    "synthesize",
    "synthesize_many",
]
