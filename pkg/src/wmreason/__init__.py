"""World-model guided reasoning for social reasoning tasks.

Builds deterministic textual world models from templated stories, watches
streaming LLM reasoning for confusion indicators, injects structured state
descriptions at the point of confusion, and evaluates the whole loop with a
benchmark harness and trajectory analyzers.
"""

__version__ = "0.1.0"

from .engine import (
    StateScope,
    WorldModelSnapshot,
    answer,
    render_information,
    replay,
    select_scope,
    step,
)
from .story import (
    NormalizedItem,
    Question,
    Story,
    normalize_item,
    parse_question,
    parse_story,
    render_story,
)
from .trigger import InterventionPolicy, StreamDetector, TriggerEvent, TriggerLexicon
