try:
    from ._storyplot import (
        KnowledgeGraph,
        golden_invariants_hold,
        golden_storyline,
        merge,
        mtld,
        reward,
        select_objects,
    )
except ImportError:  # in-tree runs find the module on PYTHONPATH instead
    from _storyplot import (
        KnowledgeGraph,
        golden_invariants_hold,
        golden_storyline,
        merge,
        mtld,
        reward,
        select_objects,
    )

__all__ = [
    "KnowledgeGraph",
    "golden_invariants_hold",
    "golden_storyline",
    "merge",
    "mtld",
    "reward",
    "select_objects",
]
