"""Multi-aspect reward scoring, GRPO utilities."""

from ._core import (
    Scorer,
    group_advantages,
    group_advantages_batch,
    grpo_objective,
    parse_document,
    serialize_document,
)

__all__ = [
    "Scorer",
    "group_advantages",
    "group_advantages_batch",
    "grpo_objective",
    "parse_document",
    "serialize_document",
]
