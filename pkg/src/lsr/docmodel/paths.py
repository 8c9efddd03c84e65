"""Shortest dependency paths and meta dependency path (MDP) tokens."""

from __future__ import annotations

from itertools import combinations
from typing import Iterable

from .types import Mention, Sentence


def shortest_dep_path(sentence: Sentence, a: int, b: int) -> list[int]:
    """Token indices (0-based) on the tree path from ``a`` to ``b``, endpoints included.

    Walks both tokens up to their lowest common ancestor.
    """
    n = len(sentence)
    for i in (a, b):
        if not 0 <= i < n:
            raise IndexError(f"token index {i} out of range for sentence of {n} tokens")
    up_a = _ancestors(sentence, a)
    depth_in_a = {tok: k for k, tok in enumerate(up_a)}
    down = []
    j = b
    while j not in depth_in_a:
        down.append(j)
        j = sentence.head_index(j)
    return up_a[:depth_in_a[j] + 1] + down[::-1]


def _ancestors(sentence: Sentence, i: int) -> list[int]:
    chain = [i]
    h = sentence.head_index(i)
    while h is not None:
        chain.append(h)
        h = sentence.head_index(h)
    return chain


def anchor_token(sentence: Sentence, mention: Mention) -> int:
    """Syntactic head of a mention span: first span token headed outside the span."""
    for i in mention.span:
        h = sentence.head_index(i)
        if h is None or not mention.start <= h < mention.end:
            return i
    # a tree always has such a token; the loop cannot fall through
    raise AssertionError("mention span has no head token")


def extract_mdp(sentence: Sentence, mentions: Iterable[Mention]) -> list[int]:
    """Union of pairwise shortest paths between mention anchors, minus mention tokens."""
    mentions = list(mentions)
    covered = {i for m in mentions for i in m.span}
    anchors = [anchor_token(sentence, m) for m in mentions]
    tokens: set[int] = set()
    for x, y in combinations(anchors, 2):
        tokens.update(shortest_dep_path(sentence, x, y))
    return sorted(tokens - covered)
