"""Whitespace tokenizer with character offsets.

Token spans start at the first non-whitespace character of a run and
extend through the trailing whitespace up to the next token (or the end of
the text), so concatenating the slices reproduces the input exactly. The
one approximation: if the text itself starts with whitespace, that leading
run is attached to the first token.
"""

from __future__ import annotations


def token_spans(text: str) -> list[tuple[int, int]]:
    starts = []
    in_token = False
    for i, ch in enumerate(text):
        if not ch.isspace() and not in_token:
            starts.append(i)
            in_token = True
        elif ch.isspace():
            in_token = False
    if not starts:
        return []
    if starts[0] != 0:
        starts[0] = 0  # leading whitespace attaches to the first token
    ends = starts[1:] + [len(text)]
    return list(zip(starts, ends))


def surface(text: str, span: tuple[int, int]) -> str:
    """The token's surface form: its slice without the trailing whitespace."""
    return text[span[0]:span[1]].strip()
