from typing import List, Iterable

VALID_CHARACTERS = 'abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_'


def _get_edited_strings(s: str) -> List[str]:
    edited_strings = []
    for i in range(len(s)):
        prefix = s[:i]
        suffix = s[i + 1:]
        edited_strings.append(prefix + suffix)  # Delete
        edited_strings.append(prefix + s[i + 1:i + 2] + s[i] + s[i + 2:])  # Swap
        for c in VALID_CHARACTERS:
            edited_strings.append(prefix + c + suffix)   # Replace
            edited_strings.append(prefix + c + s[i] + suffix)  # Insert
    for c in VALID_CHARACTERS:
        edited_strings.append(s + c)  # Append

    return edited_strings


def did_you_mean(s: str, candidates: Iterable[str]) -> str | None:
    candidates = set(candidates)
    lowered = {c.lower(): c for c in candidates}
    if s.lower() in lowered:
        return lowered[s.lower()]
    for edited_string in _get_edited_strings(s):
        if edited_string in candidates:
            return edited_string
    return None
