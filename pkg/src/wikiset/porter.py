"""Porter stemmer.

Follows Martin Porter's reference implementation (the ANSI C release), which
differs from the 1980 description in two step-2 rules: ``bli -> ble`` replaces
``abli -> able`` and ``logi -> log`` is added. Those are the rules the
published test vocabulary was generated with.
"""

__all__ = ["porter_stem"]

_VOWELS = frozenset("aeiou")


def _is_cons(w: str, i: int) -> bool:
    c = w[i]
    if c in _VOWELS:
        return False
    if c == "y":
        return i == 0 or not _is_cons(w, i - 1)
    return True


def _measure(s: str) -> int:
    """Number of VC sequences in ``s`` viewed as [C](VC)^m[V]."""
    n = 0
    i = 0
    length = len(s)
    while i < length and _is_cons(s, i):
        i += 1
    while True:
        while i < length and not _is_cons(s, i):
            i += 1
        if i >= length:
            return n
        while i < length and _is_cons(s, i):
            i += 1
        n += 1
        if i >= length:
            return n


def _has_vowel(s: str) -> bool:
    return any(not _is_cons(s, i) for i in range(len(s)))


def _ends_double_cons(s: str) -> bool:
    return len(s) >= 2 and s[-1] == s[-2] and _is_cons(s, len(s) - 1)


def _ends_cvc(s: str) -> bool:
    # consonant-vowel-consonant, last consonant not w, x or y
    n = len(s)
    if n < 3:
        return False
    return (
        _is_cons(s, n - 1)
        and not _is_cons(s, n - 2)
        and _is_cons(s, n - 3)
        and s[-1] not in "wxy"
    )


_STEP2 = (
    ("ational", "ate"), ("tional", "tion"),
    ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"),
    ("bli", "ble"), ("alli", "al"), ("entli", "ent"), ("eli", "e"), ("ousli", "ous"),
    ("ization", "ize"), ("ation", "ate"), ("ator", "ate"),
    ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"), ("ousness", "ous"),
    ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
    ("logi", "log"),
)

_STEP3 = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"),
    ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""),
    ("ness", ""),
)

_STEP4 = (
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment",
    "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)


def _step1ab(w: str) -> str:
    if w.endswith("s"):
        if w.endswith("sses"):
            w = w[:-2]
        elif w.endswith("ies"):
            w = w[:-2]
        elif not w.endswith("ss"):
            w = w[:-1]

    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            w = w[:-1]
        return w

    for suffix in ("ed", "ing"):
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if not _has_vowel(stem):
                return w
            w = stem
            if w.endswith(("at", "bl", "iz")):
                return w + "e"
            if _ends_double_cons(w):
                return w if w[-1] in "lsz" else w[:-1]
            if _measure(w) == 1 and _ends_cvc(w):
                return w + "e"
            return w
    return w


def _step1c(w: str) -> str:
    if w.endswith("y") and _has_vowel(w[:-1]):
        return w[:-1] + "i"
    return w


def _replace_first(w: str, rules) -> str:
    # The first matching suffix wins even when its measure condition fails.
    for suffix, repl in rules:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            return stem + repl if _measure(stem) > 0 else w
    return w


def _step4(w: str) -> str:
    for suffix in _STEP4:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if suffix == "ion" and not stem.endswith(("s", "t")):
                continue
            return stem if _measure(stem) > 1 else w
    return w


def _step5(w: str) -> str:
    m = _measure(w)
    if w.endswith("e"):
        if m > 1 or (m == 1 and not _ends_cvc(w[:-1])):
            w = w[:-1]
    if w.endswith("l") and _ends_double_cons(w) and m > 1:
        w = w[:-1]
    return w


def porter_stem(token: str) -> str:
    """Stem one lowercase token. Words of two letters or fewer are returned as is."""
    if len(token) <= 2:
        return token
    w = _step1ab(token)
    w = _step1c(w)
    if len(w) > 1:
        w = _replace_first(w, _STEP2)
    w = _replace_first(w, _STEP3)
    w = _step4(w)
    return _step5(w)
