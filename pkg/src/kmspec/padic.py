"""Exact integer matrix certificates: freeness of the generator family and
density of the generated subgroup in finite quotients SL(2, Z/p^N Z).

All arithmetic on 2x2 matrices uses arbitrary-precision integers; a single
false identity caused by overflow would be a false freeness violation, so no
modular shortcuts are taken in the freeness checks.
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from .errors import (EnumerationError, FreenessViolationError,
                     InvalidInputError)

H_RANGE = range(-4, 5)   # shipped h_n index range; larger n on demand


@dataclass(frozen=True)
class Mat2:
    """2x2 integer matrix with determinant 1."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for v in (self.a, self.b, self.c, self.d):
            if not isinstance(v, int):
                raise InvalidInputError("entries must be exact integers")
        if self.det() != 1:
            raise InvalidInputError("determinant must be 1")

    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    def __mul__(self, other: "Mat2") -> "Mat2":
        return Mat2(self.a * other.a + self.b * other.c,
                    self.a * other.b + self.b * other.d,
                    self.c * other.a + self.d * other.c,
                    self.c * other.b + self.d * other.d)

    def inv(self) -> "Mat2":
        return Mat2(self.d, -self.b, -self.c, self.a)

    def pow(self, n: int) -> "Mat2":
        if n < 0:
            return self.inv().pow(-n)
        out = MAT2_IDENTITY
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def is_identity(self) -> bool:
        return (self.a, self.b, self.c, self.d) == (1, 0, 0, 1)

    def entries(self) -> Tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    def reduced(self, modulus: int) -> Tuple[int, int, int, int]:
        return (self.a % modulus, self.b % modulus,
                self.c % modulus, self.d % modulus)


MAT2_IDENTITY = Mat2(1, 0, 0, 1)
_A = Mat2(1, 2, 0, 1)
_B = Mat2(1, 0, 2, 1)
_AB = _A * _B
_BA = _B * _A


def generator(name: str, n: int = None) -> Mat2:
    """Named generators: a, b, g1 = a^4, g2 = b^4, h_n = (ab)^n ba (ab)^{-n}."""
    if name == "a":
        return _A
    if name == "b":
        return _B
    if name == "g1":
        return _A.pow(4)
    if name == "g2":
        return _B.pow(4)
    if name == "h":
        if n is None:
            raise InvalidInputError("h requires an index n")
        conj = _AB.pow(n)
        return conj * _BA * conj.inv()
    raise InvalidInputError(f"unknown generator {name!r}")


# ---------------------------------------------------------------------------
# Reduced words

Letter = Tuple[str, int]   # (key, exponent +-1); key is "g1", "g2" or "h:n"


def letter_matrix(letter: Letter) -> Mat2:
    key, exp = letter
    if key.startswith("h:"):
        m = generator("h", int(key[2:]))
    else:
        m = generator(key)
    return m if exp == 1 else m.inv()


def reduce_word(letters: Sequence[Letter]) -> Tuple[Letter, ...]:
    out: List[Letter] = []
    for key, exp in letters:
        if exp not in (1, -1):
            raise InvalidInputError("letter exponents must be +-1")
        if out and out[-1][0] == key and out[-1][1] == -exp:
            out.pop()
        else:
            out.append((key, exp))
    return tuple(out)


@dataclass(frozen=True)
class FreeWord:
    letters: Tuple[Letter, ...]

    def __post_init__(self):
        if reduce_word(self.letters) != tuple(self.letters):
            raise InvalidInputError("word is not reduced")


def eval_word(word) -> Mat2:
    letters = word.letters if isinstance(word, FreeWord) else tuple(word)
    out = MAT2_IDENTITY
    for letter in letters:
        out = out * letter_matrix(letter)
    return out


def default_alphabet(h_indices: Iterable[int] = range(-2, 3)) -> Tuple[str, ...]:
    return ("g1", "g2") + tuple(f"h:{n}" for n in h_indices)


def enumerate_reduced_words(max_len: int, alphabet: Sequence[str]
                            ) -> Iterable[Tuple[Letter, ...]]:
    """All nonempty reduced words up to max_len, in deterministic order."""
    signed = [(k, e) for k in alphabet for e in (1, -1)]
    stack: List[Tuple[Letter, ...]] = [()]
    while stack:
        word = stack.pop()
        if word:
            yield word
        if len(word) == max_len:
            continue
        for letter in reversed(signed):
            if word and word[-1][0] == letter[0] and word[-1][1] == -letter[1]:
                continue
            stack.append(word + (letter,))


def _word_count(max_len: int, n_letters: int) -> int:
    # nonempty reduced words: sum over lengths of 2n (2n-1)^(L-1)
    total = 0
    for length in range(1, max_len + 1):
        total += 2 * n_letters * (2 * n_letters - 1) ** (length - 1)
    return total


@dataclass(frozen=True)
class FreenessCertificate:
    max_len: int
    alphabet: Tuple[str, ...]
    prefix_len: int
    prefix_words_evaluated: int
    words_certified: int
    identity_found: bool

    def to_dict(self) -> dict:
        return {
            "max_len": self.max_len,
            "alphabet": list(self.alphabet),
            "prefix_len": self.prefix_len,
            "prefix_words_evaluated": self.prefix_words_evaluated,
            "words_certified": self.words_certified,
            "identity_found": self.identity_found,
        }


def freeness_suite(max_len: int,
                   alphabet: Sequence[str] = None) -> FreenessCertificate:
    """Certify that no nonempty reduced word up to max_len is the identity.

    A nonempty reduced word w of length <= 2m equals the identity exactly when
    its two halves u, v satisfy u = v^{-1} as matrices with u, v^{-1} distinct
    reduced words of length <= m.  Injectivity of evaluation on all reduced
    words of half length therefore certifies the full length range while only
    evaluating the half-length prefix set.
    """
    if max_len < 1 or max_len > 10:
        raise InvalidInputError("max_len must be in 1..10")
    if alphabet is None:
        alphabet = default_alphabet()
    alphabet = tuple(alphabet)
    half = (max_len + 1) // 2
    seen: Dict[Tuple[int, int, int, int], Tuple[Letter, ...]] = {
        MAT2_IDENTITY.entries(): ()}
    evaluated = 0
    for word in enumerate_reduced_words(half, alphabet):
        evaluated += 1
        key = eval_word(word).entries()
        if key in seen:
            other = seen[key]
            culprit = reduce_word(word + tuple((k, -e) for k, e in reversed(other)))
            raise FreenessViolationError(
                f"reduced word {culprit} evaluates to the identity")
        seen[key] = word
    return FreenessCertificate(max_len=max_len, alphabet=alphabet,
                               prefix_len=half,
                               prefix_words_evaluated=evaluated,
                               words_certified=_word_count(max_len, len(alphabet)),
                               identity_found=False)


# ---------------------------------------------------------------------------
# Finite quotients

def _is_odd_prime(p: int) -> bool:
    if p < 3 or p % 2 == 0:
        return False
    return all(p % d for d in range(3, int(math.isqrt(p)) + 1, 2))


def sl2_order(p: int, N: int) -> int:
    """|SL(2, Z/p^N Z)| = p^{3N} (1 - p^{-2})."""
    return p ** (3 * N) - p ** (3 * N - 2)


def subgroup_closure_mod(p: int, N: int, gens: Sequence[Mat2]) -> dict:
    """BFS closure of the generated subgroup inside SL(2, Z/p^N Z)."""
    if not _is_odd_prime(p):
        raise InvalidInputError("p must be an odd prime")
    if N < 1:
        raise InvalidInputError("N must be >= 1")
    if p ** (3 * N) > ENUM_CAP:
        raise EnumerationError(f"p^(3N) = {p ** (3 * N)} exceeds the cap {ENUM_CAP}")
    modulus = p ** N
    step_mats = []
    for g in gens:
        step_mats.append(g.reduced(modulus))
        step_mats.append(g.inv().reduced(modulus))

    def mul(x, y):
        return ((x[0] * y[0] + x[1] * y[2]) % modulus,
                (x[0] * y[1] + x[1] * y[3]) % modulus,
                (x[2] * y[0] + x[3] * y[2]) % modulus,
                (x[2] * y[1] + x[3] * y[3]) % modulus)

    start = (1, 0, 0, 1)
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for x in frontier:
            for s in step_mats:
                y = mul(x, s)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    expected = sl2_order(p, N)
    order = len(seen)
    if expected % order:
        raise EnumerationError("closure order does not divide the group order; "
                               "this indicates a bug")
    return {"p": p, "N": N, "order": order, "expected": expected,
            "is_full": order == expected}


ENUM_CAP = 10 ** 7
