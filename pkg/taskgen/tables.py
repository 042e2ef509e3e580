# taskgen/tables.py
from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Sequence, Tuple

from numcore.errors import ValidationError
from numcore.matrix import Rng


STRING_LENGTH = 3
N_TABLES = 8


def binary_strings(length: int = STRING_LENGTH) -> List[str]:
    """All binary strings of the given length in lexicographic order."""
    return ["".join(bits) for bits in product("01", repeat=length)]


BINARY_STRINGS = binary_strings()


class TaskError(ValidationError):
    pass


# ============================================================
# Lookup tables
# ============================================================
@dataclass(frozen=True)
class LookupTable:
    """
    A bijection on binary strings of one fixed length.

    mapping[k] is the output for the k-th input in lexicographic order.
    """
    id: int
    mapping: Tuple[str, ...]

    def __post_init__(self):
        length = len(self.mapping[0]) if self.mapping else 0
        domain = binary_strings(length)
        if sorted(self.mapping) != domain:
            raise TaskError(f"table t{self.id} is not a bijection: {self.mapping}")

    @property
    def name(self) -> str:
        return f"t{self.id}"

    @property
    def length(self) -> int:
        return len(self.mapping[0])

    def __call__(self, x: str) -> str:
        return self.mapping[string_index(x, self.length)]

    def as_dict(self) -> Dict[str, str]:
        return dict(zip(binary_strings(self.length), self.mapping))

    @classmethod
    def from_dict(cls, id: int, mapping: Dict[str, str]) -> "LookupTable":
        length = len(next(iter(mapping)))
        return cls(id, tuple(mapping[x] for x in binary_strings(length)))


def string_index(x: str, length: int = STRING_LENGTH) -> int:
    if not isinstance(x, str) or len(x) != length or set(x) - {"0", "1"}:
        raise TaskError(f"malformed binary string {x!r} (expected {length} bits)")
    return int(x, 2)


def identity_table(length: int = STRING_LENGTH, id: int = 0) -> LookupTable:
    return LookupTable(id, tuple(binary_strings(length)))


def generate_tables(rng: Rng, n: int = N_TABLES, length: int = STRING_LENGTH) -> List[LookupTable]:
    """
    n independent random bijections.

    A draw equal to the identity or to an earlier table is thrown away
    and redrawn.
    """
    domain = binary_strings(length)
    seen = {tuple(domain)}
    tables = []
    while len(tables) < n:
        perm = rng.permutation(len(domain))
        mapping = tuple(domain[int(k)] for k in perm)
        if mapping in seen:
            continue
        seen.add(mapping)
        tables.append(LookupTable(len(tables) + 1, mapping))
    return tables


def compose(t_a: LookupTable, t_b: LookupTable, x: str) -> str:
    """(t_a . t_b)(x): tables apply left to right, t_b(t_a(x))."""
    return t_b(t_a(x))


def apply_sequence(tables: Sequence[LookupTable], x: str) -> List[str]:
    """Intermediate results of applying tables in order, starting with x itself."""
    values = [x]
    for t in tables:
        values.append(t(values[-1]))
    return values


def tables_by_name(tables: Sequence[LookupTable]) -> Dict[str, LookupTable]:
    return {t.name: t for t in tables}
