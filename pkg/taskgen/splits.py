# taskgen/splits.py
import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Iterator, List, Sequence, Tuple

from numcore.matrix import Rng, make_rng
from taskgen.tables import (
    BINARY_STRINGS,
    LookupTable,
    TaskError,
    apply_sequence,
    generate_tables,
    tables_by_name,
)
from taskgen.vocab import EOS, Vocabulary

logger = logging.getLogger(__name__)


# ============================================================
# Configuration
# ============================================================
HELDOUT_TABLES = ("t7", "t8")
N_HELDOUT_COMPOSITIONS = 8
N_HELDOUT_INPUTS = 2

TEST_SPLITS = ("heldout_inputs", "heldout_compositions", "heldout_tables", "new_compositions")
SPLIT_NAMES = ("train",) + TEST_SPLITS
SHORT_NAMES = {
    "heldout_inputs": "HI",
    "heldout_compositions": "HC",
    "heldout_tables": "HT",
    "new_compositions": "NC",
}


# ============================================================
# Examples
# ============================================================
@dataclass(frozen=True)
class Example:
    """
    One task instance.

    input:     (x, t_a[, t_b])
    target:    (x, t_a(x)[, t_b(t_a(x))], <eos>)  step 1 copies the input string
    attention: input position attended at each decoder step; the EOS step
               reuses the last input position
    """
    input: Tuple[str, ...]
    target: Tuple[str, ...]
    attention: Tuple[int, ...]

    @property
    def tables(self) -> Tuple[str, ...]:
        return self.input[1:]

    @property
    def composition(self) -> Tuple[str, ...]:
        return self.tables

    @property
    def key(self) -> Tuple[Tuple[str, ...], str]:
        return self.composition, self.input[0]


def make_example(tables: Dict[str, LookupTable], x: str, names: Sequence[str]) -> Example:
    try:
        chain = [tables[n] for n in names]
    except KeyError as e:
        raise TaskError(f"unknown table {e.args[0]!r}") from None
    values = apply_sequence(chain, x)
    n_in = len(names) + 1
    return Example(
        input=(x,) + tuple(names),
        target=tuple(values) + (EOS,),
        attention=tuple(range(n_in)) + (n_in - 1,),
    )


@dataclass
class DatasetBundle:
    tables: List[LookupTable]
    train: List[Example]
    heldout_inputs: List[Example]
    heldout_compositions: List[Example]
    heldout_tables: List[Example]
    new_compositions: List[Example]
    vocabulary: Vocabulary = field(default_factory=Vocabulary.default)
    seed: int = 0
    include_atomic: bool = True

    def split(self, name: str) -> List[Example]:
        if name not in SPLIT_NAMES:
            raise TaskError(f"unknown split {name!r}; expected one of {SPLIT_NAMES}")
        return getattr(self, name)

    def splits(self) -> Iterator[Tuple[str, List[Example]]]:
        for name in SPLIT_NAMES:
            yield name, getattr(self, name)

    def test_examples(self) -> List[Example]:
        return [ex for name in TEST_SPLITS for ex in getattr(self, name)]

    def counts(self) -> Dict[str, int]:
        return {name: len(exs) for name, exs in self.splits()}


# ============================================================
# Split construction
# ============================================================
def build_splits(tables: Sequence[LookupTable], rng: Rng, seed: int = 0,
                 include_atomic: bool = True) -> DatasetBundle:
    """
    The four evaluation splits.

    - NC: compositions over {t7, t8} x {t7, t8}
    - HT: compositions with exactly one of t7 / t8
    - HC: 8 compositions drawn from the 36 over t1..t6
    - HI: 2 of 8 inputs from each remaining composition
    - train: the other 6 inputs of each remaining composition, plus every
      atomic table on all 8 inputs when include_atomic is set
    """
    by_name = tables_by_name(tables)
    names = [t.name for t in tables]
    held = set(HELDOUT_TABLES)

    def examples_for(pairs, inputs=BINARY_STRINGS):
        return [make_example(by_name, x, pair) for pair in pairs for x in inputs]

    pairs = list(product(names, names))
    nc_pairs = [p for p in pairs if set(p) <= held]
    ht_pairs = [p for p in pairs if len(held & set(p)) == 1 and not set(p) <= held]
    pool = [p for p in pairs if not held & set(p)]

    hc_idx = sorted(int(i) for i in rng.choice(len(pool), size=N_HELDOUT_COMPOSITIONS, replace=False))
    hc_pairs = [pool[i] for i in hc_idx]
    train_pairs = [p for i, p in enumerate(pool) if i not in hc_idx]

    train, heldout_inputs = [], []
    if include_atomic:
        train.extend(examples_for([(n,) for n in names]))
    for pair in train_pairs:
        perm = rng.permutation(len(BINARY_STRINGS))
        held_inputs = set(int(k) for k in perm[:N_HELDOUT_INPUTS])
        for k, x in enumerate(BINARY_STRINGS):
            ex = make_example(by_name, x, pair)
            (heldout_inputs if k in held_inputs else train).append(ex)

    bundle = DatasetBundle(
        tables=list(tables),
        train=train,
        heldout_inputs=heldout_inputs,
        heldout_compositions=examples_for(hc_pairs),
        heldout_tables=examples_for(ht_pairs),
        new_compositions=examples_for(nc_pairs),
        seed=seed,
        include_atomic=include_atomic,
    )
    check_disjoint(bundle)
    logger.info("built splits %s", bundle.counts())
    return bundle


def check_disjoint(bundle: DatasetBundle) -> None:
    seen: Dict[Tuple, str] = {}
    for name, exs in bundle.splits():
        for ex in exs:
            if ex.key in seen:
                raise TaskError(f"example {ex.key} appears in both {seen[ex.key]} and {name}")
            seen[ex.key] = name


def carve_validation(train: Sequence[Example], frac: float, rng: Rng) -> Tuple[List[Example], List[Example]]:
    """Seeded hold-out of round(frac * n) training examples for model selection."""
    n_val = int(round(frac * len(train)))
    if n_val == 0:
        return list(train), []
    order = rng.permutation(len(train))
    val_idx = set(int(i) for i in order[:n_val])
    fit = [ex for i, ex in enumerate(train) if i not in val_idx]
    val = [ex for i, ex in enumerate(train) if i in val_idx]
    return fit, val


def generate_bundle(seed: int, include_atomic: bool = True) -> DatasetBundle:
    """Tables and splits from one seed; each draws from its own named stream."""
    tables = generate_tables(make_rng(seed, "tables"))
    return build_splits(tables, make_rng(seed, "splits"), seed=seed, include_atomic=include_atomic)
