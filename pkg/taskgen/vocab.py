# taskgen/vocab.py
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from taskgen.tables import BINARY_STRINGS, N_TABLES, TaskError

PAD = "<pad>"
SOS = "<sos>"
EOS = "<eos>"


@dataclass(frozen=True)
class Vocabulary:
    """
    Fixed token orders.

    encoder: 000 ... 111, t1 ... t8
    decoder: <pad>, <sos>, 000 ... 111, <eos>
    (so decoder embedding rows 2-10, counted from 1, are SOS and the strings)
    """
    encoder: Tuple[str, ...]
    decoder: Tuple[str, ...]

    @classmethod
    def default(cls, n_tables: int = N_TABLES) -> "Vocabulary":
        tables = tuple(f"t{i}" for i in range(1, n_tables + 1))
        return cls(
            encoder=tuple(BINARY_STRINGS) + tables,
            decoder=(PAD, SOS) + tuple(BINARY_STRINGS) + (EOS,),
        )

    @property
    def encoder_index(self) -> Dict[str, int]:
        return {tok: i for i, tok in enumerate(self.encoder)}

    @property
    def decoder_index(self) -> Dict[str, int]:
        return {tok: i for i, tok in enumerate(self.decoder)}

    def encode_input(self, tokens: Sequence[str]) -> List[int]:
        index = self.encoder_index
        try:
            return [index[t] for t in tokens]
        except KeyError as e:
            raise TaskError(f"unknown encoder token {e.args[0]!r}") from None

    def encode_output(self, tokens: Sequence[str]) -> List[int]:
        index = self.decoder_index
        try:
            return [index[t] for t in tokens]
        except KeyError as e:
            raise TaskError(f"unknown decoder token {e.args[0]!r}") from None

    def to_dict(self) -> Dict[str, List[str]]:
        return {"encoder": list(self.encoder), "decoder": list(self.decoder)}

    @classmethod
    def from_dict(cls, d: Dict[str, List[str]]) -> "Vocabulary":
        return cls(encoder=tuple(d["encoder"]), decoder=tuple(d["decoder"]))
