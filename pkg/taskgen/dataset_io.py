# taskgen/dataset_io.py
import json
from pathlib import Path
from typing import Dict, List

from numcore.errors import ValidationError
from numcore.fileio import atomic_write_json, atomic_write_text
from taskgen.splits import SPLIT_NAMES, DatasetBundle, Example
from taskgen.tables import LookupTable
from taskgen.vocab import Vocabulary

FORMAT_VERSION = 1
HEADER_FILE = "header.json"


class DatasetParseError(ValidationError):
    def __init__(self, path: Path, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


# ============================================================
# Writing
# ============================================================
def format_example(ex: Example) -> str:
    return "\t".join([
        " ".join(ex.input),
        " ".join(ex.target),
        " ".join(str(i) for i in ex.attention),
    ])


def write_dataset(bundle: DatasetBundle, path: Path) -> Path:
    """
    Write a bundle as a directory:

    - header.json: tables, vocabulary order, seed, split files / counts / compositions
    - <split>.tsv: one example per line, input<TAB>target<TAB>attention
    """
    path = Path(path)
    splits = {}
    for name, exs in bundle.splits():
        fname = f"{name}.tsv"
        atomic_write_text(path / fname, "".join(format_example(ex) + "\n" for ex in exs))
        splits[name] = {
            "file": fname,
            "count": len(exs),
            "compositions": sorted({" ".join(ex.composition) for ex in exs}),
        }

    header = {
        "format_version": FORMAT_VERSION,
        "seed": bundle.seed,
        "include_atomic": bundle.include_atomic,
        "tables": {t.name: t.as_dict() for t in bundle.tables},
        "vocabulary": bundle.vocabulary.to_dict(),
        "splits": splits,
    }
    atomic_write_json(path / HEADER_FILE, header)
    return path


# ============================================================
# Reading
# ============================================================
def parse_line(line: str, vocab: Vocabulary, path: Path, lineno: int) -> Example:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 3:
        raise DatasetParseError(path, lineno, f"expected 3 tab-separated fields, got {len(fields)}")

    inp, tgt, attn = (f.split() for f in fields)
    for tok in inp:
        if tok not in vocab.encoder:
            raise DatasetParseError(path, lineno, f"unknown input token {tok!r}")
    for tok in tgt:
        if tok not in vocab.decoder:
            raise DatasetParseError(path, lineno, f"unknown target token {tok!r}")

    try:
        positions = tuple(int(a) for a in attn)
    except ValueError:
        raise DatasetParseError(path, lineno, f"attention indices must be integers: {fields[2]!r}") from None
    if len(positions) != len(tgt) or any(not 0 <= p < len(inp) for p in positions):
        raise DatasetParseError(path, lineno, f"attention targets {positions} do not fit input of length {len(inp)}")

    return Example(tuple(inp), tuple(tgt), positions)


def read_split(path: Path, expected: int, vocab: Vocabulary) -> List[Example]:
    examples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                raise DatasetParseError(path, lineno, "empty line")
            examples.append(parse_line(line, vocab, path, lineno))
    if len(examples) != expected:
        raise DatasetParseError(
            path, len(examples) + 1,
            f"truncated split: header promises {expected} examples, file has {len(examples)}",
        )
    return examples


def read_dataset(path: Path) -> DatasetBundle:
    path = Path(path)
    header_path = path / HEADER_FILE
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DatasetParseError(header_path, e.lineno, f"invalid JSON: {e.msg}") from None

    try:
        if header.get("format_version") != FORMAT_VERSION:
            raise DatasetParseError(header_path, None, f"unsupported format_version {header.get('format_version')!r}")
        vocab = Vocabulary.from_dict(header["vocabulary"])
        tables = [
            LookupTable.from_dict(int(name[1:]), mapping)
            for name, mapping in sorted(header["tables"].items(), key=lambda kv: int(kv[0][1:]))
        ]
        split_meta: Dict[str, Dict] = header["splits"]
        splits = {
            name: read_split(path / split_meta[name]["file"], int(split_meta[name]["count"]), vocab)
            for name in SPLIT_NAMES
        }
        seed = int(header["seed"])
        include_atomic = bool(header["include_atomic"])
    except KeyError as e:
        raise DatasetParseError(header_path, None, f"missing header field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise DatasetParseError(header_path, None, f"malformed header value: {e}") from None

    return DatasetBundle(tables=tables, vocabulary=vocab, seed=seed, include_atomic=include_atomic, **splits)
