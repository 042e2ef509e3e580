import json

import pytest

from taskgen.dataset_io import HEADER_FILE, DatasetParseError, read_dataset, write_dataset


def test_write_read_roundtrip(tmp_path, bundle):
    write_dataset(bundle, tmp_path)
    loaded = read_dataset(tmp_path)
    assert loaded.counts() == bundle.counts()
    assert [t.mapping for t in loaded.tables] == [t.mapping for t in bundle.tables]
    assert loaded.vocabulary == bundle.vocabulary
    for name, exs in bundle.splits():
        assert loaded.split(name) == exs


def test_write_is_deterministic(tmp_path, bundle):
    write_dataset(bundle, tmp_path / "a")
    write_dataset(bundle, tmp_path / "b")
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_truncated_split_reports_line(tmp_path, bundle):
    write_dataset(bundle, tmp_path)
    path = tmp_path / "new_compositions.tsv"
    lines = path.read_text().splitlines(keepends=True)
    path.write_text("".join(lines[:-1]))
    with pytest.raises(DatasetParseError) as err:
        read_dataset(tmp_path)
    assert err.value.line == 32
    assert "truncated" in str(err.value)


def test_unknown_token_reports_line(tmp_path, bundle):
    write_dataset(bundle, tmp_path)
    path = tmp_path / "train.tsv"
    lines = path.read_text().splitlines(keepends=True)
    inp, tgt, attn = lines[2].split("\t")
    lines[2] = "\t".join(["t9 " + inp.split(" ", 1)[1], tgt, attn])
    path.write_text("".join(lines))
    with pytest.raises(DatasetParseError) as err:
        read_dataset(tmp_path)
    assert err.value.line == 3


def test_bad_attention_rejected(tmp_path, bundle):
    write_dataset(bundle, tmp_path)
    path = tmp_path / "heldout_tables.tsv"
    lines = path.read_text().splitlines(keepends=True)
    inp, tgt, _ = lines[0].rstrip("\n").split("\t")
    lines[0] = f"{inp}\t{tgt}\t0 1 9 9\n"
    path.write_text("".join(lines))
    with pytest.raises(DatasetParseError):
        read_dataset(tmp_path)


@pytest.mark.parametrize("field, value", [("tables", "t1x"), ("seed", "seven")])
def test_malformed_header_value_is_parse_error(tmp_path, bundle, field, value):
    write_dataset(bundle, tmp_path)
    header_path = tmp_path / HEADER_FILE
    header = json.loads(header_path.read_text())
    if field == "tables":
        header["tables"][value] = header["tables"].pop("t1")
    else:
        header[field] = value
    header_path.write_text(json.dumps(header))
    with pytest.raises(DatasetParseError) as err:
        read_dataset(tmp_path)
    assert "malformed header value" in str(err.value)
