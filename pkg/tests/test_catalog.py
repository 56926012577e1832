import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gstamp import catalog
from gstamp.catalog import (
    fetch_snapshot,
    parse_catalog,
    serialize_catalog,
    synth_catalog,
    validate,
)
from gstamp.errors import (
    BadCount,
    BadNumber,
    CacheUnwritable,
    ChecksumMismatch,
    DuplicateName,
    InvariantViolation,
    MissingColumn,
    NetworkUnavailable,
)

from conftest import GOLDEN_SNAPSHOT_WARNINGS

HEADER = ",".join(catalog.COLUMNS)


def row(name="X-1", ra=10.0, dec=-20.0, dist=5.0, err=0.1, pmra=1.0,
        pmdec=-2.0, rv=30.0, mv=-8.0, feh=-1.2):
    return f"{name},{ra},{dec},{dist},{err},{pmra},{pmdec},{rv},{mv},{feh}"


def test_parse_single_row_identity():
    cat = parse_catalog(HEADER + "\n" + row(), epoch_jyear=2020.0)
    assert len(cat) == 1
    rec = cat.records[0]
    assert rec.name == "X-1"
    assert rec.dist_kpc == 5.0
    assert rec.feh_dex == -1.2
    assert cat.epoch_jyear == 2020.0


def test_parse_header_order_insensitive():
    cols = list(catalog.COLUMNS)
    cols.reverse()
    line = ",".join(["-1.2", "-8.0", "30.0", "-2.0", "1.0", "0.1", "5.0",
                     "-20.0", "10.0", "X-1"])
    cat = parse_catalog(",".join(cols) + "\n" + line, epoch_jyear=2020.0)
    assert cat.records[0].dist_kpc == 5.0
    assert cat.records[0].name == "X-1"


def test_parse_dec_out_of_bounds():
    with pytest.raises(InvariantViolation):
        parse_catalog(HEADER + "\n" + row(dec=95.0), epoch_jyear=2020.0)


@pytest.mark.parametrize("bad_row, exc", [
    (row(ra=-1.0), InvariantViolation),
    (row(ra=360.0), InvariantViolation),
    (row(dist=0.0), InvariantViolation),
    (row(err=-0.5), InvariantViolation),
    (row(mv=1.0), InvariantViolation),
    (row(mv=-16.0), InvariantViolation),
    (row(feh=0.9), InvariantViolation),
    (row(dist="oops"), BadNumber),
    (row()[: row().rfind(",")], BadNumber),  # ragged row
])
def test_parse_malformed_rows(bad_row, exc):
    with pytest.raises(exc):
        parse_catalog(HEADER + "\n" + bad_row, epoch_jyear=2020.0)


def test_parse_missing_column():
    text = HEADER.replace("feh_dex", "metallicity") + "\n" + row()
    with pytest.raises(MissingColumn) as ei:
        parse_catalog(text, epoch_jyear=2020.0)
    assert ei.value.name == "feh_dex"


def test_parse_duplicate_name():
    text = HEADER + "\n" + row() + "\n" + row(ra=11.0)
    with pytest.raises(DuplicateName):
        parse_catalog(text, epoch_jyear=2020.0)


def test_reference_snapshot_has_164_records(snapshot):
    assert len(snapshot) == 164
    names = [r.name for r in snapshot.records]
    assert len(set(names)) == 164
    assert snapshot.epoch_jyear == 2023.0


def test_validate_clean_catalog_is_empty():
    cat = parse_catalog(HEADER + "\n" + row(), epoch_jyear=2020.0)
    report = validate(cat)
    assert not report
    assert report.count() == 0


def test_validate_flags_error_exceeding_distance():
    cat = parse_catalog(HEADER + "\n" + row(dist=2.0, err=4.0), epoch_jyear=2020.0)
    report = validate(cat)
    assert report.count() == 1
    assert "exceeds distance" in report.warnings[0]


def test_validate_reference_snapshot_frozen_warning_count(snapshot):
    assert validate(snapshot).count() == GOLDEN_SNAPSHOT_WARNINGS


def test_serialize_parse_round_trip():
    cat = synth_catalog(seed=5, n=40, epoch_jyear=2015.5)
    again = parse_catalog(serialize_catalog(cat))
    assert again == cat


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 30))
def test_round_trip_property(seed, n):
    cat = synth_catalog(seed=seed, n=n)
    assert parse_catalog(serialize_catalog(cat)) == cat


def test_synth_catalog_deterministic():
    a = serialize_catalog(synth_catalog(seed=42, n=164))
    b = serialize_catalog(synth_catalog(seed=42, n=164))
    assert a == b
    assert len(synth_catalog(seed=42, n=164)) == 164


def test_synth_catalog_seed_changes_output():
    a = serialize_catalog(synth_catalog(seed=42, n=164))
    b = serialize_catalog(synth_catalog(seed=43, n=164))
    assert a != b


def test_synth_catalog_zero_count():
    with pytest.raises(BadCount):
        synth_catalog(seed=1, n=0)


def test_synth_catalog_respects_invariants():
    cat = synth_catalog(seed=9, n=200)
    for rec in cat.records:
        rec.check()
        assert 1.0 <= rec.dist_kpc <= 40.0


# --- fetch/cache ------------------------------------------------------

URL = "https://example.invalid/clusters.csv"


def _prime_cache(tmp_path, payload=b"name,stuff\n"):
    import hashlib
    stem = hashlib.sha256(URL.encode()).hexdigest()
    data = tmp_path / (stem + ".csv")
    data.write_bytes(payload)
    (tmp_path / (stem + ".csv.sha256")).write_text(
        hashlib.sha256(payload).hexdigest() + "\n")
    return data


def test_fetch_cache_hit_never_touches_network(tmp_path):
    _prime_cache(tmp_path, b"cached-bytes\n")
    # offline=True guarantees a network attempt would raise instead
    text = fetch_snapshot(URL, cache_dir=str(tmp_path), offline=True)
    assert text == "cached-bytes\n"


def test_fetch_offline_empty_cache(tmp_path):
    with pytest.raises(NetworkUnavailable):
        fetch_snapshot(URL, cache_dir=str(tmp_path), offline=True)


def test_fetch_offline_env_variable(tmp_path, monkeypatch):
    monkeypatch.setenv(catalog.OFFLINE_ENV, "1")
    with pytest.raises(NetworkUnavailable):
        fetch_snapshot(URL, cache_dir=str(tmp_path))


def test_fetch_cache_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(catalog.CACHE_ENV, str(tmp_path))
    _prime_cache(tmp_path, b"env-cache\n")
    assert fetch_snapshot(URL, cache_dir="/nonexistent", offline=True) == "env-cache\n"


def test_fetch_corrupted_cache(tmp_path):
    data = _prime_cache(tmp_path, b"original\n")
    data.write_bytes(b"tampered\n")
    with pytest.raises(ChecksumMismatch):
        fetch_snapshot(URL, cache_dir=str(tmp_path), offline=True)


def test_fetch_unwritable_cache(tmp_path):
    blocking_file = tmp_path / "not-a-dir"
    blocking_file.write_text("x")
    with pytest.raises((CacheUnwritable, NetworkUnavailable)) as ei:
        fetch_snapshot(URL, cache_dir=str(blocking_file), offline=False)
    assert isinstance(ei.value, CacheUnwritable)


def test_fetch_network_failure_maps_to_error(tmp_path):
    # .invalid TLD cannot resolve; keeps the test hermetic
    with pytest.raises(NetworkUnavailable):
        fetch_snapshot(URL, cache_dir=str(tmp_path), offline=False, timeout=0.5)


def test_catalog_is_immutable(snapshot):
    with pytest.raises(AttributeError):
        snapshot.records[0].dist_kpc = 1.0


def test_parse_reads_embedded_epoch_comment():
    text = "# epoch_jyear = 2016.0\n# provenance = demo\n" + HEADER + "\n" + row()
    cat = parse_catalog(text)
    assert cat.epoch_jyear == 2016.0
    assert cat.provenance == "demo"
