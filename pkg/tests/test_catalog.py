import pytest

from supportsel.catalog import (CatalogError, FeatureCatalog, default_catalog,
                                load_catalog, save_catalog)


def test_default_catalog_cardinalities():
    cat = default_catalog()
    assert len(cat.difficulties) == 12
    assert len(cat.tools) == 17
    assert len(cat.strategies) == 22
    assert len(cat.targets) == 39
    assert len(set(cat.all_ids)) == 51


def test_default_catalog_labels_cover_every_id():
    cat = default_catalog()
    for ident in cat.all_ids:
        assert cat.labels[ident]
    assert cat.labels["P1"] == "Reading"
    assert cat.labels["T4"] == "Using the EasyReading font"
    assert cat.labels["S22"] == "Having an online database with notes made by other students"


def test_target_kind():
    cat = default_catalog()
    assert cat.target_kind("T7") == "tool"
    assert cat.target_kind("S3") == "strategy"
    with pytest.raises(CatalogError):
        cat.target_kind("P1")


def test_duplicate_ids_rejected():
    cat = default_catalog()
    with pytest.raises(CatalogError):
        FeatureCatalog(
            difficulties=cat.difficulties[:-1] + ("P1",),
            tools=cat.tools,
            strategies=cat.strategies,
            labels=cat.labels,
        )


def test_wrong_counts_rejected():
    cat = default_catalog()
    with pytest.raises(CatalogError):
        FeatureCatalog(cat.difficulties[:-1], cat.tools, cat.strategies, cat.labels)


def test_catalog_file_round_trip(tmp_path):
    cat = default_catalog()
    path = tmp_path / "catalog.csv"
    save_catalog(cat, path)
    loaded = load_catalog(path)
    assert loaded.difficulties == cat.difficulties
    assert loaded.tools == cat.tools
    assert loaded.strategies == cat.strategies
    assert loaded.labels == cat.labels
