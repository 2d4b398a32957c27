import pytest

from salt_dialog.foodkb import (
    UnitTable,
    default_ontology,
    fixture_records_path,
    ingest_records,
)
from salt_dialog.templates import TemplatePack


@pytest.fixture(scope="session")
def ontology():
    return default_ontology()


@pytest.fixture(scope="session")
def kb(ontology):
    return ingest_records(fixture_records_path(), ontology)


@pytest.fixture(scope="session")
def units():
    return UnitTable.default()


@pytest.fixture(scope="session")
def pack():
    return TemplatePack.default()
