import pathlib
import random
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from claimcheck.dataset import ForeignKey, build_schema, load_csv, parse_data_dictionary
from claimcheck.fragments import SynonymProvider
from claimcheck.lexicon import load_synonyms_tsv
from claimcheck.runner import DatasetBundle, load_dataset
from claimcheck.textdoc import ingest_document

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
NFL = FIXTURES / "nfl"


def load_nfl_bundle(csv_name: str = "nflsuspensions.csv") -> DatasetBundle:
    table = load_csv((NFL / csv_name).read_bytes(), "nflsuspensions")
    schema = build_schema([table], [])
    dictionary = parse_data_dictionary((NFL / "dictionary.tsv").read_bytes(), schema)
    synonyms = SynonymProvider(load_synonyms_tsv((NFL / "synonyms.tsv").read_text()))
    return load_dataset([table], [], dictionary, synonyms)


@pytest.fixture(scope="session")
def nfl_bundle() -> DatasetBundle:
    return load_nfl_bundle()


@pytest.fixture(scope="session")
def nfl_doctored_bundle() -> DatasetBundle:
    return load_nfl_bundle("nflsuspensions_doctored.csv")


@pytest.fixture()
def nfl_document():
    return ingest_document((NFL / "document.md").read_bytes())


def _csv_bytes(header: list[str], rows: list[list[str]]) -> bytes:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def make_sales_tables(n_orders: int = 3000, seed: int = 72):
    """Deterministic two-table PK-FK fixture: orders reference regions."""
    rng = random.Random(seed)
    regions = ["north", "south", "east", "west", "central"]
    managers = ["ada", "grace", "alan", "edsger", "barbara"]
    region_rows = [[str(i + 1), regions[i], managers[i]] for i in range(len(regions))]
    products = ["widget", "gadget", "doohickey"]
    order_rows = []
    for i in range(n_orders):
        region_id = str(rng.randint(1, len(regions)))
        product = rng.choice(products)
        amount = f"{rng.uniform(5, 500):.2f}"
        units = str(rng.randint(1, 20)) if rng.random() > 0.03 else ""
        order_rows.append([str(i + 1), region_id, product, amount, units])
    orders = load_csv(
        _csv_bytes(["order_id", "region_id", "product", "amount", "units"], order_rows),
        "orders",
    )
    region_table = load_csv(
        _csv_bytes(["id", "region", "manager"], region_rows), "regions"
    )
    fks = [ForeignKey("orders", "region_id", "regions", "id")]
    return [orders, region_table], fks


@pytest.fixture(scope="session")
def sales_bundle() -> DatasetBundle:
    tables, fks = make_sales_tables()
    return load_dataset(tables, fks)


def make_survey_table(n_rows: int = 1500, seed: int = 9):
    """Deterministic single-table fixture with numeric and text columns."""
    rng = random.Random(seed)
    education = ["self-taught", "bootcamp", "college degree", "masters"]
    countries = ["usa", "india", "germany", "brazil"]
    rows = []
    for i in range(n_rows):
        rows.append([
            education[rng.randrange(len(education))],
            countries[rng.randrange(len(countries))],
            str(rng.randint(18, 70)),
            f"{rng.uniform(10, 200):.1f}",
        ])
    table = load_csv(
        _csv_bytes(["education", "country", "age", "salary"], rows), "survey"
    )
    return table


@pytest.fixture(scope="session")
def survey_bundle() -> DatasetBundle:
    return load_dataset([make_survey_table()], [])
