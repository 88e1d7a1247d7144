import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from calltriage.config import ServiceConfig
from calltriage.knowledge import KnowledgeBase
from calltriage.media_gateway import Scenario, ScenarioWord

settings.register_profile(
    "ci", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "calltriage" / "data"


@pytest.fixture(scope="session")
def service_config() -> ServiceConfig:
    return ServiceConfig()


@pytest.fixture(scope="session")
def kb(service_config) -> KnowledgeBase:
    return KnowledgeBase.from_corpus_csv(service_config.corpus_path)


def make_scenario(text: str, name: str = "test", ms_per_word: int = 100) -> Scenario:
    """Evenly timed words, ms_per_word each, back to back."""
    words = []
    t = 0
    for w in text.split():
        words.append(ScenarioWord(w, t, t + ms_per_word))
        t += ms_per_word
    return Scenario(name=name, words=words)


@pytest.fixture
def gun_script() -> Scenario:
    return make_scenario("there's a guy with a gun", name="gun")


def load_table_cases():
    """The 19 fixture cases: (case_id, transcript, prediction, gold, concepts)."""
    import csv

    gold_rows, pred_rows = {}, {}
    with open(DATA_DIR / "eval" / "table_cases_gold.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            gold_rows[row["case_id"]] = row
    with open(DATA_DIR / "eval" / "table_cases_pred.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pred_rows[row["case_id"]] = row
    concepts = json.loads((DATA_DIR / "eval" / "table_cases_concepts.json").read_text())
    return [
        (cid, gold_rows[cid]["text"], pred_rows[cid]["text"], gold_rows[cid]["level"], concepts[cid])
        for cid in gold_rows
    ]
