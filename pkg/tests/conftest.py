import pytest

from ordnbs.datagen import PopulationSpec
from ordnbs.experiment import ComparatorConfig, ExperimentConfig


def small_config(**kw) -> ExperimentConfig:
    """A seconds-scale config: small population, short training, few test items."""
    base = dict(
        population=PopulationSpec(size=3000),
        comparator=ComparatorConfig(max_epochs=5, train_budget=600, validation_budget=400),
        budgets=(8, 50),
        repetitions=2,
        test_items=40,
        seed=7,
    )
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture
def small():
    return small_config


ACCEPTANCE_LINES: list[str] = []


def acceptance_line(criterion: str, status: str, detail: str) -> str:
    line = f"[{status}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
