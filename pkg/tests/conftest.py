import numpy as np
import pytest

from imputebench.tabular import CATEGORICAL, CONTINUOUS, Dataset, FeatureSchema


def make_dataset(X, y=None, name="toy", categorical=None, n_classes=None):
    """Continuous features from ``X`` plus a categorical target column.

    ``categorical`` maps column index -> number of categories for columns
    that hold label codes.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if y is None:
        y = np.arange(n) % 2
    y = np.asarray(y, dtype=float)
    k = n_classes or int(np.nanmax(y)) + 1
    categorical = categorical or {}
    schema = []
    for j in range(p):
        if j in categorical:
            schema.append(FeatureSchema(f"c{j}", CATEGORICAL, tuple(f"L{i}" for i in range(categorical[j]))))
        else:
            schema.append(FeatureSchema(f"f{j}", CONTINUOUS))
    schema.append(FeatureSchema("y", CATEGORICAL, tuple(str(i) for i in range(max(k, 1))), True))
    return Dataset(name, tuple(schema), np.column_stack([X, y]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy():
    X = np.arange(40, dtype=float).reshape(10, 4)
    return make_dataset(X)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
