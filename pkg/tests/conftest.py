import socket

import numpy as np
import pytest

from treextract import datasets
from treextract.data import INTEGER, DatasetSchema, FeatureSpec, LabeledSample, as_sample
from treextract.tree import TreeParams, tree_from_dict


@pytest.fixture(scope="session")
def iris():
    return datasets.load("iris")


@pytest.fixture(scope="session")
def german():
    return datasets.load("german_numeric")


def integer_schema(n_features=1, lower=0, upper=10, n_classes=2):
    return DatasetSchema(
        tuple(FeatureSpec(f"x{j}", INTEGER, lower, upper) for j in range(n_features)),
        tuple(f"c{c}" for c in range(n_classes)))


def stump(schema, threshold, feature=0, left_label=0, right_label=1, max_depth=1):
    """Depth-1 tree ``x[feature] <= threshold -> left_label``."""
    n = schema.n_classes
    lc, rc = [0] * n, [0] * n
    lc[left_label] += 1
    rc[right_label] += 1
    doc = {"feature": feature, "threshold": float(threshold),
           "left": {"counts": lc}, "right": {"counts": rc}}
    return tree_from_dict(doc, schema, TreeParams(max_depth=max_depth))


def enumerate_domain(schema):
    import itertools
    axes = [range(int(f.lower), int(f.upper) + 1) for f in schema.features]
    return np.array(list(itertools.product(*axes)), dtype=np.float64)


def labeled(schema, tree, X):
    return [LabeledSample(as_sample(x), int(tree.predict(x))) for x in X]


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


# acceptance summary: tests/test_acceptance.py records one line per criterion
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
