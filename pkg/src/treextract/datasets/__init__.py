"""Bundled datasets: ``iris`` and ``german_numeric`` (CSV plus schema JSON)."""
from pathlib import Path

_HERE = Path(__file__).resolve().parent
NAMES = ("iris", "german_numeric")


def path(name: str) -> Path:
    """Path of a bundled file: ``"iris"`` -> the CSV, ``"iris.json"`` -> its schema."""
    stem, _, ext = name.partition(".")
    if stem not in NAMES:
        raise KeyError(f"unknown dataset {stem!r}; choose from {NAMES}")
    return _HERE / f"{stem}.{ext or 'csv'}"


def load(name: str):
    """``(schema, samples)`` for a bundled dataset."""
    from ..data import load_dataset
    return load_dataset(path(name), path(name + ".json"))
