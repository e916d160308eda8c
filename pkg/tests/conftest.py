import os
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from darwin_data import CLASS_COLUMN, ID_COLUMN, expected_columns, load_darwin


def make_darwin_frame(n_patients: int = 12, n_healthy: int = 10, shift: float = 1.0, seed: int = 0) -> pd.DataFrame:
    """DARWIN-shaped table; patients are shifted up on every feature."""
    rng = np.random.default_rng(seed)
    n = n_patients + n_healthy
    labels = np.array(["P"] * n_patients + ["H"] * n_healthy)[rng.permutation(n)]

    values = rng.normal(loc=10.0, scale=1.0, size=(n, len(expected_columns())))
    values[labels == "P"] += shift

    frame = pd.DataFrame(values, columns=expected_columns())
    frame.insert(0, ID_COLUMN, [f"id_{i + 1}" for i in range(n)])
    frame[CLASS_COLUMN] = labels
    return frame


@pytest.fixture
def write_darwin_csv(tmp_path):
    """Write a (possibly edited) DARWIN-shaped frame and return its path."""
    def _write(frame: pd.DataFrame = None, name: str = "darwin.csv", **kwargs) -> Path:
        if frame is None:
            frame = make_darwin_frame(**kwargs)
        path = tmp_path / name
        frame.to_csv(path, index=False)
        return path
    return _write


@pytest.fixture
def darwin_csv(write_darwin_csv):
    return write_darwin_csv()


@pytest.fixture
def darwin_matrix(darwin_csv):
    return load_darwin(darwin_csv)


@pytest.fixture
def real_darwin_csv():
    path = os.getenv("DARWIN_CSV")
    if not path or not Path(path).is_file():
        pytest.skip("DARWIN_CSV does not point at the dataset")
    return Path(path)
