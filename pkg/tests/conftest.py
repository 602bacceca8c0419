from __future__ import annotations

import numpy as np
import pytest

from proxsel.store import FeatureRecord, open_store, write_store


def make_records(n: int, dim: int, with_aux: bool = False, seed: int = 0) -> list[FeatureRecord]:
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        aux = {}
        if with_aux:
            tokens = int(rng.integers(1, 40))
            aux = {
                "logprob_sum_target": float(-rng.uniform(0.1, 3.0) * tokens),
                "logprob_sum_base": float(-rng.uniform(0.1, 3.0) * tokens),
                "token_count": float(tokens),
            }
        records.append(
            FeatureRecord(
                id=i,
                dataset="even" if i % 2 == 0 else "odd",
                vector=rng.normal(0, 1, dim),
                aux=aux,
            )
        )
    return records


@pytest.fixture
def small_store(tmp_path):
    path = tmp_path / "small.fst"
    write_store(make_records(20, 6), path)
    return open_store(path)


@pytest.fixture
def aux_store(tmp_path):
    path = tmp_path / "aux.fst"
    write_store(make_records(15, 4, with_aux=True), path)
    return open_store(path)
