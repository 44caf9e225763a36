import numpy as np
import pytest

from fedjam.dataset import ClientDataset


def toy_client(client_id, n_obs=24, q_len=4, seed=0, separation=0.0):
    """Small in-memory client with random IQ; optional label-dependent shift.

    `separation` adds a constant offset to jammed observations so toy
    classification tasks are solvable.
    """
    rng = np.random.default_rng(seed)
    labels = np.array([0, 1] * (n_obs // 2), dtype=np.uint8)
    iq = (rng.normal(size=(n_obs, q_len)) + 1j * rng.normal(size=(n_obs, q_len)))
    iq += separation * labels[:, None]
    n_train = round(0.72 * n_obs)
    n_valid = round(0.08 * n_obs)
    tags = np.full(n_obs, 2, dtype=np.uint8)
    tags[:n_train] = 0
    tags[n_train : n_train + n_valid] = 1
    return ClientDataset(
        client_id=client_id,
        femtocell_id=1 + client_id % 3,
        iq=iq.astype(np.complex64),
        labels=labels,
        split_tags=tags,
    )


@pytest.fixture
def toy_clients():
    return [toy_client(i, n_obs=24, q_len=4, seed=100 + i) for i in range(3)]
