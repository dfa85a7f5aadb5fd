import numpy as np
import pytest

from phsystem import PHSystem


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def prefect_harness():
    from prefect.testing.utilities import prefect_test_harness

    with prefect_test_harness():
        yield


def linear_system(a_matrix, name="linear", forcing=None) -> PHSystem:
    """dz/dt = A z with H = |z|^2/2, J the skew and -R the symmetric part of A."""
    a_matrix = np.asarray(a_matrix, dtype=float)
    j_mat = 0.5 * (a_matrix - a_matrix.T)
    r_mat = -0.5 * (a_matrix + a_matrix.T)
    dim = a_matrix.shape[0]

    e_last = np.eye(dim)[-1]

    def b_apply(t, v):
        out = np.zeros_like(np.asarray(v, dtype=float))
        if forcing is not None:
            out += np.multiply.outer(e_last, forcing(np.asarray(t, dtype=float)))
        return out

    return PHSystem(
        name=name,
        dim=dim,
        hamiltonian=lambda z: 0.5 * np.sum(np.asarray(z) ** 2, axis=0),
        eta=lambda z: np.asarray(z, dtype=float),
        j_apply=lambda v: j_mat @ v,
        r_apply=lambda v: r_mat @ v,
        b_apply=b_apply,
    )


@pytest.fixture
def oscillator():
    return linear_system([[0.0, 1.0], [-1.0, 0.0]], name="oscillator")


@pytest.fixture
def decay():
    return linear_system([[-1.0]], name="decay")
