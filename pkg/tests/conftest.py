import numpy as np
import pytest

from fundstop import FeeParams, GridSpec, ProfileSpec


@pytest.fixture(scope="session")
def worked_params():
    """The worked example: 20% performance fee, 2% management fee, 30% retained,
    sqrt profile capped at 3 and normalized so the cumulative mass at w0=1 is 1,
    log utility."""
    return FeeParams(
        alpha=0.2,
        beta=0.02,
        p=0.3,
        w0=1.0,
        profile=ProfileSpec(family="sqrt_capped", cap=3.0, normalize_at_w0=True),
        utility="log",
    )


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(h=0.05, m=4, n=4, w0=1.0)


def random_line_values(rng, min_total=3, max_total=200, lo=-10.0, hi=10.0):
    total = int(rng.integers(min_total, max_total + 1))
    return rng.uniform(lo, hi, size=total)


def admissible_lattice(w0=1.0):
    """Small lattice of admissible (w_min, w, w_max) triples around w0."""
    triples = []
    for w_min in np.arange(0.2, 1.01, 0.2):
        for w_max in np.arange(1.0, 2.01, 0.25):
            for w in np.arange(w_min, w_max + 1e-9, 0.1):
                triples.append((round(w_min, 10), round(min(w, w_max), 10), round(w_max, 10)))
    return triples
