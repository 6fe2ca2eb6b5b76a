import os
from functools import reduce

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_string(n, ops):
    """Dense matrix of a product of site letters; site 1 is the leftmost factor."""
    return reduce(np.kron, [PAULI[ops.get(i, "I")] for i in range(1, n + 1)])


@st.composite
def site_letters(draw, n):
    letters = draw(st.lists(st.sampled_from("IXYZ"), min_size=n, max_size=n))
    return {i + 1: l for i, l in enumerate(letters) if l != "I"}
