import numpy as np
import pytest
from hypothesis import strategies as st

from cvcoherent import gaussian as g

ACCEPTANCE_LINES = []

GATE_BUILDERS = {
    "reflection": (1, lambda: g.reflection()),
    "fourier": (1, lambda: g.fourier()),
    "fourier_inv": (1, lambda: g.fourier_inv()),
    "controlled_x": (2, lambda: g.controlled_x()),
    "controlled_x_inv": (2, lambda: g.controlled_x_inv()),
    "controlled_p": (2, lambda: g.controlled_p()),
    "beamsplitter_5050": (2, lambda: g.beamsplitter_5050()),
    "squeeze_x": (1, lambda: g.squeeze(0.7, "position")),
    "squeeze_p": (1, lambda: g.squeeze(0.3, "momentum")),
}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@st.composite
def random_ops(draw, n_modes):
    """Products of library gates on random modes, plus a displacement."""
    op = g.SymplecticOp.identity(n_modes)
    names = sorted(GATE_BUILDERS)
    for _ in range(draw(st.integers(1, 6))):
        name = draw(st.sampled_from(names))
        k, build = GATE_BUILDERS[name]
        if k > n_modes:
            continue
        modes = draw(st.permutations(range(n_modes)))[:k]
        op = op.then(g.embed(build(), modes, n_modes))
    d = draw(st.lists(st.floats(-3, 3), min_size=2 * n_modes, max_size=2 * n_modes))
    return op.then(g.SymplecticOp(np.eye(2 * n_modes), np.array(d)))


@st.composite
def random_states(draw, n_modes):
    """Physical states: thermal and squeezed products pushed through random gates."""
    parts = []
    for k in range(n_modes):
        if draw(st.booleans()):
            parts.append(g.new_thermal(draw(st.floats(0, 2)), f"m{k}"))
        else:
            parts.append(g.new_squeezed(draw(st.floats(0, 1.2)), draw(st.sampled_from(["x", "p"])), f"m{k}"))
    return g.apply(g.tensor(*parts), draw(random_ops(n_modes)))


@pytest.fixture
def tmsv1():
    return g.new_tmsv(1.0)
