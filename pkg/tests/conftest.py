import numpy as np
import pytest

from peg.dp import CaptureSpec, solve
from peg.graph import cycle_graph, generate_grid, path_graph

ADJ = CaptureSpec.adjacent()


@pytest.fixture(scope="session")
def p2():
    return path_graph(2)


@pytest.fixture(scope="session")
def p5():
    return path_graph(5)


@pytest.fixture(scope="session")
def c4():
    return cycle_graph(4)


@pytest.fixture(scope="session")
def grid10():
    return generate_grid(10, 10)


@pytest.fixture(scope="session")
def t_p2(p2):
    return solve(p2, 1, ADJ)


@pytest.fixture(scope="session")
def t_p5(p5):
    return solve(p5, 1, ADJ)


@pytest.fixture(scope="session")
def t_c4(c4):
    return solve(c4, 1, ADJ)


@pytest.fixture(scope="session")
def t_grid10(grid10):
    return solve(grid10, 2, ADJ)


# Worst-case capture steps on the 5-path with one pursuer and adjacent
# capture, frozen from the fixed-point oracle and cross-checked by the
# exhaustive game-tree search (rows: pursuer node, cols: evader node).
P5_TABLE = np.array([
    [0, 0, 3, 3, 3],
    [0, 0, 0, 2, 2],
    [1, 0, 0, 0, 1],
    [2, 2, 0, 0, 0],
    [3, 3, 3, 0, 0],
], dtype=np.int64)
