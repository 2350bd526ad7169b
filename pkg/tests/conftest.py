import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from subrag.graph import build_graph
from subrag.io import save_graph
from subrag.graph import NodeAttributes


@pytest.fixture
def path3():
    """P3: 0 - 1 - 2."""
    return build_graph([(0, 1), (1, 2)], node_count=3)


@pytest.fixture
def path4():
    """P4: 0 - 1 - 2 - 3."""
    return build_graph([(0, 1), (1, 2), (2, 3)], node_count=4)


@pytest.fixture
def triangle_pendant():
    """Triangle {0,1,2} plus pendant node 3 hanging off node 2."""
    return build_graph([(0, 1), (0, 2), (1, 2), (2, 3)], node_count=4)


@pytest.fixture
def star5():
    """Star with center 0 and leaves 1..4."""
    return build_graph([(0, i) for i in range(1, 5)], node_count=5)


@pytest.fixture
def toy_bundle(tmp_path):
    """A tiny saved bundle with texts and 2-d features."""
    g = build_graph([(0, 1), (1, 2), (2, 3), (0, 3)], node_count=4)
    attrs = NodeAttributes(
        node_count=4,
        texts=[
            "alpha document about graphs",
            "beta document about retrieval",
            "gamma document about generation",
            "delta document about benchmarks",
        ],
        features=np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]]),
        labels=np.array([0, 1, 0, 1]),
    )
    out = tmp_path / "bundle"
    save_graph(g, attrs, out)
    return out
