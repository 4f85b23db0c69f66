import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from vkc_tamp.kinematics import Joint, Link, SerialChain, Transform


def random_transform(rng) -> Transform:
    R = Rotation.random(random_state=int(rng.integers(2**31))).as_matrix()
    return Transform(R, rng.uniform(-1.0, 1.0, 3))


def random_chain(rng, n_joints: int, with_post: bool = True) -> SerialChain:
    """Serial chain of random revolute/prismatic/fixed joints; every link has an ``at`` frame."""
    kinds = rng.choice(["revolute", "prismatic", "fixed"], size=n_joints, p=[0.5, 0.35, 0.15])
    segs = []
    for i, kind in enumerate(kinds):
        axis = rng.normal(size=3)
        post = random_transform(rng) if with_post and rng.random() < 0.3 else Transform.identity()
        lim = (-2.0, 2.0) if kind == "revolute" else (-0.5, 0.5)
        j = Joint(f"j{i}", str(kind), axis, random_transform(rng), lim, 1.0, 2.0, post)
        segs.append((j, Link(f"l{i + 1}", (), {"at": random_transform(rng)})))
    root = Link("l0", (), {"at": random_transform(rng)})
    return SerialChain(root, tuple(segs), ("robot",) * n_joints, random_transform(rng))


def random_q(rng, chain: SerialChain) -> np.ndarray:
    return rng.uniform(chain.lower, chain.upper)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
