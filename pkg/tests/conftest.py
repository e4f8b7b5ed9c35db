import numpy as np
import pytest

from ocolc.core import BallDomain, ConvexFn
from ocolc.problems import ProblemSpec


def make_problem(n, gs, R=1.0, G=1.0, H1=None, make_loss=None, name="inline"):
    """Assemble a minimal ProblemSpec for unit tests.

    make_loss(seed, t) -> ConvexFn; defaults to the zero loss. Streams built
    this way have no RNG, so determinism is trivial.
    """
    if make_loss is None:
        def make_loss(seed, t):
            return ConvexFn(lambda x: 0.0, lambda x: np.zeros(n), lipschitz_hint=0.0)

    def losses(seed, T):
        return [make_loss(seed, t) for t in range(T)]

    def mean_loss(seed, T):
        fs = losses(seed, T)

        def ev(x):
            return sum(f.eval(x) for f in fs) / len(fs)

        def sg(x):
            out = np.zeros(n)
            for f in fs:
                out += f.subgrad(x)
            return out / len(fs)

        return ConvexFn(ev, sg)

    return ProblemSpec(
        name=name,
        n=n,
        gs=list(gs),
        dom=BallDomain(radius=R, dim=n),
        G=G,
        H1=H1,
        constraint_values=lambda x: np.array([g.eval(x) for g in gs]),
        losses=losses,
        mean_loss=mean_loss,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
