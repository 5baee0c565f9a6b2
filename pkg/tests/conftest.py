import pytest

from delaymv import sim
from delaymv.model import ControlParams, LinearMeanFieldModel


def example_model():
    """Scalar system: drift 3x + m, both diffusions x + m."""
    return LinearMeanFieldModel(dim=1, a1=3, a2=1, b1=1, b2=1, c1=1, c2=1)


@pytest.fixture(scope="session")
def scalar_example():
    return example_model()


@pytest.fixture(scope="session")
def controlled_run():
    """Controlled worked-example run shared by the slower checks."""
    model = example_model()
    config = sim.SimConfig(
        n_particles=50,
        n_replications=50,
        dt=5e-4,
        horizon=0.6,
        delay_steps=1,
        seed=20240501,
        record_stride=10,
    )
    control = ControlParams(alpha=22.0, tau=config.tau)
    records = sim.run_replications(config, model, control, [1.0])
    return config, control, records
