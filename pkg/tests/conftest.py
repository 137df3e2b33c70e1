import numpy as np
import pytest

from balkwise.model import ExponentialFamily, ModelConfig, ParamSpace


@pytest.fixture
def anchor_cfg():
    """The configuration used throughout the simulation studies."""
    return ModelConfig(lam=1.0, mu=1.0, cost_c=1.0, price=15.0)


@pytest.fixture
def expo():
    return ExponentialFamily(ParamSpace(np.array([1e-3]), np.array([5.0])))


@pytest.fixture
def expo_worked():
    """Parameter box of the worked estimation example."""
    return ExponentialFamily(ParamSpace(np.array([0.01]), np.array([5.0])))
