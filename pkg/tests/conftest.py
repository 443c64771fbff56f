import numpy as np
import pytest

from qbbt import reactor
from qbbt.suites import synthetic_structured


@pytest.fixture(scope="session")
def reactor5():
    cfg = reactor.ReactorConfig(n=5)
    fom = reactor.assemble_fom(cfg)
    return cfg, fom, reactor.lift_reactor(fom, cfg)


@pytest.fixture(scope="session")
def reactor10():
    cfg = reactor.ReactorConfig(n=10)
    fom = reactor.assemble_fom(cfg)
    psi, theta = reactor.steady_state(cfg, 0.5, fom=fom)
    return cfg, fom, reactor.lift_reactor(fom, cfg), np.concatenate([psi, theta])


@pytest.fixture(scope="session")
def reactor50():
    cfg = reactor.ReactorConfig(n=50)
    fom = reactor.assemble_fom(cfg)
    psi, theta = reactor.steady_state(cfg, 0.5, fom=fom)
    return cfg, fom, reactor.lift_reactor(fom, cfg), np.concatenate([psi, theta])


@pytest.fixture(scope="session")
def synthetic():
    return synthetic_structured()
