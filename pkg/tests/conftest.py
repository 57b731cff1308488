import numpy as np
import pytest

from asymptotic_dirichlet import (CoefficientBundle, ModelManifold,
                                  profile_catalog)


def ones(r):
    return np.ones_like(np.asarray(r, dtype=float))


def zeros_log(r):
    return np.zeros_like(np.asarray(r, dtype=float))


def unit_bundle(c=0.0, f=0.0):
    return CoefficientBundle.radial(a=ones, c=c, f=f, a_minorant=ones,
                                    a_minorant_log=zeros_log, r0=1.0, c0=1.0)


def psi_sq_bundle(manifold, floor=1.0, c=0.0, f=0.0):
    """a = abar = psi(max(r, floor))**2; weight-compatible with c0 = 1."""
    log_psi = manifold.profile.log_eval

    def a_log(r):
        return 2.0 * log_psi(np.maximum(r, floor))

    def a_val(r):
        with np.errstate(over="ignore"):
            return np.exp(a_log(r))

    return CoefficientBundle.radial(a=a_val, c=c, f=f, a_minorant=a_val,
                                    a_minorant_log=a_log, r0=floor, c0=1.0)


@pytest.fixture(scope="session")
def euclidean2():
    return ModelManifold(2, profile_catalog("euclidean"))


@pytest.fixture(scope="session")
def hyperbolic2():
    return ModelManifold(2, profile_catalog("hyperbolic", alpha=1.0))


@pytest.fixture(scope="session")
def hyperbolic3():
    return ModelManifold(3, profile_catalog("hyperbolic", alpha=1.0))


@pytest.fixture(scope="session")
def exp_power2():
    return ModelManifold(2, profile_catalog("exp_power", alpha=3.0))
