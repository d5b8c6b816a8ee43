"""Shared fixtures: small simulated panels and dense-matrix helpers."""
import numpy as np
import pytest

from dlpanel import DgpConfig, build_design, replication_rng, simulate_panel


@pytest.fixture(scope="session")
def small_panel():
    """A light panel (N=6, T=8, p_x=4) used across modules."""
    config = DgpConfig(n_units=6, n_periods=8, p_x=4, alpha_true=(0.5,),
                       n_lags_fit=2, beta_indices=(1,), beta_value=1.0,
                       burn_in=50, seed=11)
    return simulate_panel(config, replication_rng(11, 0))


@pytest.fixture(scope="session")
def small_design(small_panel):
    return build_design(small_panel)


def dense_design_matrix(design):
    """The stacked regressor matrix (Z, D) as a dense array."""
    n, t = design.n_units, design.n_periods
    d = np.kron(np.eye(n), np.ones((t, 1)))
    return np.hstack([design.Z, d])
