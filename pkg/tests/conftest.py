import pytest

from dualspace import bucket_panel, dual_regression, state_space, synth_market

#: Generator configuration used by the backcast oracle checks: dense
#: tapes, strong planted sentiment coupling, no coupling to the yield.
COUPLED_CONFIG = synth_market.MarketConfig(
    n_traders=2, seed=11, trades_per_day_mean=300.0,
    couplings=synth_market.Couplings(g_sent=0.9))


@pytest.fixture(scope="session")
def coupled_market():
    return synth_market.gen_market(COUPLED_CONFIG)


@pytest.fixture(scope="session")
def coupled_outputs(coupled_market):
    """(states, regression output) per trader of the coupled market."""
    result = []
    for tape in coupled_market.tapes:
        panels = bucket_panel.build_panels(tape.records)
        states = state_space.state_matrix(panels, state_space.VolumeMode.IMBALANCE)
        result.append((states, dual_regression.fit_beta(states)))
    return result


@pytest.fixture(scope="session")
def small_market():
    """Cheap 130-day two-trader market for plumbing tests."""
    config = synth_market.MarketConfig(n_traders=2, n_days=130,
                                       trades_per_day_mean=80.0, seed=3)
    return synth_market.gen_market(config)
