"""Smoke test for the clocknet extension module.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import math

import clocknet


def main():
    css = clocknet.CollectiveSpin.css(1000)
    assert abs(css.squeezing_parameter() - 1.0) < 1e-12

    kappa = clocknet.kappa_free(100.0, 0.5)
    squeezed, _ = css.qnd(kappa, 0.5, seed=1)
    assert abs(squeezed.squeezing_parameter() - clocknet.xi_after_qnd(kappa, 0.5)) < 1e-9
    assert squeezed.rotate("y", math.pi / 2).mean_spin[2] < 0.0

    assert abs(clocknet.chain_improvement(4, 0.5) - 3.14) < 0.005
    assert abs(clocknet.chain_improvement(8, 0.5) - 6.02) < 0.01

    rates = clocknet.CouplingRates.matched(1.0, 3.0)
    pair = clocknet.EprState.steady_state(rates, 500.0)
    value, bound, entangled = pair.criterion()
    assert entangled and value < bound
    assert abs(value - clocknet.matched_criterion(500.0, 1.0, 3.0)) < 1e-6
    summary = pair.protocol(2000, seed=3)
    assert not summary["eavesdrop_flag"]
    attacked = pair.protocol(2000, seed=3, eavesdrop_fraction=1.0)
    assert attacked["eavesdrop_flag"]

    assert "paper-chain-4" in clocknet.preset_names()
    record = clocknet.run_scenario(clocknet.preset("paper-cavity-sr"))
    outputs = {q["name"]: q["value"] for q in record["outputs"]}
    assert record["schema_version"] == 1
    assert abs(outputs["cooperativity"] - 1231.5) < 0.1

    print("clocknet", clocknet.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
