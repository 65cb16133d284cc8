from trustboost.ccc import SynchronyConfig
from trustboost.chain import make_chains
from trustboost.core import Transaction
from trustboost.sim import Simulation


def test_monitor_flags_rewritten_log():
    chains = make_chains(2)
    sim = Simulation(chains, SynchronyConfig(0, 1))
    chains[0].log.append(Transaction("a"))
    sim.step(0)
    chains[0].log[0] = Transaction("b")
    sim.step(1)
    assert sim.violations == ["chain 0 log rewritten at tick 1"]


def test_scheduled_actions_run_in_order():
    sim = Simulation(make_chains(1), SynchronyConfig(0, 1))
    seen = []
    sim.at(2, lambda now: seen.append(("b", now)))
    sim.at(1, lambda now: seen.append(("a", now)))
    sim.run(5, stop_when_idle=False)
    assert seen == [("a", 1), ("b", 2)]
