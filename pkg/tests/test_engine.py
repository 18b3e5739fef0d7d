import numpy as np
import pytest

from primex_track.belief import GaussianBelief
from primex_track.engine import Engine, ci_optimal_weights
from primex_track.errors import ProtocolError
from primex_track.fusion import ci_optimal_weight
from primex_track.ic_codes import PrimeIndexAllocator
from primex_track.network import generate_topology
from primex_track.protocols import ALGORITHMS, ProtocolConfig, initial_states, run_time_step

RUNS = 2


def reference_trajectory(graph, algorithm, z, config, prior, motion, sensor, window_length=None):
    states = initial_states(graph, prior)
    alloc = PrimeIndexAllocator(len(graph.sensor_ids), window_length)
    out = []
    for k in range(1, z.shape[0] + 1):
        meas = {s: z[k - 1, r] for r, s in enumerate(graph.sensor_ids)}
        states, alloc, logs = run_time_step(states, graph, algorithm, k, meas, config, alloc, motion, sensor)
        out.append((states, logs))
    return out


@pytest.fixture(scope="module")
def graph():
    return generate_topology(3, 15, 4, 4.0)


@pytest.fixture(scope="module")
def measurements():
    rng = np.random.default_rng(0)
    return rng.normal(0, 10, (RUNS, 5, 4, 2)) + 100 * np.arange(1, 6)[None, :, None, None]


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_engine_matches_reference(algorithm, graph, measurements, prior, motion, sensor):
    config = ProtocolConfig(rounds=4)
    engine = Engine(graph, algorithm, prior, motion, sensor, config, runs=RUNS)
    refs = [reference_trajectory(graph, algorithm, measurements[r], config, prior, motion, sensor) for r in range(RUNS)]
    for k in range(1, 6):
        batch_logs = engine.step(k, measurements[:, k - 1])
        means = engine.means()
        for r in range(RUNS):
            states, logs = refs[r][k - 1]
            got = engine.to_states(r)
            for i, s in enumerate(states):
                assert np.allclose(means[r, i], s.belief.mean, rtol=1e-12, atol=1e-9)
                assert np.allclose(got[i].belief.covariance, s.belief.covariance, rtol=1e-10, atol=1e-12)
                if algorithm != "cf":
                    assert got[i].ic == s.ic and got[i].reference_ic == s.reference_ic
            if algorithm != "cf":
                assert [b.for_run(r).transmitters for b in batch_logs] == [x.transmitters for x in logs]
                assert [b.for_run(r).fusions for b in batch_logs] == [x.fusions for x in logs]


@pytest.mark.parametrize("algorithm", ["primex-c-et", "primex-g"])
def test_engine_matches_reference_with_window(algorithm, graph, measurements, prior, motion, sensor):
    config = ProtocolConfig(rounds=3)
    engine = Engine(graph, algorithm, prior, motion, sensor, config, window_length=2)
    ref = reference_trajectory(graph, algorithm, measurements[0], config, prior, motion, sensor, 2)
    for k in range(1, 6):
        engine.step(k, measurements[:1, k - 1])
        states, _ = ref[k - 1]
        got = engine.to_states(0)
        assert all(g.ic == s.ic for g, s in zip(got, states))
        assert got[0].ic.length == (1 + 4 if k == 1 else 2 * 4)
        assert np.allclose(engine.means()[0], [s.belief.mean for s in states], rtol=1e-12, atol=1e-9)


def test_batched_ci_weights_match_pairwise():
    rng = np.random.default_rng(1)
    a_list, b_list = [], []
    for _ in range(40):
        x, y = rng.standard_normal((2, 4, 4))
        a_list.append(x @ x.T + 0.2 * np.eye(4))
        b_list.append(y @ y.T + 0.2 * np.eye(4))
    # equal inputs make the objective flat, which resolves to 0.5
    a_list.append(np.eye(4))
    b_list.append(np.eye(4))
    w = ci_optimal_weights(np.array(a_list), np.array(b_list))
    for q, (oa, ob) in enumerate(zip(a_list, b_list)):
        ref = ci_optimal_weight(GaussianBelief.from_information(oa, np.zeros(4)), GaussianBelief.from_information(ob, np.zeros(4)))
        assert w[q] == pytest.approx(ref, abs=1e-9)
    assert w[-1] == 0.5


def test_step_checks_inputs(graph, prior, motion, sensor):
    engine = Engine(graph, "primex-c", prior, motion, sensor, runs=2)
    with pytest.raises(ProtocolError):
        engine.step(1, np.zeros((1, 4, 2)))
    with pytest.raises(ProtocolError):
        engine.step(1, None)
    with pytest.raises(ProtocolError):
        Engine(graph, "gossip", prior, motion, sensor)


def test_cf_shares_one_belief(graph, measurements, prior, motion, sensor):
    engine = Engine(graph, "cf", prior, motion, sensor, runs=RUNS)
    assert engine.step(1, measurements[:, 0]) == []
    means = engine.means()
    assert means.shape == (RUNS, 15, 4)
    assert np.all(means == means[:, :1])
