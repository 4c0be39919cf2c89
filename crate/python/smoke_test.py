"""Quick check that the extension module imports and its main entry points work.

Build and install first:  maturin develop -m crates/python/Cargo.toml
"""

import math
import pathlib
import tempfile

import rwre_lab as rl


def check_model_roundtrip():
    m = rl.EnvironmentModel.homogeneous([0.3, 0.3, 0.2, 0.2])
    assert m.dimension == 2
    again = rl.EnvironmentModel.from_dict(m.to_dict())
    assert again.to_dict() == m.to_dict()
    try:
        rl.EnvironmentModel.homogeneous([0.5, 0.6])
    except ValueError:
        pass
    else:
        raise AssertionError("invalid probabilities accepted")


def check_walks():
    model = rl.EnvironmentModel.perturbed_srw(2, 0.1, 1)
    env = rl.QuenchedEnvironment(model, 7)
    a = rl.simulate(env, 3, 500)
    b = rl.simulate(env, 3, 500)
    assert a.steps() == b.steps() and len(a) == 500
    assert len(a.positions()) == 501

    t = rl.Trajectory(1, [1, 1, -1, 1, 1])
    assert t.endpoint() == [3]
    assert rl.first_passage(t, [1], 2) == 5
    assert rl.backtrack_time(t, [1]) is None
    assert rl.backtrack_time(rl.Trajectory(1, [1, -1, -1]), [1]) == 3

    trajs = rl.ensemble(model, 11, 200, 2000)
    speed = rl.estimate_speed(trajs, [1.0, 0.0])
    assert speed["all"]["mean"] > 0
    verdict = rl.classify_transience(trajs, [1.0, 0.0])
    assert verdict["verdict"] == "transient_plus", verdict


def check_cone():
    spec = rl.ConeSpec([1, 1], [[1, 1], [1, -1]], [1, 0], "1/2")
    assert rl.cone_contains(spec, [0, 0], [4, 1])
    assert not rl.cone_contains(spec, [0, 0], [-1, 0])
    model = rl.EnvironmentModel.perturbed_srw(2, 0.15, 1)
    trajs = rl.ensemble(model, 5, 50, 3000)
    rec = rl.detect_renewals(trajs[0], spec, 300)
    assert all(x < y for x, y in zip(rec.times, rec.times[1:]))
    chosen, table = rl.lambda_scan(trajs, spec.with_lambda("1"), 300, grid_size=4)
    assert len(table) == 4
    print("lambda_scan picked", chosen)


def check_oracle():
    p, m, n = 0.6, 3, 4
    closed = rl.gamblers_ruin(p, m, n)
    model = rl.EnvironmentModel.homogeneous([p, 1 - p])
    env = rl.QuenchedEnvironment(model, 0)
    exact = rl.exact_quenched_exit(env, {"kind": "interval", "lo": -m, "hi": n}, [0], ["right"])
    assert math.isclose(closed, exact, abs_tol=1e-10), (closed, exact)

    sol = rl.solomon_1d(rl.EnvironmentModel.mixture([[0.6, 0.4], [0.8, 0.2]], [0.5, 0.5]))
    assert sol["verdict"] == "transient_plus", sol
    assert math.isclose(sol["speed"], 13 / 35, rel_tol=1e-12)

    ann = rl.annealed_exit(rl.EnvironmentModel.dirichlet([1.0, 1.0]), {"kind": "interval", "lo": -3, "hi": 3},
                           [0], 20, 1)
    assert 0.0 <= ann["mean"]["mean"] <= 1.0 and len(ann["values"]) == 20


def check_cli():
    toml = """
kind = "simulate"
dimension = 1
master_seed = 3
n_walks = 4
horizon = 100

[model]
kind = "homogeneous"
probs = [0.4, 0.6]
"""
    rows = rl.execute_config(toml)
    assert len(rows) == 4 and rows[0]["record"] == "trajectory"
    with tempfile.TemporaryDirectory() as d:
        cfg = pathlib.Path(d) / "sim.toml"
        cfg.write_text(toml)
        status, out = rl.run_config(str(cfg), out=str(pathlib.Path(d) / "out"))
        assert status == "ok"
        assert (pathlib.Path(out) / "results.jsonl").exists()


if __name__ == "__main__":
    check_model_roundtrip()
    check_walks()
    check_cone()
    check_oracle()
    check_cli()
    print("smoke test passed")
