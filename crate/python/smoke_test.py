"""Build the extension module and exercise the Python API end to end.

    python3 python/smoke_test.py
"""

import math
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build():
    subprocess.run(["cargo", "build", "--release", "-p", "cmprisk-py"], cwd=ROOT, check=True)
    lib = os.path.join(ROOT, "target", "release", "libcmprisk_py.so")
    dest = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(dest, "cmprisk_py.so"))
    sys.path.insert(0, dest)


def main():
    build()
    import cmprisk_py as cp

    data = cp.simulate(200, 24, seed=3)
    assert (len(data), data.p, data.n_causes) == (200, 24, 2)
    print(data)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "sim.csv")
        data.to_csv(path)
        back = cp.Dataset.read_csv(path)
        assert back.times() == data.times() and back.status() == data.status()

    km = cp.kaplan_meier(data)
    f1 = cp.aalen_johansen(data, 1)
    f2 = cp.aalen_johansen(data, 2)
    for t in km.times:
        assert abs(km(t) + f1(t) + f2(t) - 1.0) < 1e-10
    assert cp.censoring_survival(data)(0.0) == 1.0
    assert cp.nelson_aalen(data, 1)(min(data.times()) / 2) == 0.0

    path = cp.fit_path(data, "mcp", 10)
    best = cp.select_bic([f for f in path if f.converged], len(data))
    print("mcp selected", best.selected, "lambda", round(best.lambda_, 4))
    curve = best.predict_cif(data, data.covariates()[0])
    assert 0.0 <= curve(10.0) <= 1.0

    steps = cp.choose_boost_steps(data, folds=5, max_steps=30)
    fit = cp.boost(data, steps=max(steps, 1))
    assert all(b >= a - 1e-9 for a, b in zip(fit.log_likelihood, fit.log_likelihood[1:]))
    print("coxboost steps", steps, "selected", fit.selected)

    forest = cp.Forest(data, n_trees=20, seed=1)
    vimp, degenerate = forest.importance(data)
    assert len(vimp) == data.p and len(forest.minimal_depth()) == data.p
    cifs = [forest.predict_cif(x) for x in data.covariates()]
    risks = [f(10.0) for f in cifs]
    c = cp.cindex(risks, data)
    print("forest apparent c-index", round(c, 3), "ibs", round(cp.ibs(cifs, data), 4))
    assert c > 0.5

    net = cp.DeepHit(data, epochs=5, bins=10, seed=2)
    pmf = net.predict_pmf(data.covariates()[0])
    assert len(pmf) == 2 and len(pmf[0]) == 10
    assert math.isclose(sum(map(sum, pmf)), 1.0, abs_tol=1e-9)
    assert len(net.loss_history) == 5

    assert cp.tpr_fdr([0, 1, 30], list(range(12))) == (2 / 12, 1 / 3)
    try:
        cp.Dataset([1.0], [5], [[0.0]], n_causes=2)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid status accepted")
    print("python smoke test passed")


if __name__ == "__main__":
    main()
