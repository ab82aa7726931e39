"""Smoke test for the frpsa extension module.

Build and install first:
    pip install --no-build-isolation maturin
    maturin develop -m crates/python/Cargo.toml
then run:
    python python/smoke_test.py
"""

import json
import math
import os
import tempfile

import frpsa

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "data")

SPEC = {
    "constructs": [
        {"name": "X", "mode": "reflective", "indicators": ["x1", "x2", "x3"]},
        {"name": "Y", "mode": "reflective", "indicators": ["y1", "y2", "y3"]},
    ],
    "paths": [{"from": "X", "to": "Y"}],
}

GEN = {
    "n": 400,
    "constructs": [
        {"name": "X", "indicators": [{"name": f"x{i}", "loading": l} for i, l in enumerate([0.9, 0.8, 0.7], 1)]},
        {"name": "Y", "indicators": [{"name": f"y{i}", "loading": l} for i, l in enumerate([0.9, 0.8, 0.7], 1)]},
    ],
    "paths": [{"from": "X", "to": "Y", "coef": 0.5}],
}


def main():
    assert abs(frpsa.sigmoid(0.0) - 0.5) < 1e-15
    assert abs(frpsa.composite_reliability([0.9, 0.8, 0.7]) - 5.76 / (5.76 + 0.19 + 0.36 + 0.51)) < 1e-12
    assert abs(frpsa.average_variance_extracted([0.9, 0.8, 0.7]) - 1.94 / 3) < 1e-12

    spec = frpsa.ModelSpec.from_json(json.dumps(SPEC))
    assert spec.constructs() == ["X", "Y"]
    assert spec.outcome() == "Y"

    columns, rows = frpsa.generate_synthetic(json.dumps(GEN), 7)
    assert len(rows) == 400 and len(columns) == 6
    est = frpsa.estimate(spec, columns, rows)
    beta = est.path("X", "Y")
    assert 0.3 < beta < 0.7, beta
    assert abs(est.r_squared("Y") - beta * beta) < 1e-10

    report = frpsa.measurement_report(spec, columns, rows)
    assert [r["construct"] for r in report] == ["X", "Y"]
    assert all(r["ave"] <= r["composite_reliability"] for r in report)

    boot = frpsa.bootstrap_paths(spec, columns, rows, reps=200, seed=3)
    assert boot[0]["p"] < 0.001
    lo, hi = boot[0]["interval"]
    assert lo < beta < hi

    se, t, p = frpsa.t_and_p([1.0, 2.0, 3.0], 2.0)
    assert abs(se - 1.0) < 1e-12 and abs(t - 2.0) < 1e-12 and 0 < p < 1

    x = [[r[0], r[3]] for r in rows]
    y = [frpsa.sigmoid(a - b) for a, b in x]
    cv = frpsa.kfold_cv(x, y, folds=5, epochs=300, seed=1)
    assert len(cv["folds"]) == 5
    assert abs(sum(cv["importance"]) - 1.0) < 1e-9
    assert abs(max(cv["normalized_importance"]) - 100.0) < 1e-9

    try:
        frpsa.ModelSpec.from_json("{}")
    except ValueError:
        pass
    else:
        raise AssertionError("empty spec accepted")

    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "report")
        files = frpsa.run_frpsa(
            os.path.join(DATA, "replica_spec.json"),
            os.path.join(DATA, "replica_synthetic.csv"),
            out,
            reps=50,
            folds=3,
        )
        assert "meta.json" in files and len(files) == 8, files

    assert not math.isnan(beta)
    print("frpsa", frpsa.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
