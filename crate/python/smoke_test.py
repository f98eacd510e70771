"""Smoke test for the cobs extension module.

Build and install first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/cobs-*.whl
"""

import json
import pathlib
import sys

import cobs

ROOT = pathlib.Path(__file__).resolve().parent.parent
IRIS = ROOT / "crates" / "core" / "data" / "iris.csv"


def main():
    d = cobs.Dataset.load(str(IRIS), label_col="species")
    assert len(d) == 147 and d.n_features == 4, d
    assert all(0.0 <= v <= 1.0 for v in d.row(0))

    grid = json.dumps({"kmeans": {"k": {"lo": 2, "hi": 6}, "seeds": 5}})
    e = cobs.Ensemble.generate(d, grid=grid, workers=2)
    assert len(e) == 25 and e.counts() == (25, 0, 0)

    cs = d.random_constraints(50, seed=3)
    assert len(cs) == 50
    index, score = cobs.cobs_select(e, cs, seed=0)
    satisfied = [
        sum((a[i] == a[j]) == ml for i, j, ml in cs)
        for a in map(e.assignment, range(len(e)))
    ]
    assert score == max(satisfied) == satisfied[index]
    held_out = cobs.unconstrained(len(d), cs)
    print("cobs:", e.provenance(index), "ARI", round(cobs.evaluate(d, e, index, cs), 3),
          "on", len(held_out), "instances")

    labels = d.labels
    a = e.assignment(index)
    try:
        from sklearn.metrics import adjusted_rand_score
    except ImportError:
        adjusted_rand_score = None
    if adjusted_rand_score is not None:
        assert abs(cobs.ari(a, labels) - adjusted_rand_score(labels, a)) < 1e-12

    s = cobs.ActiveSession(e, budget=10, sample_size=200, seed=1)
    pair = s.next_query()
    s.answer(*pair, labels[pair[0]] == labels[pair[1]])
    s.run_labels(labels)
    assert s.used == 10 and s.is_finished() and s.next_query() is None
    assert s.weights[s.result()] == max(s.weights)
    print("active:", e.provenance(s.result()), "after", s.used, "answers")

    k_index, sil = cobs.silhouette_select(d, e)
    assert abs(cobs.silhouette(d, e.assignment(k_index)) - sil) < 1e-12
    print("silhouette:", e.provenance(k_index), round(sil, 3))
    print("ok")


if __name__ == "__main__":
    sys.exit(main())
