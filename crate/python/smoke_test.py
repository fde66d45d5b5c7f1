"""Smoke test for the kshrink_py extension.

Build and install first:

    pip install --no-build-isolation -e crates/python
    python python/smoke_test.py
"""

import math

import kshrink_py as ks


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    model = ks.Model.table1([0.0] * 5, sigma2=2.0)
    assert (model.p, model.k, model.n) == (5, 5, 20)
    assert close(model.baseline_risk(), 5.0)

    t1 = model.theorem1()
    t2 = model.theorem2()
    assert close(t1["ratio"], 5.0)
    assert close(t1["phi_upper_theorem1"], 6 / 22)
    assert close(t2["psi_upper_theorem2"], 3 / 22)
    assert close(model.theorem3([1, 0, 0, 0, 0])["ratio"], t1["ratio"])
    assert close(model.solve_hb_a(), -7.72)

    # F -> infinity approaches the sup bound; small F gives factor 2.28/3.28.
    assert abs(ks.phi_hb(1e3, 1.0, 5, 5, 20, -7.72) - 3 / 22) < 1e-6
    assert abs(ks.phi_hb(1e-6, 1.0, 5, 5, 20, -7.72) / 1e-6 - 2.28 / 3.28) < 1e-4
    assert close(ks.pt_threshold(5, 5, 20, 0.05), ks.f_quantile(20, 20, 0.05))

    same = ks.Sample([[1.0, 2.0, 3.0, 4.0, 5.0]] * 5, 3.0)
    stats = ks.pooled_stats(model, same)
    assert stats["F"] < 1e-20
    for kind in ("PT", "EB", "HB"):
        est = ks.Estimator(model, {"kind": kind})
        out = est.estimate(model, same)
        assert all(close(a, b, 1e-10) for a, b in zip(out, [1, 2, 3, 4, 5])), kind
    hb = ks.Estimator(model, {"kind": "HB"})
    assert close(hb.config()["a"], -7.72)

    x = model.sample(7)
    eb = ks.Estimator(model, {"kind": "EB", "a0": 3 / 22}).estimate(model, x)
    assert len(eb) == 5 and all(math.isfinite(v) for v in eb)

    report = ks.simulate(
        model,
        [{"kind": "JS"}, {"kind": "EB", "a0": 3 / 22}, {"kind": "HEB"}],
        replications=4000,
        seed=1,
    )
    assert [e["estimator"] for e in report["estimators"]] == ["JS", "EB", "HEB"]
    again = ks.simulate(
        model,
        [{"kind": "JS"}, {"kind": "EB", "a0": 3 / 22}, {"kind": "HEB"}],
        replications=4000,
        seed=1,
    )
    assert report == again

    rows = ks.table1(replications=2000, seed=42)
    assert len(rows) == 11
    assert rows[0]["mean_config"] == "(0,0,0,0,0)"
    pt = [r["report"]["estimators"][0]["prial"] for r in rows[:4]]
    assert max(pt) - min(pt) <= 1e-9

    eye = [[1.0, 0.0], [0.0, 1.0]]
    gap = ks.lemma_in_gap([[1.0, 2.0], [0.5, -1.0]], [eye, eye])
    assert abs(gap) < 1e-12
    b, bound = ks.linear_bound_check([[1.0, 2.0], [0.5, -1.0], [0.0, 0.0]], [eye] * 3, eye, [1.0, -1.0, 0.5])
    assert b <= bound * (1 + 1e-12)

    try:
        ks.Model.scalar(3, 10, 1.0, [1.0], 1.0, [0.0])
    except ValueError:
        pass
    else:
        raise AssertionError("k = 1 accepted")
    try:
        ks.Estimator(model, {"kind": "NOPE"})
    except ValueError:
        pass
    else:
        raise AssertionError("unknown kind accepted")

    print("kshrink_py smoke test: ok")


if __name__ == "__main__":
    main()
