"""Smoke test for the duolift Python bindings.

Install first:  pip install --no-build-isolation -e crates/py
Then run:       python3 python/smoke_test.py
"""

import csv
import io
import math

import duolift


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL {what}")
    print(f"ok   {what}")


def main():
    p = duolift.Params.prototype()
    check(p.r1 == 600 and p.r2 == 18 and p.drum_radius == 0.04, "prototype ratios")
    caps = p.capabilities()
    check(caps["hf_max_force"] > 0, "capabilities dict")

    dv0, dw1 = duolift.full_dynamics(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    check(dv0 == 0.0 and dw1 == 0.0, "dynamics at rest")
    check(duolift.friction_torque(5.0, 200.0) == -duolift.friction_torque(-5.0, 200.0), "friction odd")

    th = duolift.fall_theoretical(68, a_d=1.0)
    check(abs(th["dist"] - 0.405) < 1e-9 and abs(th["force"] - 735.08) < 1e-6, "analytic fall row")

    sc = duolift.Scenario.full_trial(["seed=5"])
    check("seed = 5" in sc.effective_toml(), "override reaches effective config")
    res = sc.run()
    check(res.completed and len(res) > 0, "full trial runs")
    cols = res.columns()
    rows = list(csv.DictReader(io.StringIO(res.telemetry_csv())))
    check(len(rows) == len(res) == len(cols["t"]), "telemetry csv and columns agree")
    check(math.isclose(float(rows[-1]["x0"]), cols["x0"][-1], rel_tol=1e-8, abs_tol=1e-12), "csv values match")
    modes = [to for _, _, to in res.mode_log()]
    check("fall_prevention" in modes, "fall detected in full trial")
    check(res.summary()["termination"]["status"] == "completed", "summary dict")

    try:
        duolift.Scenario.load(overrides=["controller.F_wanted=3"])
    except duolift.DuoliftError as e:
        check("F_wanted" in str(e), "unknown key raises DuoliftError")
    else:
        check(False, "unknown key raises DuoliftError")

    rep = duolift.run_fall_test(68, a_d=2.0)
    check(rep["recovered"] and rep["simulated"]["dist"] < 0.40, "simulated fall arrested")

    design = duolift.compare_designs()
    check(design["selected"] == "dual_motor_brake", "design comparison")

    u, pval, exact = duolift.mann_whitney_u([1, 2, 3], [4, 5, 6])
    check(u == 0.0 and exact and abs(pval - 0.1) < 1e-12, "mann-whitney exact")

    truth = dict(b=6e-4, c=0.05, d=2e-4)
    w2, fd, tau = [], [], []
    for i in range(-10, 11):
        if i == 0:
            continue
        for f in (100.0, 300.0, 600.0):
            w = 12.0 * i
            w2.append(w)
            fd.append(f)
            tau.append((truth["b"] * abs(w) + truth["c"] + truth["d"] * f) * math.tanh(10.0 * w))
    fit = duolift.identify_friction(w2, fd, tau)
    got = fit["params"]
    check(
        fit["residual_rms"] < 1e-9 and abs(got["b_visc"] - truth["b"]) < 1e-9 and abs(got["dry_offset"] - truth["c"]) < 1e-9,
        "friction identification",
    )

    keys = duolift.config_keys()
    check(any(k == "controller.F_desired" for k, _, _ in keys), "config keys listed")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
