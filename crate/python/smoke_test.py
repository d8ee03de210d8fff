#!/usr/bin/env python3
"""Smoke test for the knotfield_py extension module.

Build and copy the module first (or use ./python/run_smoke.sh):

    cargo build --release -p knotfield-py
    cp target/release/libknotfield_py.so python/knotfield_py.so
    PYTHONPATH=python python3 python/smoke_test.py
"""

import math
import sys

import knotfield_py as kf


def check(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"{status}: {name}" + (f" ({detail})" if detail else ""))
    if not ok:
        sys.exit(1)


def main():
    # Closed-form helper.
    check(
        "circle axis closed form",
        abs(kf.circle_axis_potential(1.0) - 2 * math.pi / math.sqrt(2)) < 1e-14,
    )

    # Round unknot: geometry and field.
    unknot = kf.Knot.torus(1, 0, 1.0, 1.0)
    check("unknot label", unknot.label() == "unknot")
    check(
        "unknot arc length",
        abs(unknot.arc_length() - 2 * math.pi) < 1e-10,
        f"L = {unknot.arc_length():.12f}",
    )
    check(
        "unknot self distance is the diameter",
        abs(unknot.min_self_distance() - 2.0) < 1e-5,
    )

    sample = unknot.eval(0.0, 0.0, 0.0)
    check(
        "potential at circle center is 2*pi",
        abs(sample["phi"] - 2 * math.pi) < 1e-10,
        f"phi = {sample['phi']:.12f}",
    )
    hess = sample["hess"]
    trace = hess[0][0] + hess[1][1] + hess[2][2]
    check("Hessian is trace-free", abs(trace) < 1e-8)

    # Critical points and the full report.
    points = unknot.critical_points(grid=12)
    check("unknot has one finite critical point", len(points) == 1)
    check("it is an index-1 saddle at the origin",
          points[0]["index"] == 1 and max(abs(c) for c in points[0]["x"]) < 1e-6)

    report = unknot.report(grid=12)
    check("report m counts", report["m"] == [1, 1, 0, 0], str(report["m"]))
    check("report cp_found", report["cp_found"] == 2)
    check("bound cp >= 2t+2 holds with margin 0",
          report["bound_ok"] and report["margin"] == 0)
    check("one theta loop, both branches to the far field",
          report["arcs"]["theta"] == 1 and report["arcs"]["theta_far_ok"])

    # Trefoil: geometry-level checks only (the full report is slower).
    trefoil = kf.Knot.torus(2, 3, 2.0, 1.0)
    check("trefoil crossing upper bound >= 3",
          trefoil.crossing_upper_bound() >= 3,
          f"count = {trefoil.crossing_upper_bound()}")
    check("trefoil knot file round trip",
          kf.Knot.from_json('{ "kind": "torus", "p": 2, "q": 3, "R": 2.0, "r": 1.0 }').label()
          == "torus(2,3)")

    # Error surfaces.
    try:
        kf.Knot.torus(2, 4, 2.0, 1.0)
        check("gcd > 1 rejected", False)
    except ValueError as e:
        check("gcd > 1 rejected", "link" in str(e))

    print("smoke test OK")


if __name__ == "__main__":
    main()
