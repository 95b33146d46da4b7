#!/usr/bin/env python3
"""Regenerates the bundled system files in suite/ and their manifest."""

import json
import math
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "suite"


def mat(m):
    return [[float(v) for v in row] for row in np.atleast_2d(np.asarray(m, dtype=float))]


def write(name, breakpoints, a, b=None, epsilon=None, note=""):
    doc = {"format": 1, "name": name}
    if note:
        doc["note"] = note
    doc["breakpoints"] = [float(t) for t in breakpoints]
    doc["A"] = [mat(x) for x in a]
    if b is not None:
        doc["B"] = [mat(x) for x in b]
    if epsilon is not None:
        doc["epsilon"] = epsilon
    lines = []
    for key, value in doc.items():
        if key in ("A", "B"):
            body = ",\n".join("  " + json.dumps(m) for m in value)
            lines.append(f' "{key}": [\n{body}\n ]')
        else:
            lines.append(f" {json.dumps(key)}: {json.dumps(value)}")
    (OUT / f"{name}.json").write_text("{\n" + ",\n".join(lines) + "\n}\n")
    return f"{name}.json"


def oscillator(w, zeta):
    return [[0.0, 1.0], [-w * w, -2.0 * zeta * w]]


def rotating(t):
    c, s = math.cos(t), math.sin(t)
    return [[-1 + 1.5 * c * c, 1 - 1.5 * s * c], [-1 - 1.5 * s * c, -1 + 1.5 * s * s]]


def main():
    OUT.mkdir(exist_ok=True)
    entries = []

    def add(file, nominal, **extra):
        entries.append({"file": file, "nominal": nominal, **extra})

    add(write("scalar_stable", [0, 1], [-1, -2], epsilon=0.1), "feasible")
    add(write("scalar_unstable", [0], [1], epsilon=0.1), "infeasible")
    add(write("scalar_uncertain", [0, 1], [-1, -1], b=[0.5, 0.5], epsilon=0.01), "feasible",
        margin={"min": 1.90, "max": 2.00})
    add(write("lti_stable", [0], [-np.eye(2)], epsilon=1.0), "feasible")

    t = np.linspace(0.0, 4.0, 5)
    w = 1.0 + 0.25 * t
    add(write("oscillator_varying", t, [oscillator(x, 0.6) for x in w],
              b=[0.2 * np.array([[0, 0], [-x * x, 0]]) for x in w]), "feasible", margin="found")

    t = np.linspace(0.0, 2.0, 9)
    a3, b3 = [], []
    for tk in t:
        th = 0.8 * tk
        rot = np.array([[0, th, 0], [-th, 0, 0.5], [0, -0.5, 0]])
        a3.append(-1.2 * np.eye(3) + rot + 0.3 * np.diag([math.sin(tk), 0, -math.sin(tk)]))
        b3.append(0.1 * np.ones((3, 3)))
    add(write("coupled3", t, a3, b=b3), "feasible", margin="found")

    t = np.linspace(0.0, 8.0, 17)
    a4 = []
    for tk in t:
        m = -np.eye(4) * (1.0 + 0.2 * math.cos(tk))
        for i in range(3):
            m[i, i + 1] = 0.8 * math.sin(0.5 * tk + i)
        a4.append(m)
    add(write("chain4", t, a4), "feasible")

    # open-loop unstable plant, time-varying PD feedback as the uncertain input path
    t = np.linspace(0.0, 3.0, 4)
    plant = np.array([[0.0, 1.0], [0.5, 0.0]])
    kp = 2.0 + 0.5 * np.sin(t)
    kd = 1.8 + 0.2 * np.cos(t)
    add(write("closed_loop", t, [plant] * len(t),
              b=[np.array([[0, 0], [-p, -d]]) for p, d in zip(kp, kd)],
              note="open-loop plant is unstable; A + B is the stabilised loop"), "infeasible",
        closed_loop_nominal="feasible", margin="none")

    t = np.linspace(0.0, 2.0, 3)
    add(write("b_zero", t, [oscillator(1.0 + 0.5 * x, 0.7) for x in t],
              b=[np.zeros((2, 2))] * len(t)), "feasible", uncertainty_inactive=True)

    add(write("unstable_endpoint", [0, 1, 2], [-np.eye(2), -0.5 * np.eye(2), [[0.1, 1.0], [0.0, -1.0]]]),
        "infeasible")

    period, per_period, periods = 2.0 * math.pi, 32, 4
    t = np.linspace(0.0, periods * period, periods * per_period + 1)
    add(write("rotating_counterexample", t, [rotating(x) for x in t],
              note="piecewise-linear sampling of a frozen-time stable but unstable LTV system"),
        "infeasible", frozen_stable=True, grows=True)

    manifest = {"format": 1, "systems": entries}
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


if __name__ == "__main__":
    main()
