#!/usr/bin/env python3
"""Smoke test for the Python bindings.

Builds the extension crate if needed, loads it, and exercises exact
Grassmann arithmetic, the coordinate bijection, the sewing solver, the
central-charge series, and the tangent bracket.
"""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    lib = None
    for profile in ("release", "debug"):
        cand = ROOT / "target" / profile / "libsupersew_py.so"
        if cand.exists():
            lib = cand
            break
    if lib is None:
        subprocess.run(
            ["cargo", "build", "-p", "supersew-py"], cwd=ROOT, check=True
        )
        lib = ROOT / "target" / "debug" / "libsupersew_py.so"
    tmp = Path(tempfile.mkdtemp(prefix="supersew_py_"))
    shutil.copy(lib, tmp / "supersew_py.so")
    sys.path.insert(0, str(tmp))
    import supersew_py

    return supersew_py


def sn(*terms):
    """Build the JSON form of a supernumber from (indices, re[, im]) tuples."""
    out = []
    for t in terms:
        rec = {"indices": list(t[0]), "re": t[1]}
        if len(t) > 2 and t[2] not in ("", "0"):
            rec["im"] = t[2]
        out.append(rec)
    return json.dumps(out)


def main():
    m = load_module()

    # anticommutation and nilpotency: z1*z2 = -(z2*z1), z1*z1 = 0
    z1 = sn(((1,), "1"))
    z2 = sn(((2,), "1"))
    z12 = json.loads(m.grassmann_arith(4, "mul", z1, z2))
    z21 = json.loads(m.grassmann_arith(4, "mul", z2, z1))
    assert z12 == [{"indices": [1, 2], "re": "1"}], z12
    assert z21 == [{"indices": [1, 2], "re": "-1"}], z21
    assert json.loads(m.grassmann_arith(4, "mul", z1, z1)) == []
    assert m.grassmann_parity(4, z1) == "odd"

    # exact inverse: (1 + z1 z2)^{-1} = 1 - z1 z2
    one_plus = sn(((), "1"), ((1, 2), "1"))
    inv = json.loads(m.grassmann_invert(4, one_plus))
    assert inv == [{"indices": [], "re": "1"}, {"indices": [1, 2], "re": "-1"}], inv

    # coordinate bijection round trip
    coords = json.dumps(
        {
            "asqrt": [{"indices": [], "re": "2"}],
            "A": {"1": [{"indices": [], "re": "1/2"}]},
            "M": {"3": [{"indices": (1,), "re": "1"}]},
        }
    )
    back = json.loads(m.coordinate_roundtrip(4, coords, 3))
    assert back["asqrt"] == [{"indices": [], "re": "2"}]
    assert back["A"]["1"] == [{"indices": [], "re": "1/2"}]
    assert back["M"]["3"] == [{"indices": [1], "re": "1"}]

    # sewing solver: vanishing second data gives the leading canonical value
    sew_input = json.dumps(
        {
            "caps": {
                "j_cap": 2,
                "d_a": 2,
                "d_b": 2,
                "window": [-8, 8],
                "grassmann_generators": 4,
            },
            "asqrt": [{"indices": [], "re": "1"}],
            "A": {"1": [{"indices": [], "re": "1/2"}]},
        }
    )
    sol = json.loads(m.solve_sewing(sew_input))
    assert sol["residual_is_zero"] is True
    assert sol["psi_by_doubled_index"]["2"]["1,0"] == [{"indices": [], "re": "-1/2"}]

    # central-charge series: A2 B2 only gives the (1,1)-cell value 1/2
    gamma_input = json.dumps(
        {
            "caps": {
                "j_cap": 2,
                "d_a": 2,
                "d_b": 2,
                "window": [-8, 8],
                "grassmann_generators": 4,
            },
            "asqrt": [{"indices": [], "re": "1"}],
            "A": {"2": [{"indices": [], "re": "1"}]},
            "B": {"2": [{"indices": [], "re": "1"}]},
        }
    )
    g = json.loads(m.gamma_series(gamma_input, "1/2", "0", 12))
    assert g["1,1"] == [{"indices": [], "re": "1/2"}], g

    # moduli sewing: the unit element is neutral
    caps = {
        "j_cap": 2,
        "d_a": 2,
        "d_b": 2,
        "window": [-8, 8],
        "grassmann_generators": 4,
    }
    unit = json.dumps(
        {
            "n": 1,
            "caps": caps,
            "punctures": [],
            "coord_inf": {},
            "coords": [{"asqrt": [{"indices": [], "re": "1"}], "A": {}, "M": {}}],
        }
    )
    q = json.dumps(
        {
            "n": 1,
            "caps": caps,
            "punctures": [],
            "coord_inf": {"A": {"2": [{"indices": [1, 2], "re": "1"}]}},
            "coords": [
                {
                    "asqrt": [{"indices": [], "re": "2"}],
                    "A": {"1": [{"indices": [1, 2], "re": "1/3"}]},
                    "M": {"3": [{"indices": [3], "re": "1"}]},
                }
            ],
        }
    )
    sewn = json.loads(m.sew_elements(q, 1, unit))
    assert sewn["coords"][0]["asqrt"] == [{"indices": [], "re": "2"}]
    assert sewn["coords"][0]["A"]["1"] == [{"indices": [1, 2], "re": "1/3"}]

    # tangent bracket: [G(1/2), G(-1/2)] = 2 L(0)
    rows = json.loads(m.tangent_bracket(1, 1, 1, -1, 2))
    assert rows == [
        {
            "kind": 0,
            "doubled_index": 0,
            "coefficient": [{"indices": [], "re": "2"}],
        }
    ], rows

    print("python bindings smoke test: all checks passed")


if __name__ == "__main__":
    main()
