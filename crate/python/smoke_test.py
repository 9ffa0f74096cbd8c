"""Smoke test for the compiled extension.

Build first:
    cargo build --release -p conewalk-python --features extension-module
then run:
    python3 python/smoke_test.py [path/to/lib_conewalk.so]
"""

import importlib.machinery
import importlib.util
import json
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load(path=None):
    if path is None:
        candidates = [ROOT / "target" / "release" / name for name in ("lib_conewalk.so", "lib_conewalk.dylib", "_conewalk.dll")]
        path = next((p for p in candidates if p.exists()), None)
        if path is None:
            sys.exit("extension not built; see the docstring")
    loader = importlib.machinery.ExtensionFileLoader("_conewalk", str(path))
    found = importlib.util.spec_from_loader("_conewalk", loader)
    module = importlib.util.module_from_spec(found)
    loader.exec_module(module)
    return module


def main():
    cw = load(sys.argv[1] if len(sys.argv) > 1 else None)

    flat = (ROOT / "scenarios" / "flat4.jsonl").read_text()
    r = cw.regions(flat, [0])
    xs = sorted(x for x, _ in r["static_polygon"])
    ys = sorted(y for _, y in r["static_polygon"])
    # A flat foot supports exactly its own rectangle.
    assert abs(xs[0] + 0.12) < 1e-9 and abs(xs[-1] - 0.12) < 1e-9, xs
    assert abs(ys[0] - 0.03) < 1e-9 and abs(ys[-1] - 0.17) < 1e-9, ys
    assert abs(r["area"] - 0.24 * 0.14) < 1e-9
    assert r["rest_inside"]

    done, trace = cw.simulate(flat)
    assert done
    assert cw.audit(trace) == []
    end = json.loads(trace.strip().splitlines()[-1])
    assert end["record"] == "end" and end["final_error"] < 0.02, end
    again = cw.simulate(flat)[1]
    assert again == trace, "untimed traces should repeat exactly"

    stairs = cw.staircase(seed=42, steps=10, tilt=0.3)
    assert len(stairs.strip().splitlines()) == 11
    done, _ = cw.simulate(stairs, friction=0.05)
    assert not done

    try:
        cw.simulate("not json")
    except ValueError:
        pass
    else:
        raise AssertionError("bad scenario accepted")

    print("python smoke test ok")


if __name__ == "__main__":
    main()
