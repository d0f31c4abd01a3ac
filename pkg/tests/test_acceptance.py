"""The ten acceptance criteria at their pinned tolerances.

Each criterion runs the matching verification suite and prints one line
``ACCEPTANCE <n> <name> PASS|FAIL <seconds>s`` followed by its CHECK lines.
The lines are also repeated in pytest's terminal summary. Running this
file directly prints the same lines without pytest.
"""
import time

import pytest

from poroplate import verify

# (number, name, suite, wall-clock limit in seconds or None)
CRITERIA = [
    (1, "operator_identities", "operators", 1.0),
    (2, "coercivity", "coercivity", None),
    (3, "dense_oracle", "oracle", 5.0),
    (4, "qs_convergence", "qs_convergence", 60.0),
    (5, "energy_monotonicity", "energy", None),
    (6, "dissipativity", "dissipativity", None),
    (7, "weak_residual", "weak_residual", None),
    (8, "stability_band", "stability", None),
    (9, "initial_data_equivalence", "initial_data", None),
    (10, "translation_equivalence", "source_paths", None),
]

RESULTS = []


def evaluate(number, name, suite, limit):
    t0 = time.perf_counter()
    checks = verify.SUITES[suite]()
    elapsed = time.perf_counter() - t0
    ok = all(c.passed for c in checks) and (limit is None or elapsed < limit)
    head = f"ACCEPTANCE {number} {name} {'PASS' if ok else 'FAIL'} {elapsed:.2f}s"
    if limit is not None:
        head += f" (limit {limit:g}s)"
    lines = [head] + ["    " + c.line for c in checks]
    return ok, lines


@pytest.mark.parametrize("number,name,suite,limit", CRITERIA, ids=[c[1] for c in CRITERIA])
def test_acceptance(number, name, suite, limit):
    ok, lines = evaluate(number, name, suite, limit)
    RESULTS.append(lines)
    print("\n".join(lines))
    assert ok, "\n".join(lines)


if __name__ == "__main__":
    failed = 0
    for crit in CRITERIA:
        ok, lines = evaluate(*crit)
        failed += not ok
        print("\n".join(lines), flush=True)
    raise SystemExit(1 if failed else 0)
