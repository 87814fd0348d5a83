"""Acceptance gate: every golden value and property the artifact must hit,
one test per criterion, each printing its own pass/fail line.

Criterion 3 (the self-referential strip-edge scenario) is a known honest
failure: the literal fixed-point formulation optimizes to a shorter path than
the literature's reference value for that path class.  The analysis lives in
the project notes; the criterion is asserted as stated rather than weakened.
"""

import pytest

from escape_solver.verify import CHECKS

CRITERIA = [
    (1, "halfplane_unit"),
    (2, "point_unit"),
    (3, "zalgaller_class2"),
    (4, "circle_plus_segment"),
    (5, "circle_interior_nonunique"),
    (6, "strip_wf2"),
    (7, "monotone_refinement"),
    (8, "order_oracles"),
    (9, "gradient_correctness"),
    (10, "invariance_suite"),
    (11, "mtz_export"),
    (12, "closed_path"),
    (13, "opaque_circle_tangent"),
]


@pytest.mark.parametrize("num,name", CRITERIA, ids=[f"{n:02d}_{s}" for n, s in CRITERIA])
def test_acceptance(num, name):
    ok, detail = CHECKS[name]()
    print(f"\nACCEPTANCE {num:02d} {name}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"
