"""Uniform result records for identity verifiers.

Every verifier returns an :class:`IdentityReport` carrying both sides of the
identity it checked, the gaps, and a PASS/FAIL/INFEASIBLE status; the record
serializes to deterministic JSON (non-finite floats become strings so the
output stays strictly valid JSON).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

PASS = "PASS"
FAIL = "FAIL"
INFEASIBLE = "INFEASIBLE"


@dataclass
class IdentityReport:
    identity: str
    params: dict
    lhs: float
    rhs: float
    abs_gap: float
    rel_gap: float
    status: str
    tol: float
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status in (PASS, INFEASIBLE)

    def to_dict(self) -> dict:
        return {
            "identity": self.identity,
            "params": _jsonable(self.params),
            "lhs": _jsonable(self.lhs),
            "rhs": _jsonable(self.rhs),
            "abs_gap": _jsonable(self.abs_gap),
            "rel_gap": _jsonable(self.rel_gap),
            "status": self.status,
            "tol": self.tol,
            "notes": _jsonable(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _jsonable(value):
    """Recursively replace non-finite floats by strings; keep JSON valid."""
    if isinstance(value, float):
        if math.isfinite(value):
            return value
        return repr(value)  # 'inf', '-inf', 'nan'
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "to_dict"):
        return _jsonable(value.to_dict())
    return value


def compare(identity: str, params: dict, lhs: float, rhs: float, tol: float,
            notes: dict | None = None) -> IdentityReport:
    """Two-sided comparison at a relative tolerance.

    The gap is normalized by max(1, |lhs|, |rhs|) so that near-zero values
    are judged absolutely.  Both sides at -inf means the configuration is
    infeasible and the identity holds trivially.
    """
    notes = dict(notes or {})
    if lhs == -math.inf and rhs == -math.inf:
        return IdentityReport(identity, params, lhs, rhs, 0.0, 0.0, INFEASIBLE, tol, notes)
    abs_gap = abs(lhs - rhs)
    rel_gap = abs_gap / max(1.0, abs(lhs), abs(rhs))
    status = PASS if rel_gap <= tol else FAIL
    return IdentityReport(identity, params, lhs, rhs, abs_gap, rel_gap, status, tol, notes)


def check_nonnegative(identity: str, params: dict, slack: float, tol: float,
                      notes: dict | None = None) -> IdentityReport:
    """One-sided check: PASS iff slack >= -tol (absolute)."""
    notes = dict(notes or {})
    status = PASS if slack >= -tol else FAIL
    gap = max(0.0, -slack)
    return IdentityReport(identity, params, slack, 0.0, gap, gap, status, tol, notes)
