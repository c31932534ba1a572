"""Published JSON schemas for the CLI output formats.

Every command's JSON payload validates against its schema here; the test
suite enforces this on real outputs.
"""

from __future__ import annotations

_NUMBER_ARRAY = {"type": "array", "items": {"type": "number"}}

FIT_SCHEMA = {
    "type": "object",
    "required": ["command", "family", "penalty_kind", "method", "group_verdict",
                 "group_classification", "u", "reduced", "kkt_residual",
                 "fenchel_gap", "converged", "seed"],
    "properties": {
        "command": {"const": "fit"},
        "family": {"enum": ["gaussian", "bernoulli", "poisson", "spherical-power"]},
        "penalty_kind": {"type": "string"},
        "method": {"enum": ["taut-string", "pava", "soft-threshold", "dual-cd"]},
        "group_verdict": {"enum": ["finite", "infinite", "undetermined"]},
        "group_classification": {"type": "string"},
        "u": _NUMBER_ARRAY,
        "reduced": {"oneOf": [_NUMBER_ARRAY, {"type": "null"}]},
        "kkt_residual": {"type": "number"},
        "fenchel_gap": {"type": "number"},
        "converged": {"type": "boolean"},
        "sweeps": {"type": "integer"},
        "zero_pattern": {"type": "array", "items": {"type": "integer"}},
        "boundary_coordinates": {"type": "array", "items": {"type": "integer"}},
        "seed": {"type": "integer"},
    },
    "additionalProperties": False,
}

GROUP_SCHEMA = {
    "type": "object",
    "required": ["command", "verdict", "classification", "order", "angle_table",
                 "penalty"],
    "properties": {
        "command": {"const": "analyze-group"},
        "verdict": {"enum": ["finite", "infinite", "undetermined"]},
        "classification": {"type": "string"},
        "order": {"oneOf": [{"type": "integer"}, {"type": "null"}]},
        "angle_table": {"type": "array", "items": _NUMBER_ARRAY},
        "elements": {"type": "array",
                     "items": {"type": "array", "items": _NUMBER_ARRAY}},
        "irrational_pair": {"type": "array", "items": {"type": "integer"}},
        "irrational_cosine": {"type": "number"},
        "penalty": {"type": "object"},
    },
    "additionalProperties": False,
}

PROX_SCHEMA = {
    "type": "object",
    "required": ["command", "method", "fit"],
    "properties": {
        "command": {"const": "prox"},
        "method": {"enum": ["taut-string", "pava", "soft-threshold", "dual-cd"]},
        "fit": _NUMBER_ARRAY,
        "kkt_residual": {"type": "number"},
        "sweeps": {"type": "integer"},
        "converged": {"type": "boolean"},
    },
    "additionalProperties": False,
}

VERIFY_SCHEMA = {
    "type": "object",
    "required": ["command", "all_passed", "checks", "seeds"],
    "properties": {
        "command": {"const": "verify"},
        "all_passed": {"type": "boolean"},
        "seeds": {"type": "array", "items": {"type": "integer"}},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "passed", "detail"],
                "properties": {
                    "name": {"type": "string"},
                    "passed": {"type": "boolean"},
                    "detail": {"type": "string"},
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

SCHEMAS = {
    "fit": FIT_SCHEMA,
    "analyze-group": GROUP_SCHEMA,
    "prox": PROX_SCHEMA,
    "verify": VERIFY_SCHEMA,
}


def schema_for(command: str) -> dict:
    return SCHEMAS[command]
