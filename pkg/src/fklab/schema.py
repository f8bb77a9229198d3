"""JSON Schema (draft 2020-12) for destruction certificates as written by `fklab destroy`."""

INTEGER_TEXT = r"^[+-]?\d+(\*\d+\^\d+)?([+-]\d+(\*\d+\^\d+)?)*$"
REAL_TEXT = r"^[^/]+(/[^/]+)?$"

_check = {
    "type": "object",
    "required": ["name", "lhs", "relation", "rhs", "pass", "kind", "scale_mode"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "lhs": {"type": "string"},
        "relation": {"enum": ["<", "<=", "==", ">=", ">"]},
        "rhs": {"type": "string"},
        "pass": {"type": "boolean"},
        "kind": {"enum": ["exact", "certified", "float"]},
        "scale_mode": {"enum": ["exact", "relaxed"]},
        "exact_scale_pass": {"type": "boolean"},
        "lhs_log10": {"type": ["number", "null"]},
        "rhs_log10": {"type": ["number", "null"]},
        "note": {"type": "string"},
    },
}

_int_text = {"type": "string", "pattern": INTEGER_TEXT}
_real_text = {"type": "string", "pattern": REAL_TEXT}

_params = {
    "type": "object",
    "required": ["omega", "gamma", "sigma", "tau", "p", "q", "candidate", "p_prime", "m", "p_tilde",
                 "q_tilde", "k", "r", "eps", "C", "C_k", "C_kr", "a", "N_range", "N", "relax"],
    "properties": {
        "omega": {"type": "string"},
        "p": _int_text, "q": _int_text, "p_prime": _int_text, "m": _int_text,
        "p_tilde": _int_text, "q_tilde": _int_text, "a": _int_text, "N": _int_text,
        "N_range": {"type": "array", "items": _int_text, "minItems": 2, "maxItems": 2},
        "gamma": _real_text, "sigma": _real_text, "tau": _real_text, "eps": _real_text,
        "C": _real_text, "C_k": _real_text, "C_kr": _real_text, "relax": _real_text,
        "k": {"type": "integer", "minimum": 2},
        "r": {"type": "integer", "minimum": 1},
        "candidate": {"type": "integer"},
    },
}

_bump = {
    "type": ["object", "null"],
    "required": ["xi_minus", "xi_plus", "eps", "k", "C_k"],
}

_probe = {
    "type": "object",
    "required": ["omega", "status"],
    "properties": {
        "status": {"enum": ["out-of-scope", "budget-exceeded", "hit", "no-hit", "no-converged-minimizer"]},
    },
}

CERTIFICATE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "destruction certificate",
    "type": "object",
    "required": ["mode", "family", "params", "stage1_bump", "stage2_bump", "xi", "eta_minus", "eta_plus",
                 "delta", "delta_expr", "checks", "probes", "control", "notes"],
    "properties": {
        "mode": {"type": "string", "pattern": r"^(exact|exact-constants|relaxed:.+)$"},
        "family": {"type": "object", "required": ["family"]},
        "params": _params,
        "stage1_bump": _bump,
        "stage2_bump": _bump,
        "xi": {"type": ["string", "null"]},
        "eta_minus": {"type": ["string", "null"]},
        "eta_plus": {"type": ["string", "null"]},
        "delta": _real_text,
        "delta_expr": {"type": "string"},
        "checks": {"type": "array", "items": _check},
        "probes": {"type": "array", "items": _probe},
        "control": {"type": "array", "items": _probe},
        "notes": {"type": "array", "items": {"type": "string"}},
        "y_min": {"type": ["object", "null"]},
    },
}
