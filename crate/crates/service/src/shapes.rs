//! Published JSON shapes (JSON Schema documents) of every response body.

use serde_json::{json, Value};

fn label() -> Value {
    json!({"type": "integer", "enum": [0, 1]})
}

fn values() -> Value {
    json!({"type": "object", "additionalProperties": {"type": ["number", "string"]}})
}

fn counterfactual() -> Value {
    json!({
        "type": "object",
        "required": ["target", "distance", "changed", "label"],
        "properties": {
            "target": values(),
            "distance": {"type": "number", "minimum": 0},
            "changed": {"type": "array", "items": {"type": "string"}},
            "label": label(),
        },
    })
}

fn plan_step() -> Value {
    json!({
        "type": "object",
        "required": ["action", "cost", "probability", "state", "goal"],
        "properties": {
            "action": {"type": "string"},
            "class_tag": {"type": "string"},
            "cost": {"type": "number"},
            "probability": {"type": "number", "minimum": 0, "maximum": 1},
            "state": {"type": "string"},
            "goal": {"type": "boolean"},
        },
    })
}

fn history_entry() -> Value {
    json!({
        "type": "object",
        "required": ["timestamp", "changes", "result_digest"],
        "properties": {
            "timestamp": {"type": "integer", "minimum": 0},
            "changes": values(),
            "result_digest": {"type": "string"},
        },
    })
}

fn prediction_props() -> Value {
    json!({
        "label": label(),
        "decision": {"type": "string", "enum": ["approve", "deny"]},
        "probability": {"type": "number", "minimum": 0, "maximum": 1},
        "logit": {"type": "number"},
        "model": {"type": "string"},
    })
}

pub fn session() -> Value {
    json!({
        "type": "object",
        "required": ["id", "model", "profile", "history"],
        "properties": {
            "id": {"type": "string", "minLength": 1},
            "model": {"type": "string"},
            "profile": values(),
            "scenario": {"type": "string"},
            "customer": {"type": "string"},
            "history": {"type": "array", "items": history_entry()},
        },
    })
}

pub fn error() -> Value {
    json!({
        "type": "object",
        "required": ["error"],
        "additionalProperties": false,
        "properties": {
            "error": {
                "type": "object",
                "required": ["code", "message"],
                "properties": {"code": {"type": "string"}, "message": {"type": "string"}},
            },
        },
    })
}

pub fn predict() -> Value {
    json!({
        "type": "object",
        "required": ["label", "decision", "probability", "logit", "model"],
        "properties": prediction_props(),
    })
}

pub fn whatif() -> Value {
    let mut props = prediction_props();
    props["profile"] = values();
    props["committed"] = json!({"type": "boolean"});
    props["session"] = json!({"type": ["string", "null"]});
    props["history_len"] = json!({"type": ["integer", "null"], "minimum": 0});
    json!({
        "type": "object",
        "required": ["label", "decision", "probability", "logit", "model", "profile", "committed", "session", "history_len"],
        "properties": props,
    })
}

pub fn pdp() -> Value {
    json!({
        "type": "object",
        "required": ["feature", "threshold", "curve"],
        "properties": {
            "feature": {"type": "string"},
            "threshold": {"type": ["number", "null"]},
            "current": {"type": "number"},
            "curve": {
                "type": "array",
                "minItems": 2,
                "items": {
                    "type": "object",
                    "required": ["value", "probability", "label"],
                    "properties": {
                        "value": {"type": "number"},
                        "probability": {"type": "number", "minimum": 0, "maximum": 1},
                        "label": label(),
                    },
                },
            },
        },
    })
}

pub fn counterfactuals() -> Value {
    json!({
        "type": "object",
        "required": ["desired", "counterfactuals"],
        "properties": {
            "desired": label(),
            "counterfactuals": {"type": "array", "items": counterfactual()},
        },
    })
}

pub fn flipset() -> Value {
    json!({
        "type": "object",
        "required": ["desired", "flipset"],
        "properties": {
            "desired": label(),
            "flipset": {
                "oneOf": [
                    {"type": "null"},
                    {
                        "type": "object",
                        "required": ["deltas", "total_cost", "target", "label"],
                        "properties": {
                            "deltas": {"type": "object", "additionalProperties": {"type": "number"}},
                            "total_cost": {"type": "number", "minimum": 0},
                            "target": values(),
                            "label": label(),
                        },
                    },
                ],
            },
        },
    })
}

pub fn plan() -> Value {
    json!({
        "type": "object",
        "required": ["target", "solver", "seed", "states", "reachability", "expected_cost", "plan"],
        "properties": {
            "target": label(),
            "solver": {"type": "string"},
            "seed": {"type": "integer", "minimum": 0},
            "states": {"type": "integer", "minimum": 1},
            "reachability": {"type": "number", "minimum": 0, "maximum": 1},
            "expected_cost": {"type": ["number", "null"]},
            "plan": {"type": "array", "items": plan_step()},
        },
    })
}

pub fn explain() -> Value {
    json!({
        "type": "object",
        "required": ["introduction", "texts", "explanation"],
        "properties": {
            "introduction": {"type": "string"},
            "texts": {
                "type": "array",
                "minItems": 1,
                "maxItems": 3,
                "items": {
                    "type": "object",
                    "required": ["kind", "text", "word_count", "clauses"],
                    "properties": {
                        "kind": {"type": "string", "enum": ["non-directive", "directive-specific", "directive-generic"]},
                        "text": {"type": "string", "minLength": 1},
                        "word_count": {"type": "integer", "minimum": 1},
                        "clauses": {"type": "object"},
                    },
                },
            },
            "explanation": {
                "type": "object",
                "required": ["x", "counterfactual", "plan", "first_action", "reachability", "model", "y", "y_prime", "boundary", "unreachable", "provenance"],
                "properties": {
                    "x": values(),
                    "counterfactual": counterfactual(),
                    "plan": {"type": "array", "items": plan_step()},
                    "y": label(),
                    "y_prime": label(),
                    "boundary": {"type": "boolean"},
                    "unreachable": {"type": "boolean"},
                },
            },
        },
    })
}

/// Every shape by name.
pub fn all() -> Vec<(&'static str, Value)> {
    vec![
        ("predict", predict()),
        ("whatif", whatif()),
        ("pdp", pdp()),
        ("counterfactuals", counterfactuals()),
        ("flipset", flipset()),
        ("plan", plan()),
        ("explain", explain()),
        ("session", session()),
        ("error", error()),
    ]
}
