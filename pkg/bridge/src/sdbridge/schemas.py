"""Published JSON Schemas for every request and response on the wire.

Clients and conformance tests validate traffic against these; the field
names here are the protocol.
"""

_B64 = {"type": "string", "pattern": "^[A-Za-z0-9+/]+={0,2}$"}

HEALTH_RESPONSE = {
    "type": "object",
    "required": ["protocol_version", "latent_shape", "model_spec"],
    "properties": {
        "protocol_version": {"const": 1},
        "latent_shape": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 3,
            "maxItems": 3,
        },
        "model_spec": {"type": "string"},
    },
    "additionalProperties": False,
}

REGISTER_REQUEST = {
    "type": "object",
    "required": ["name", "text"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "text": {"type": "string", "minLength": 1},
        "negative": {"type": "boolean"},
    },
    "additionalProperties": False,
}

REGISTER_RESPONSE = {
    "type": "object",
    "required": ["ok"],
    "properties": {"ok": {"const": True}},
    "additionalProperties": False,
}

PREDICT_REQUEST = {
    "type": "object",
    "required": ["condition", "timestep", "adapters", "latent"],
    "properties": {
        "condition": {"type": "string", "minLength": 1},
        "timestep": {"type": "integer", "minimum": 1},
        "adapters": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "scale": {"type": "number"},
                },
                "additionalProperties": False,
            },
        },
        "latent": _B64,
    },
    "additionalProperties": False,
}

PREDICT_RESPONSE = {
    "type": "object",
    "required": ["eps"],
    "properties": {"eps": _B64},
    "additionalProperties": False,
}

ENCODE_REQUEST = {
    "type": "object",
    "required": ["image"],
    "properties": {"image": _B64},
    "additionalProperties": False,
}

ENCODE_RESPONSE = {
    "type": "object",
    "required": ["latent"],
    "properties": {"latent": _B64},
    "additionalProperties": False,
}

DECODE_REQUEST = {
    "type": "object",
    "required": ["latent"],
    "properties": {"latent": _B64},
    "additionalProperties": False,
}

DECODE_RESPONSE = {
    "type": "object",
    "required": ["image"],
    "properties": {"image": _B64},
    "additionalProperties": False,
}

ERROR_RESPONSE = {
    "type": "object",
    "required": ["detail"],
    "properties": {"detail": {"type": "string"}},
    "additionalProperties": False,
}
