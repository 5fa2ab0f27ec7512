"""JSON experiment configs: schema, parsing into a TrainingConfig, and back."""

from __future__ import annotations

import json

import jsonschema

from .aggregation import AggregationRule, RuleKind
from .attacks import AttackKind, AttackSpec, Placement
from .errors import ConstraintError, InvalidInputError
from .training import (
    DataSource,
    GaussianBlobs,
    LossKind,
    MnistIdx,
    ModelSpec,
    QuadraticNoise,
    TrainingConfig,
)

_INT = {"type": "integer"}
_NUM = {"type": "number"}


def _section(properties: dict, required=()) -> dict:
    return {"type": "object", "properties": properties, "required": list(required), "additionalProperties": False}


SCHEMA = _section(
    {
        "model": _section(
            {
                "kind": {"enum": [k.value for k in LossKind]},
                "dim": {"type": "integer", "minimum": 1},
                "hidden": {"type": "integer", "minimum": 1},
                "init_scale": _NUM,
            },
            required=["kind"],
        ),
        "data": {
            "oneOf": [
                _section(
                    {
                        "kind": {"const": "quadratic"},
                        "variance": {"type": "number", "minimum": 0},
                        "batch_size": {"type": "integer", "minimum": 1},
                    },
                    required=["kind"],
                ),
                _section(
                    {
                        "kind": {"const": "blobs"},
                        "classes": {"type": "integer", "minimum": 2},
                        "features": {"type": "integer", "minimum": 1},
                        "spread": {"type": "number", "minimum": 0},
                        "separation": {"type": "number", "minimum": 0},
                        "seed": _INT,
                        "batch_size": {"type": "integer", "minimum": 1},
                        "test_size": {"type": "integer", "minimum": 1},
                        "eval_size": {"type": "integer", "minimum": 1},
                    },
                    required=["kind"],
                ),
                _section(
                    {
                        "kind": {"const": "mnist"},
                        "path": {"type": "string"},
                        "batch_size": {"type": "integer", "minimum": 1},
                        "test_size": {"type": "integer", "minimum": 1},
                        "eval_size": {"type": "integer", "minimum": 1},
                    },
                    required=["kind", "path"],
                ),
            ]
        },
        "rule": _section(
            {
                "kind": {"enum": [k.value for k in RuleKind]},
                "q": {"type": "integer", "minimum": 0},
                "b": {"type": "integer", "minimum": 0},
                "c": {"type": ["integer", "null"], "minimum": 1},
                "strict": {"type": "boolean"},
            },
            required=["kind"],
        ),
        "attack": _section(
            {
                "kind": {"enum": [k.value for k in AttackKind]},
                "placement": {"enum": [p.value for p in Placement] + [None]},
                "q": {"type": ["integer", "null"], "minimum": 0},
                "sigma": {"type": "number", "minimum": 0},
                "scale": _NUM,
                "bit_positions": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 32}},
                "bit_order": {"enum": ["lsb", "msb"]},
                "affected_dims": {"type": "integer", "minimum": 0},
                "flip_prob": {"type": "number", "minimum": 0, "maximum": 1},
                "gambler_factor": _NUM,
                "shard_count": {"type": "integer", "minimum": 1},
                "target_shard": {"type": "integer", "minimum": 0},
                "rows": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 0}},
                "random_rows": {"type": "boolean"},
                "seed": _INT,
            },
            required=["kind"],
        ),
        "run": _section(
            {
                "workers": {"type": "integer", "minimum": 1},
                "rounds": {"type": "integer", "minimum": 1},
                "gamma": {"type": "number", "exclusiveMinimum": 0},
                "seed": _INT,
                "eval_every": {"type": "integer", "minimum": 1},
                "output_path": {"type": ["string", "null"]},
                "record_timing": {"type": "boolean"},
            },
        ),
    },
    required=["model", "data", "rule", "attack", "run"],
)


class ExperimentConfig:
    """A parsed config file: the training config plus where to write metrics."""

    def __init__(self, training: TrainingConfig, output_path: str | None = None):
        self.training = training
        self.output_path = output_path

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and to_dict(self) == to_dict(other)


def _data_from_dict(d: dict, model: ModelSpec) -> DataSource:
    d = dict(d)
    kind = d.pop("kind")
    sizes = {k: d.pop(k) for k in ("batch_size", "test_size", "eval_size") if k in d}
    if kind == "quadratic":
        gen = QuadraticNoise(variance=d.get("variance", 1.0), dim=model.dim)
    elif kind == "blobs":
        gen = GaussianBlobs(**d)
    else:
        gen = MnistIdx(path=d["path"])
    return DataSource(gen, **sizes)


def from_dict(doc: dict) -> ExperimentConfig:
    """Validate ``doc`` against :data:`SCHEMA` and build the config."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InvalidInputError(f"config invalid at {where}: {exc.message}") from exc
    try:
        return _build(doc)
    except ConstraintError as exc:
        raise InvalidInputError(f"config invalid: {exc}") from exc


def _build(doc: dict) -> ExperimentConfig:
    model = ModelSpec(**doc["model"])
    data = _data_from_dict(doc["data"], model)
    rule = AggregationRule(**doc["rule"])
    attack_doc = dict(doc["attack"])
    if "bit_positions" in attack_doc:
        attack_doc["bit_positions"] = tuple(attack_doc["bit_positions"])
    if attack_doc.get("rows") is not None:
        attack_doc["rows"] = tuple(attack_doc["rows"])
    attack = AttackSpec(**attack_doc)
    run = dict(doc["run"])
    output_path = run.pop("output_path", None)
    training = TrainingConfig(rule=rule, attack=attack, model=model, data=data, **run)
    return ExperimentConfig(training, output_path)


def _data_to_dict(source: DataSource) -> dict:
    gen = source.generator
    if isinstance(gen, QuadraticNoise):
        return {"kind": "quadratic", "variance": gen.variance, "batch_size": source.batch_size}
    out = {"kind": gen.kind}
    if isinstance(gen, GaussianBlobs):
        out.update(classes=gen.classes, features=gen.features, spread=gen.spread,
                   separation=gen.separation, seed=gen.seed)
    else:
        out["path"] = gen.path
    out.update(batch_size=source.batch_size, test_size=source.test_size, eval_size=source.eval_size)
    return out


def to_dict(config: ExperimentConfig) -> dict:
    """Fully explicit document (every default filled in) that parses back to ``config``."""
    t = config.training
    a = t.attack
    return {
        "model": {"kind": t.model.kind.value, "dim": t.model.dim, "hidden": t.model.hidden,
                  "init_scale": t.model.init_scale},
        "data": _data_to_dict(t.data),
        "rule": {"kind": t.rule.kind.value, "q": t.rule.q, "b": t.rule.b, "c": t.rule.c, "strict": t.rule.strict},
        "attack": {
            "kind": a.kind.value,
            "placement": None if a.placement is None else a.placement.value,
            "q": a.q,
            "sigma": a.sigma,
            "scale": a.scale,
            "bit_positions": list(a.bit_positions),
            "bit_order": a.bit_order,
            "affected_dims": a.affected_dims,
            "flip_prob": a.flip_prob,
            "gambler_factor": a.gambler_factor,
            "shard_count": a.shard_count,
            "target_shard": a.target_shard,
            "rows": None if a.rows is None else list(a.rows),
            "random_rows": a.random_rows,
            "seed": a.seed,
        },
        "run": {"workers": t.workers, "rounds": t.rounds, "gamma": t.gamma, "seed": t.seed,
                "eval_every": t.eval_every, "output_path": config.output_path,
                "record_timing": t.record_timing},
    }


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    return from_dict(doc)
