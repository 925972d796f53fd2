"""JSON experiment configuration: schema validation, defaults and object construction."""

from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, WdroError
from .experiments import GroundTruth, Setup, load_dataset
from .losses import KINDS, LossFamily
from .regularized import KERNEL_KINDS, ReferenceKernel, RegParams, kernel_moments
from .space import SampleSpace, TransportCost, grid_points

_NUM = {"type": "number"}
_EXT = {"anyOf": [{"type": "number"}, {"enum": ["inf", "Infinity"]}]}
_POS_INT = {"type": "integer", "minimum": 1}
_INTERVAL = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_NUM_LIST = {"type": "array", "items": _NUM, "minItems": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj({
    "space": _obj({
        "boxes": {"type": "array", "items": _INTERVAL},
        "alphabets": {"type": "array", "items": _POS_INT},
        "grid_resolution": {"type": "integer", "minimum": 2},
    }, ["boxes"]),
    "cost": _obj({"p_norm": _EXT, "power_q": _NUM, "label_weight_kappa": _EXT, "label_power": _NUM}),
    "family": _obj({
        "kind": {"enum": [k for k in KINDS if k != "custom"]},
        "theta_box": {"type": "array", "items": _INTERVAL},
        "theta_grid_resolution": _POS_INT,
        "kmeans_clusters": _POS_INT,
        "tables": {"type": "array", "items": _NUM_LIST},
        "tables_path": {"type": "string"},
    }, ["kind"]),
    "kernel": _obj({
        "kind": {"enum": list(KERNEL_KINDS)},
        "scale": _NUM,
        "quadrature_nodes": {"type": "integer", "minimum": 2},
        "keep_labels": {"type": "boolean"},
    }),
    "reg": _obj({"tau": _NUM, "epsilon": _NUM}),
    "ground_truth": _obj({
        "kind": {"enum": ["uniform_box", "truncated_gaussian", "label_mixture", "dataset"]},
        "mean": {"type": "array", "items": _NUM},
        "sigma": _NUM,
        "class_means": {"type": "array", "items": {"type": "array", "items": _NUM}},
        "class_probs": _NUM_LIST,
        "path": {"type": "string"},
        "replace": {"type": "boolean"},
    }, ["kind"]),
    "solver": _obj({"tol": {"type": "number", "exclusiveMinimum": 0},
                    "tie_tol": {"anyOf": [{"type": "number", "minimum": 0}, {"type": "null"}]}}),
    "rho": {"type": "number", "minimum": 0},
    "rhos": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
    "n": _POS_INT,
    "n_list": {"type": "array", "items": _POS_INT, "minItems": 1},
    "trials": _POS_INT,
    "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "output_dir": {"type": "string"},
    "target": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    "lambda_grid": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
    "lambda_low": {"type": "number", "exclusiveMinimum": 0},
    "mu_points": _POS_INT,
    "rho_cap": {"type": "number", "exclusiveMinimum": 0},
}, ["space", "cost", "family", "ground_truth"])

DEFAULTS = {
    "space": {"alphabets": [], "grid_resolution": 41},
    "cost": {"p_norm": 2.0, "power_q": 2.0, "label_weight_kappa": 1.0, "label_power": 1.0},
    "family": {"theta_box": [], "theta_grid_resolution": 1, "kmeans_clusters": 1},
    "kernel": {"quadrature_nodes": 41, "keep_labels": True},
    "reg": {"tau": 0.0, "epsilon": 0.1},
    "ground_truth": {"replace": True},
    "solver": {"tol": 1e-8, "tie_tol": None},
    "trials": 200,
    "delta": 0.05,
    "master_seed": 0,
    "output_dir": "wdrocert-out",
    "target": 0.9,
    "mu_points": 32,
}

SECTIONS = ("space", "cost", "family", "kernel", "reg", "ground_truth", "solver")


def _ext(v) -> float:
    return math.inf if isinstance(v, str) else float(v)


@dataclass(frozen=True)
class ExperimentConfig:
    space: dict
    cost: dict
    family: dict
    ground_truth: dict
    solver: dict
    kernel: dict | None = None
    reg: dict | None = None
    rho: float | None = None
    rhos: list | None = None
    n: int | None = None
    n_list: list | None = None
    trials: int = 200
    delta: float = 0.05
    master_seed: int = 0
    output_dir: str = "wdrocert-out"
    target: float = 0.9
    lambda_grid: list | None = None
    lambda_low: float | None = None
    mu_points: int = 32
    rho_cap: float | None = None
    _objects: dict = field(default_factory=dict, compare=False, repr=False)

    # -- serialization
    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            if name.startswith("_"):
                continue
            v = getattr(self, name)
            if v is not None:
                out[name] = copy.deepcopy(v)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    # -- derived values
    @property
    def rho_values(self) -> list[float]:
        vals = list(self.rhos or [])
        if self.rho is not None and self.rho not in vals:
            vals = [self.rho] + vals
        return [float(v) for v in vals]

    @property
    def n_values(self) -> list[int]:
        vals = list(self.n_list or [])
        if self.n is not None and self.n not in vals:
            vals = [self.n] + vals
        return vals

    @property
    def tol(self) -> float:
        return float(self.solver["tol"])

    @property
    def tie_tol(self) -> float | None:
        return self.solver.get("tie_tol")

    # -- objects
    def _cached(self, key, build):
        if key not in self._objects:
            self._objects[key] = build()
        return self._objects[key]

    def build_space(self) -> SampleSpace:
        s = self.space
        return self._cached("space", lambda: SampleSpace(
            tuple(tuple(b) for b in s["boxes"]), tuple(s["alphabets"]), s["grid_resolution"]))

    def build_cost(self) -> TransportCost:
        c = self.cost
        return self._cached("cost", lambda: TransportCost(
            _ext(c["p_norm"]), c["power_q"], _ext(c["label_weight_kappa"]), c["label_power"]))

    def build_family(self) -> LossFamily:
        return self._cached("family", self._family)

    def _family(self) -> LossFamily:
        f = self.family
        if f["kind"] == "tabulated":
            tables = f.get("tables")
            if tables is None:
                tables = _read_tables(f["tables_path"], len(grid_points(self.build_space())))
            return LossFamily("tabulated", tables=np.asarray(tables, dtype=float), table_space=self.build_space())
        return LossFamily(f["kind"], tuple(tuple(b) for b in f["theta_box"]), f["theta_grid_resolution"],
                          f["kmeans_clusters"])

    def build_kernel(self) -> ReferenceKernel | None:
        if self.kernel is None and self.reg is None:
            return None
        return self._cached("kernel", self._kernel)

    def _kernel(self) -> ReferenceKernel:
        k = dict(self.kernel or DEFAULTS["kernel"])
        default = ReferenceKernel.default_for(self.build_space(), k.get("quadrature_nodes", 41))
        return ReferenceKernel(k.get("kind", default.kind), k.get("scale", default.scale),
                               k.get("quadrature_nodes", 41), k.get("keep_labels", True))

    def build_reg(self) -> RegParams | None:
        if self.reg is None:
            return None
        return RegParams(self.reg["tau"], self.reg["epsilon"])

    def build_truth(self) -> GroundTruth:
        return self._cached("truth", self._truth)

    def _truth(self) -> GroundTruth:
        g = self.ground_truth
        sp = self.build_space()
        data = load_dataset(g["path"], sp) if g["kind"] == "dataset" else None
        return GroundTruth(g["kind"], sp, tuple(g.get("mean", ())), g.get("sigma", 1.0),
                           tuple(map(tuple, g.get("class_means", ()))), tuple(g.get("class_probs", ())),
                           data, g.get("replace", True))

    def build_setup(self) -> Setup:
        return self._cached("setup", lambda: Setup(
            self.build_space(), self.build_cost(), self.build_family(), self.build_truth(), self.tol,
            self.build_kernel(), self.build_reg()))


def _read_tables(path, n_nodes: int) -> np.ndarray:
    """Rows ``theta_index, xi_index, value`` (header optional) into a (T, nodes) table."""
    entries = []
    with Path(path).open(newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                entries.append((int(row[0]), int(row[1]), float(row[2])))
            except ValueError:
                if k == 0:
                    continue
                raise ConfigError(f"bad table row {k + 1}: {row}", "family.tables_path")
    if not entries:
        raise ConfigError("empty table file", "family.tables_path")
    T = max(e[0] for e in entries) + 1
    out = np.full((T, n_nodes), np.nan)
    for t, j, v in entries:
        if not 0 <= j < n_nodes:
            raise ConfigError(f"xi index {j} outside the grid of {n_nodes} points", "family.tables_path")
        out[t, j] = v
    if np.isnan(out).any():
        raise ConfigError("table does not cover every (theta, grid point) pair", "family.tables_path")
    return out


def _fill_defaults(raw: dict) -> dict:
    d = copy.deepcopy(raw)
    for key, default in DEFAULTS.items():
        if isinstance(default, dict):
            if key in ("kernel", "reg") and key not in d:
                continue
            merged = copy.deepcopy(default)
            merged.update(d.get(key, {}))
            d[key] = merged
        else:
            d.setdefault(key, default)
    return d


def _resolve(path: str, base: Path, where: str) -> str:
    p = Path(path)
    if not p.is_absolute():
        p = (base / p).resolve()
    if not p.exists():
        raise ConfigError(f"file not found: {p}", where)
    return str(p)


def parse_dict(raw: dict, base_dir: Path | str = ".") -> ExperimentConfig:
    """Validate ``raw`` against the schema, fill defaults and build a config."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        if e.validator == "additionalProperties":
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            raise ConfigError(f"unknown key(s) {', '.join(map(repr, extra))}", where)
        raise ConfigError(e.message, where)
    d = _fill_defaults(raw)
    base = Path(base_dir)
    fam = d["family"]
    if fam["kind"] == "tabulated":
        if ("tables" in fam) == ("tables_path" in fam):
            raise ConfigError("tabulated family needs exactly one of tables / tables_path", "family")
        if "tables_path" in fam:
            fam["tables_path"] = _resolve(fam["tables_path"], base, "family.tables_path")
    gt = d["ground_truth"]
    if gt["kind"] == "dataset":
        if "path" not in gt:
            raise ConfigError("dataset ground truth needs a path", "ground_truth.path")
        gt["path"] = _resolve(gt["path"], base, "ground_truth.path")
    fields = {k: d.get(k) for k in ExperimentConfig.__dataclass_fields__ if not k.startswith("_")}
    cfg = ExperimentConfig(**{k: v for k, v in fields.items() if v is not None})
    _validate_objects(cfg)
    return cfg


def _validate_objects(cfg: ExperimentConfig) -> None:
    for section, build in (("space", cfg.build_space), ("cost", cfg.build_cost), ("family", cfg.build_family),
                           ("ground_truth", cfg.build_truth), ("kernel", cfg.build_kernel),
                           ("reg", cfg.build_reg)):
        try:
            build()
        except ConfigError:
            raise
        except (WdroError, ValueError) as exc:
            raise ConfigError(str(exc), section) from exc
    if cfg.reg is not None and cfg.rho_values:
        m_c = kernel_moments(cfg.build_kernel(), cfg.build_cost(), cfg.build_space()).m_c
        for r in cfg.rho_values:
            if not r > m_c:
                raise ConfigError(
                    f"rho = {r} must exceed the conditional moment m_c = {m_c:.6g}; the regularized "
                    "dual needs rho > m_c for strong duality and a finite dual upper bound. Raise rho",
                    "rho" if cfg.rho == r else "rhos")


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", str(path)) from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", "<root>")
    return parse_dict(raw, path.parent)
