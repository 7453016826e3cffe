"""
Scenario files.

A scenario is a YAML mapping naming the metric, the net, the embedding,
the lattice and the sample budgets of one verification run.  Loading
fills in defaults, builds the geometric objects and checks every
precondition at once; all problems are reported together in a single
``ConfigurationError``.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np
import yaml

from ..directions import separation_epsilon
from ..errors import ConfigurationError, NetEmbedError
from ..gluedmap import round_constants
from ..manifold import GeodesicSolver, MetricField, make_metric
from ..netlattice import Box, Embedding, Lattice, Net, generate_net, load_net, make_embedding

logger = logging.getLogger(__name__)

SECTIONS: Dict[str, Dict[str, Any]] = {
    "metric": {},
    "net": {
        "epsilon_base": None,
        "delta": None,
        "jitter": 0.0,
        "seed": 0,
        "box": None,
        "file": None,
    },
    "embedding": {"mode": "pullback", "table": None},
    "lattice": {"epsilon": None},
    "solver": {
        "use_oracle": True,
        "bvp_tol": 1e-9,
        "restarts": 8,
        "max_newton": 25,
        "rtol": 1e-10,
        "atol": 1e-12,
        "seed": 0,
    },
    "budgets": {
        "audit_pairs": 1000,
        "oracle_pairs": 1000,
        "gamma_points": 100000,
        "round_samples": 10000,
        "condition_simplices": 4,
        "condition_samples": 1000,
        "face_pairs": 100,
        "face_points": 50,
        "gluing_points": 100,
        "continuity_samples": 100,
        "lower_bound_samples": 1000,
        "bracket_pairs": 200,
        "net_check_samples": 1000,
        "refinement_samples": 2000,
        "antipodal_samples": 500,
        "surjectivity_samples": 100,
        "surjectivity_cubes": 64,
    },
    "sampling": {
        "seed": 0,
        "radius": None,
        "net_check_half_width": 10.0,
        "audit_radius": 6.0,
    },
    "directions": {
        "enabled": True,
        "start": None,
        "growth": 2.0,
        "max_terms": 12,
        "tol": 1e-6,
        "resolution": 64,
        "base": None,
        "u": None,
        "v": None,
    },
    "degree": {"resolution": 10000, "level": 4, "radii": None},
    "audit": {"threshold": 1e-6, "expect_isometry": True},
}

METRIC_KEYS = {"family", "matrix", "terms", "linear", "quadratic"}
TOP_LEVEL = {"name", "dimension", "output_dir"} | set(SECTIONS)
REQUIRED = [("lattice", "epsilon")]


@dataclass
class Scenario:
    """A validated scenario with its geometric objects built."""

    name: str
    dimension: int
    cfg: Dict[str, Any]
    path: Optional[Path]
    output_dir: Path
    metric: MetricField
    net: Net
    embedding: Embedding
    lattice: Lattice
    solver: GeodesicSolver
    derived: Dict[str, float] = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return int(self.cfg["sampling"]["seed"])

    def section(self, name: str) -> Dict[str, Any]:
        return self.cfg[name]

    def echo(self) -> Dict[str, Any]:
        """JSON-ready description of the scenario and its derived constants."""
        return {
            "name": self.name,
            "dimension": self.dimension,
            "metric": self.metric.describe(),
            "net": self.net.describe(),
            "embedding": self.embedding.mode,
            "lattice_epsilon": self.lattice.epsilon,
            "derived": dict(self.derived),
        }


def _populate_defaults(cfg: Dict[str, Any]) -> None:
    for section, defaults in SECTIONS.items():
        current = cfg.setdefault(section, {})
        if current is None:
            current = cfg[section] = {}
        for key, value in defaults.items():
            current.setdefault(key, copy.deepcopy(value))
    cfg["metric"].setdefault("family", "flat")


def _unknown_keys(cfg: Mapping[str, Any]) -> List[str]:
    problems = [f"unknown key '{k}'" for k in cfg if k not in TOP_LEVEL]
    for section, defaults in SECTIONS.items():
        body = cfg.get(section)
        if body is None:
            continue
        if not isinstance(body, Mapping):
            problems.append(f"section '{section}' must be a mapping")
            continue
        allowed = METRIC_KEYS if section == "metric" else set(defaults)
        problems.extend(f"unknown key '{section}.{k}'" for k in body if k not in allowed)
    return problems


def load_scenario(
    path: Union[str, Path, None] = None,
    *,
    data: Optional[Mapping[str, Any]] = None,
    seed: Optional[int] = None,
    output_dir: Union[str, Path, None] = None,
) -> Scenario:
    """Read, complete and validate a scenario from ``path`` or an in-memory mapping."""
    src = Path(path) if path is not None else None
    if data is None:
        if src is None:
            raise ConfigurationError("either a scenario path or data is required")
        try:
            raw = yaml.safe_load(src.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigurationError(f"cannot read scenario {src}: {exc}") from exc
    else:
        raw = copy.deepcopy(dict(data))
    if not isinstance(raw, dict):
        raise ConfigurationError("scenario must be a mapping")

    problems = _unknown_keys(raw)
    for key in ("name", "dimension"):
        if key not in raw:
            problems.append(f"missing key '{key}'")
    for section, key in REQUIRED:
        if (raw.get(section) or {}).get(key) is None:
            problems.append(f"missing key '{section}.{key}'")
    net_raw = raw.get("net") or {}
    if net_raw.get("file") is None:
        for key in ("epsilon_base", "delta", "box"):
            if net_raw.get(key) is None:
                problems.append(f"missing key 'net.{key}'")
    if problems:
        raise ConfigurationError(problems)

    cfg: Dict[str, Any] = raw
    _populate_defaults(cfg)
    if seed is not None:
        cfg["sampling"]["seed"] = int(seed)
    base_dir = src.parent if src is not None else Path.cwd()
    name = str(cfg["name"])
    n = int(cfg["dimension"])
    if n not in (2, 3):
        problems.append(f"dimension must be 2 or 3, got {n}")
        raise ConfigurationError(problems)

    built: Dict[str, Any] = {}

    def attempt(label: str, factory: Any) -> None:
        try:
            built[label] = factory()
        except NetEmbedError as exc:
            problems.extend(getattr(exc, "problems", [str(exc)]))
        except (TypeError, ValueError, KeyError) as exc:
            problems.append(f"{label}: {exc}")

    net_cfg = cfg["net"]
    attempt("metric", lambda: make_metric(cfg["metric"], n))
    attempt("lattice", lambda: Lattice(float(cfg["lattice"]["epsilon"])))

    def build_net() -> Net:
        box = Box.from_config(net_cfg["box"], n) if net_cfg.get("box") is not None else None
        if net_cfg.get("file"):
            file_path = Path(str(net_cfg["file"]))
            return load_net(file_path if file_path.is_absolute() else base_dir / file_path, box)
        assert box is not None
        return generate_net(
            float(net_cfg["epsilon_base"]),
            float(net_cfg["delta"]),
            float(net_cfg["jitter"]),
            int(net_cfg["seed"]),
            box,
        )

    attempt("net", build_net)
    if "metric" in built:
        attempt("embedding", lambda: make_embedding(cfg["embedding"], built["metric"], base_dir))
        attempt("solver", lambda: GeodesicSolver.from_config(built["metric"], cfg["solver"]))
    if problems:
        raise ConfigurationError(problems)

    net: Net = built["net"]
    lattice: Lattice = built["lattice"]
    if net.dimension != n:
        problems.append(f"net dimension {net.dimension} does not match scenario dimension {n}")

    delta = net.delta
    r0, r1 = round_constants(n, lattice.epsilon, delta)
    delta_tilde = 2.0 * delta * n
    derived: Dict[str, float] = {"R0": r0, "R1": r1, "delta_tilde": delta_tilde}
    sampling = cfg["sampling"]
    if sampling["radius"] is None:
        sampling["radius"] = 3.0 * r1
    if cfg["degree"]["radii"] is None:
        cfg["degree"]["radii"] = [r1, 2.0 * r1]

    directions = cfg["directions"]
    if directions["base"] is None:
        directions["base"] = [0.0] * n
    if directions["u"] is None:
        directions["u"] = [1.0] + [0.0] * (n - 1)
    if directions["v"] is None:
        directions["v"] = [0.0, 1.0] + [0.0] * (n - 2)
    if directions["start"] is None:
        directions["start"] = 8.0 * max(r1, 1.0)
    horizon = 0.0
    if directions["enabled"]:
        try:
            u = np.asarray(directions["u"], dtype=float)
            v = np.asarray(directions["v"], dtype=float)
            eps = separation_epsilon(u / np.linalg.norm(u), v / np.linalg.norm(v))
            horizon = 6.0 * delta_tilde / eps
            derived.update(separation_epsilon=eps, T=horizon)
        except NetEmbedError as exc:
            problems.append(f"directions: {exc}")

    margin = max(r1, horizon) + lattice.epsilon * math.sqrt(n)
    derived["core_margin"] = margin
    derived["core_radius"] = net.box.inner_radius() - margin
    if cfg["audit"]["expect_isometry"]:
        needed = max(float(sampling["radius"]), max(float(r) for r in cfg["degree"]["radii"]))
        if derived["core_radius"] < needed:
            problems.append(
                f"net box inner radius {net.box.inner_radius():.3f} must exceed "
                f"max(R1, T) + eps*sqrt(n) = {margin:.3f} plus the sampling radius {needed:.3f}"
            )
    if problems:
        raise ConfigurationError(problems)

    out = Path(output_dir) if output_dir is not None else Path(str(cfg.get("output_dir") or f"results/{name}"))
    scenario = Scenario(
        name=name,
        dimension=n,
        cfg=cfg,
        path=src,
        output_dir=out,
        metric=built["metric"],
        net=net,
        embedding=built["embedding"],
        lattice=lattice,
        solver=built["solver"],
        derived=derived,
    )
    logger.info("loaded scenario %s (n=%d, R0=%.4f, R1=%.4f)", name, n, r0, r1)
    return scenario
