"""Locating and loading the parking permit fixture pack.

Resolution order for the pack directory: explicit argument, the
PROCLINE_FIXTURES environment variable, an ancestor of the working
directory containing fixtures/parking-permit, and finally the repository
layout relative to this file (works for editable installs).
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from ..composer import ProductBundle, compose_product
from ..feature_model import Configuration, FeatureModel, parse_feature_model

ENV_VAR = "PROCLINE_FIXTURES"
PACK_NAME = "parking-permit"


def scenario_root(explicit: str | Path | None = None) -> Path:
    if explicit is not None:
        root = Path(explicit)
        if not root.is_dir():
            raise FileNotFoundError(f"fixture pack not found at {root}")
        return root
    env = os.environ.get(ENV_VAR)
    if env:
        root = Path(env)
        if not root.is_dir():
            raise FileNotFoundError(f"{ENV_VAR} points at {root}, which does not exist")
        return root
    probe = Path.cwd()
    for candidate in (probe, *probe.parents):
        hit = candidate / "fixtures" / PACK_NAME
        if hit.is_dir():
            return hit
    repo = Path(__file__).resolve().parents[3] / "fixtures" / PACK_NAME
    if repo.is_dir():
        return repo
    raise FileNotFoundError(
        f"cannot locate the {PACK_NAME} fixture pack; set {ENV_VAR} or pass a path"
    )


def load_scenario_model(root: str | Path | None = None) -> FeatureModel:
    pack = scenario_root(root)
    return parse_feature_model((pack / "model.json").read_text("utf-8"))


def list_configurations(root: str | Path | None = None) -> list[str]:
    pack = scenario_root(root)
    return sorted(p.stem for p in (pack / "configs").glob("*.json"))


def named_configuration(name: str, root: str | Path | None = None) -> Configuration:
    pack = scenario_root(root)
    path = pack / "configs" / f"{name}.json"
    if not path.is_file():
        raise FileNotFoundError(
            f"no configuration named {name!r} (have: {list_configurations(pack)})"
        )
    doc = json.loads(path.read_text("utf-8"))
    return Configuration.of(*doc["selected"])


def compose_named(name: str, root: str | Path | None = None) -> ProductBundle:
    pack = scenario_root(root)
    model = load_scenario_model(pack)
    configuration = named_configuration(name, pack)
    return compose_product(model, configuration, pack / "features")
