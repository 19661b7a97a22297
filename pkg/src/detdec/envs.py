"""Benchmark instance facade: generation, descriptors, sizing reports."""
from __future__ import annotations

import json
from pathlib import Path

from .collecting import CollectingModel, CollectingSpec, collecting_generate
from .errors import PolicyFormatError, ResourceLimitError
from .mactp import MactpModel, MactpSpec, mactp_generate
from .model import DetDecModel

__all__ = [
    "MactpSpec",
    "CollectingSpec",
    "mactp_generate",
    "collecting_generate",
    "describe",
    "model_from_descriptor",
    "load_model",
    "save_descriptor",
    "count_reachable_states",
]

_FAMILIES = {
    "mactp": MactpModel.from_descriptor,
    "collecting": CollectingModel.from_descriptor,
}


def describe(model: DetDecModel, reachable_cap: int | None = None) -> dict:
    """Sizing report: exact counts where enumerable, formula bounds otherwise.

    With ``reachable_cap`` set, also counts the states actually reachable
    from the initial belief's support under any joint action sequence (the
    formula bounds over-count configurations the dynamics can never visit).
    """
    report = model.sizing_report()
    if reachable_cap is not None:
        try:
            report["reachable_state_count"] = count_reachable_states(model, reachable_cap)
        except ResourceLimitError:
            report["reachable_state_count"] = None
            report["reachable_cap_exceeded"] = reachable_cap
    return report


def count_reachable_states(model: DetDecModel, cap: int) -> int:
    seen = set(model.initial_belief().states)
    frontier = list(seen)
    actions = model.joint_actions()
    step = model.transition_only
    while frontier:
        nxt = []
        for s in frontier:
            for a in actions:
                s2, _ = step(s, a)
                if s2 not in seen:
                    if len(seen) >= cap:
                        raise ResourceLimitError(f"reachable state count exceeds cap={cap}")
                    seen.add(s2)
                    nxt.append(s2)
        frontier = nxt
    return len(seen)


def model_from_descriptor(doc: dict) -> DetDecModel:
    family = doc.get("family")
    builder = _FAMILIES.get(family)
    if builder is None:
        raise PolicyFormatError(
            f"instance descriptor: unknown family {family!r} (expected one of {sorted(_FAMILIES)})"
        )
    return builder(doc)


def load_model(path: str | Path) -> DetDecModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PolicyFormatError(f"instance descriptor {path}: invalid JSON ({exc})") from None
    return model_from_descriptor(doc)


def descriptor_text(model: DetDecModel) -> str:
    return json.dumps(model.descriptor(), sort_keys=True, indent=1) + "\n"


def save_descriptor(model: DetDecModel, path: str | Path) -> None:
    Path(path).write_text(descriptor_text(model), encoding="utf-8")
