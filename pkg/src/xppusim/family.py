"""Product-family variability models and variant derivation.

A family document is a 150% model: three views (hardware, plc, hmi) of
nodes classified as mandatory, optional, alternative group or alternative
child, plus cross-view links that run through extra-functional concerns
(operating modes, diagnosis, error handling). Deriving a variant resolves
every alternative group, keeps selected optionals, and prunes links whose
endpoints did not make it into the variant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class NodeKind(str, Enum):
    FEATURE = "Feature"
    VARIABLE = "Variable"
    ACTION = "Action"
    OPERATING_MODE_ACTION = "OperatingModeAction"
    VISUALIZATION = "Visualization"


class Variability(str, Enum):
    MANDATORY = "Mandatory"
    OPTIONAL = "Optional"
    ALTERNATIVE_GROUP = "AlternativeGroup"
    ALTERNATIVE_CHILD = "AlternativeChild"


class LinkDirection(str, Enum):
    PLC_TO_HMI = "PlcToHmi"
    HMI_TO_PLC = "HmiToPlc"


EXTRA_FUNCTIONAL_CONCERNS = ("OperatingModes", "ErrorHandling", "Diagnosis")

VIEWS = ("hardware", "plc", "hmi")


@dataclass
class FamilyNode:
    id: str
    name: str
    kind: NodeKind
    variability: Variability
    children: list["FamilyNode"] = field(default_factory=list)
    key: str | None = None  # selection key, AlternativeGroup only
    refs: list[str] = field(default_factory=list)  # OperatingModeAction -> Action ids
    notes: str | None = None

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class CrossLink:
    from_id: str
    to_id: str
    direction: LinkDirection
    via: str

    def as_dict(self) -> dict:
        return {
            "from": self.from_id,
            "to": self.to_id,
            "direction": self.direction.value,
            "via": self.via,
        }


@dataclass
class FamilyModel:
    name: str
    views: dict[str, list[FamilyNode]]
    links: list[CrossLink]

    def nodes(self):
        for view in VIEWS:
            for root in self.views.get(view, []):
                for node in root.walk():
                    yield view, node

    def node_view(self) -> dict[str, str]:
        return {node.id: view for view, node in self.nodes()}


class FamilyModelError(Exception):
    pass


class DerivationError(FamilyModelError):
    pass


def _parse_node(doc: dict, where: str) -> FamilyNode:
    try:
        node = FamilyNode(
            id=doc["id"],
            name=doc["name"],
            kind=NodeKind(doc["kind"]),
            variability=Variability(doc["variability"]),
            key=doc.get("key"),
            refs=list(doc.get("refs", [])),
            notes=doc.get("notes"),
        )
    except (KeyError, ValueError) as exc:
        raise FamilyModelError(f"invalid node at {where}: {exc}") from exc
    for i, child in enumerate(doc.get("children", [])):
        node.children.append(_parse_node(child, f"{where}/children[{i}]"))
    return node


def model_from_json(doc: dict) -> FamilyModel:
    views: dict[str, list[FamilyNode]] = {}
    for view in VIEWS:
        views[view] = [
            _parse_node(node, f"{view}[{i}]")
            for i, node in enumerate(doc.get("views", {}).get(view, []))
        ]
    links = []
    for i, link in enumerate(doc.get("links", [])):
        try:
            links.append(
                CrossLink(
                    from_id=link["from"],
                    to_id=link["to"],
                    direction=LinkDirection(link["direction"]),
                    via=link["via"],
                )
            )
        except (KeyError, ValueError) as exc:
            raise FamilyModelError(f"invalid link [{i}]: {exc}") from exc
    return FamilyModel(name=doc.get("name", "family-model"), views=views, links=links)


def load_model(path: str | Path) -> FamilyModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FamilyModelError(
            f"parse error in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return model_from_json(doc)


def default_cylinder_model() -> FamilyModel:
    from . import data

    return model_from_json(data.load_json("cylinder_family.json"))


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def validate(model: FamilyModel) -> list[Violation]:
    violations: list[Violation] = []
    seen_ids: set[str] = set()
    node_view = {}
    for view, node in model.nodes():
        if node.id in seen_ids:
            violations.append(Violation("duplicate-id", f"node id {node.id!r} used twice"))
        seen_ids.add(node.id)
        node_view[node.id] = view
        if node.variability == Variability.ALTERNATIVE_GROUP:
            if len(node.children) < 2:
                violations.append(
                    Violation("group-arity", f"group {node.id!r} needs >= 2 alternatives")
                )
            if node.key is None:
                violations.append(Violation("group-key", f"group {node.id!r} has no selection key"))
            for child in node.children:
                if child.variability != Variability.ALTERNATIVE_CHILD:
                    violations.append(
                        Violation(
                            "group-children",
                            f"group {node.id!r} child {child.id!r} is not an AlternativeChild",
                        )
                    )
    for view, node in model.nodes():
        if node.variability == Variability.ALTERNATIVE_CHILD:
            parents = [
                p
                for _, p in model.nodes()
                if node in p.children and p.variability == Variability.ALTERNATIVE_GROUP
            ]
            if not parents:
                violations.append(
                    Violation("stray-alternative", f"{node.id!r} is not inside a group")
                )
        for ref in node.refs:
            if ref not in seen_ids:
                violations.append(Violation("dangling-ref", f"{node.id!r} references {ref!r}"))
    for link in model.links:
        for endpoint in (link.from_id, link.to_id):
            if endpoint not in seen_ids:
                violations.append(Violation("dangling-link", f"link endpoint {endpoint!r} missing"))
        if link.from_id in node_view and link.to_id in node_view:
            if node_view[link.from_id] == node_view[link.to_id]:
                violations.append(
                    Violation(
                        "same-view-link",
                        f"link {link.from_id!r} -> {link.to_id!r} does not cross views",
                    )
                )
        if link.via not in EXTRA_FUNCTIONAL_CONCERNS:
            violations.append(
                Violation("link-via", f"link via {link.via!r} is not an extra-functional concern")
            )
    return violations


@dataclass
class VariantConfig:
    """Concrete node sets per view after resolving the selection."""

    selection: dict
    nodes_by_view: dict[str, dict[str, FamilyNode]]
    links: list[CrossLink]

    def names(self, view: str) -> set[str]:
        return {node.name for node in self.nodes_by_view.get(view, {}).values()}

    def plc_signals(self) -> set[str]:
        return {
            node.name
            for node in self.nodes_by_view.get("plc", {}).values()
            if node.kind == NodeKind.VARIABLE
        }

    def plc_actions(self) -> set[str]:
        return {
            node.name
            for node in self.nodes_by_view.get("plc", {}).values()
            if node.kind == NodeKind.ACTION
        }

    def as_dict(self) -> dict:
        return {
            "selection": self.selection,
            "views": {
                view: sorted(n.name for n in nodes.values())
                for view, nodes in self.nodes_by_view.items()
            },
            "links": [link.as_dict() for link in self.links],
        }


def derive(
    model: FamilyModel,
    alternatives: dict[str, str],
    optionals: set[str] | None = None,
) -> VariantConfig:
    """Resolve a variant: mandatory nodes always, chosen alternative subtrees,
    explicitly selected optionals; links with unresolved endpoints drop out."""
    optionals = optionals or set()
    group_keys = {
        node.key
        for _, node in model.nodes()
        if node.variability == Variability.ALTERNATIVE_GROUP
    }
    missing = sorted(k for k in group_keys if k not in alternatives)
    if missing:
        raise DerivationError(f"selection does not cover alternative groups: {', '.join(missing)}")

    included: dict[str, dict[str, FamilyNode]] = {view: {} for view in VIEWS}

    def walk(node: FamilyNode, view: str) -> None:
        if node.variability == Variability.OPTIONAL:
            if node.name not in optionals and node.id not in optionals:
                return
        if node.variability == Variability.ALTERNATIVE_GROUP:
            choice = alternatives[node.key]
            chosen = [c for c in node.children if c.name == choice or c.id == choice]
            if not chosen:
                raise DerivationError(
                    f"group {node.key!r} has no alternative named {choice!r}"
                )
            included[view][node.id] = node
            walk(chosen[0], view)
            return
        included[view][node.id] = node
        for child in node.children:
            walk(child, view)

    for view in VIEWS:
        for root in model.views.get(view, []):
            walk(root, view)

    all_ids = {nid for nodes in included.values() for nid in nodes}
    links = [l for l in model.links if l.from_id in all_ids and l.to_id in all_ids]
    # The config holds flat copies so the source model stays untouched.
    frozen: dict[str, dict[str, FamilyNode]] = {}
    for view, nodes in included.items():
        frozen[view] = {
            nid: FamilyNode(
                id=node.id,
                name=node.name,
                kind=node.kind,
                variability=node.variability,
                key=node.key,
                refs=[r for r in node.refs if r in all_ids],
                notes=node.notes,
            )
            for nid, node in nodes.items()
        }
    return VariantConfig(
        selection={"alternatives": dict(alternatives), "optionals": sorted(optionals)},
        nodes_by_view=frozen,
        links=links,
    )


@dataclass
class ConformanceReport:
    module_path: str
    missing_signals: list[str]
    unexpected_signals: list[str]
    missing_actions: list[str]
    unexpected_actions: list[str]

    @property
    def ok(self) -> bool:
        return not (
            self.missing_signals
            or self.unexpected_signals
            or self.missing_actions
            or self.unexpected_actions
        )

    def describe(self) -> str:
        if self.ok:
            return f"{self.module_path}: OK"
        parts = [f"{self.module_path}: MISMATCH"]
        for label, items in [
            ("missing signals", self.missing_signals),
            ("unexpected signals", self.unexpected_signals),
            ("missing actions", self.missing_actions),
            ("unexpected actions", self.unexpected_actions),
        ]:
            if items:
                parts.append(f"  {label}: {', '.join(items)}")
        return "\n".join(parts)


def check_conformance(
    config: VariantConfig, manifest_entry: dict, module_path: str
) -> ConformanceReport:
    """Compare the derived plc-view node sets against a module manifest."""
    manifest_signals = set(manifest_entry.get("signals", []))
    manifest_actions = set(manifest_entry.get("actions", []))
    expected_signals = config.plc_signals()
    expected_actions = config.plc_actions()
    return ConformanceReport(
        module_path=module_path,
        missing_signals=sorted(expected_signals - manifest_signals),
        unexpected_signals=sorted(manifest_signals - expected_signals),
        missing_actions=sorted(expected_actions - manifest_actions),
        unexpected_actions=sorted(manifest_actions - expected_actions),
    )
