"""Plugin binding: what a variation point may invoke.

The containment chain, per variation point:

    invoked(vp)  ⊆  available(vp)  ⊆  registered(vp)  ⊆  manifest(vp)

Compose-time exclusion keeps a plugin out of the manifest entirely. Startup
exclusions trim availability without touching registration. Per-instance
runtime selection narrows the invoked set further, and selecting something
unavailable is a hard error at start time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

log = logging.getLogger(__name__)


class BindingError(ValueError):
    pass


class SelectionError(BindingError):
    """A runtime selection named a plugin that is not available."""


@dataclass(frozen=True)
class PluginDescriptor:
    plugin_id: str
    variation_point: str
    implementation_process: str
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "plugin_id": self.plugin_id,
            "variation_point": self.variation_point,
            "implementation_process": self.implementation_process,
            "label": self.label,
        }


@dataclass(frozen=True)
class PluginRegistry:
    manifest: dict[str, tuple[PluginDescriptor, ...]] = field(default_factory=dict)
    registered: dict[str, tuple[PluginDescriptor, ...]] = field(default_factory=dict)
    excluded: dict[str, frozenset[str]] = field(default_factory=dict)

    def variation_points(self) -> tuple[str, ...]:
        return tuple(sorted(self.registered))

    def manifest_for(self, vp: str) -> tuple[PluginDescriptor, ...]:
        return self.manifest.get(vp, ())

    def registered_for(self, vp: str) -> tuple[PluginDescriptor, ...]:
        return self.registered.get(vp, ())

    def available(self, vp: str) -> tuple[PluginDescriptor, ...]:
        gone = self.excluded.get(vp, frozenset())
        return tuple(d for d in self.registered_for(vp) if d.plugin_id not in gone)


def register_from_bundle(manifest_entries) -> PluginRegistry:
    """Build a registry from a product's plugin manifest.

    Accepts PluginDescriptor instances or raw dicts. Everything in the
    manifest registers; what was excluded at compose time never appears
    here and can never be invoked.
    """
    by_vp: dict[str, list[PluginDescriptor]] = {}
    seen: set[str] = set()
    for entry in manifest_entries:
        if isinstance(entry, dict):
            entry = PluginDescriptor(
                plugin_id=entry["plugin_id"],
                variation_point=entry["variation_point"],
                implementation_process=entry["implementation_process"],
                label=entry.get("label", ""),
            )
        if entry.plugin_id in seen:
            raise BindingError(f"duplicate plugin id {entry.plugin_id!r} in manifest")
        seen.add(entry.plugin_id)
        by_vp.setdefault(entry.variation_point, []).append(entry)
    table = {vp: tuple(sorted(items, key=lambda d: d.plugin_id)) for vp, items in by_vp.items()}
    return PluginRegistry(manifest=dict(table), registered=dict(table), excluded={})


def apply_startup_exclusions(
    registry: PluginRegistry, exclusions: dict[str, set[str] | frozenset[str] | list[str]]
) -> tuple[PluginRegistry, list[str]]:
    """Extend the excluded sets; unknown ids are reported, never dropped silently."""
    warnings: list[str] = []
    merged: dict[str, set[str]] = {vp: set(ids) for vp, ids in registry.excluded.items()}
    for vp, ids in exclusions.items():
        known = {d.plugin_id for d in registry.registered_for(vp)}
        if not known:
            warnings.append(f"variation point {vp!r} has no registered plugins")
        for plugin_id in ids:
            if plugin_id not in known:
                warnings.append(f"plugin {plugin_id!r} is not registered at variation point {vp!r}")
            merged.setdefault(vp, set()).add(plugin_id)
    for message in warnings:
        log.warning("startup exclusion: %s", message)
    out = replace(registry, excluded={vp: frozenset(ids) for vp, ids in merged.items()})
    return out, warnings


def resolve_invocation(
    registry: PluginRegistry,
    vp: str,
    user_selection: set[str] | frozenset[str] | None = None,
) -> tuple[PluginDescriptor, ...]:
    """The plugins a variation point will actually invoke.

    With no user selection, everything available is invoked. A selection
    must be a subset of what is available; anything else is a hard error.
    """
    available = registry.available(vp)
    if user_selection is None:
        return available
    known = {d.plugin_id for d in available}
    unknown = sorted(set(user_selection) - known)
    if unknown:
        raise SelectionError(
            f"selection at variation point {vp!r} names unavailable plugins: {unknown}"
        )
    return tuple(d for d in available if d.plugin_id in user_selection)
