"""Feature composition: artifact trees, superimposition, product bundles."""

from .product import (
    AGGREGATION_FILE,
    BASE_FOLDER,
    CONFIGURATION_FILE,
    PLUGINS_FILE,
    SCHEMA_FILE,
    InvalidConfiguration,
    LoadedProduct,
    ProductBundle,
    ProductError,
    bundle_from_tree,
    compose_product,
    emit_product,
    load_product,
)
from .tree import (
    CONFIG_FILE,
    MANIFEST_FILE,
    PROCESS_DIR,
    RECORD_DIR,
    ArtifactTree,
    ComposeError,
    ConfigLeaf,
    ManifestLeaf,
    OpaqueLeaf,
    ProcessLeaf,
    RecordLeaf,
    build_artifact_tree,
    superimpose,
)

__all__ = [
    "AGGREGATION_FILE", "BASE_FOLDER", "CONFIGURATION_FILE", "PLUGINS_FILE",
    "SCHEMA_FILE", "InvalidConfiguration", "LoadedProduct", "ProductBundle",
    "ProductError", "bundle_from_tree", "compose_product", "emit_product",
    "load_product",
    "CONFIG_FILE", "MANIFEST_FILE", "PROCESS_DIR", "RECORD_DIR",
    "ArtifactTree", "ComposeError", "ConfigLeaf", "ManifestLeaf",
    "OpaqueLeaf", "ProcessLeaf", "RecordLeaf", "build_artifact_tree",
    "superimpose",
]
