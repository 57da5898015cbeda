"""Process runtime: definitions, documents, journal, and the engine."""

from .aggregate import POLICIES, AggregationError, aggregate
from .bpmn import import_bpmn_subset
from .definition import (
    AUTOMATED_TASK,
    CORE,
    END,
    GATEWAY,
    IMPLEMENTATION,
    START,
    USER_TASK,
    VARIATION_POINT,
    ProcessDefinition,
    ProcessEdge,
    ProcessError,
    ProcessNode,
    check_implementation_shape,
    parse_process,
)
from .expr import Expression, ExpressionError, parse_expression
from .journal import (
    Journal,
    JournalCorruption,
    ReplayState,
    iter_records,
    replay,
    snapshot_view,
)
from .runtime import (
    CANCEL_CHILD,
    COMPLETED,
    INCIDENT,
    RESUME,
    RUNNING,
    WAITING_USER,
    DeployError,
    Engine,
    EngineError,
    HandlerContext,
    IncidentEntry,
    IncidentStateError,
    OutputError,
    StartError,
    TaskEntry,
    TaskStateError,
    UnknownEntity,
    VersionConflict,
)
from .schema import (
    MISSING,
    RESERVED_ROOTS,
    DocumentError,
    ProductSchema,
    SchemaError,
    apply_write,
    canonical_json,
    get_path,
)

__all__ = [
    "POLICIES", "AggregationError", "aggregate",
    "import_bpmn_subset",
    "AUTOMATED_TASK", "CORE", "END", "GATEWAY", "IMPLEMENTATION", "START",
    "USER_TASK", "VARIATION_POINT",
    "ProcessDefinition", "ProcessEdge", "ProcessError", "ProcessNode",
    "check_implementation_shape", "parse_process",
    "Expression", "ExpressionError", "parse_expression",
    "Journal", "JournalCorruption", "ReplayState", "iter_records", "replay",
    "snapshot_view",
    "CANCEL_CHILD", "COMPLETED", "INCIDENT", "RESUME", "RUNNING", "WAITING_USER",
    "DeployError", "Engine", "EngineError", "HandlerContext", "IncidentEntry",
    "IncidentStateError", "OutputError", "StartError", "TaskEntry",
    "TaskStateError", "UnknownEntity", "VersionConflict",
    "MISSING", "RESERVED_ROOTS", "DocumentError", "ProductSchema", "SchemaError",
    "apply_write", "canonical_json", "get_path",
]
