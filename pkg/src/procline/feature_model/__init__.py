from .model import (
    Activity,
    AssociationDecl,
    Cardinality,
    Configuration,
    CrossTreeConstraint,
    DataAccessEdge,
    DataSchemaDecl,
    FeatureGroup,
    FeatureModel,
    FeatureNode,
    FieldDecl,
    GroupCountPredicate,
    ModelError,
    RecordDecl,
    ValidationReport,
    Violation,
)
from .parser import dumps_feature_model, emit_feature_model, parse_feature_model
from .rules import (
    RULE_CARDINALITY,
    RULE_CLOSURE,
    RULE_CONDITIONAL,
    RULE_EXCLUDES,
    RULE_MANDATORY,
    RULE_REQUIRES,
    RULE_UNKNOWN,
    RULE_WRITE_BEFORE_READ,
    required_data_fields,
    validate_configuration,
)
from .space import achievable_pairs, enumerate_configurations, sample_pairwise

__all__ = [
    "Activity",
    "AssociationDecl",
    "Cardinality",
    "Configuration",
    "CrossTreeConstraint",
    "DataAccessEdge",
    "DataSchemaDecl",
    "FeatureGroup",
    "FeatureModel",
    "FeatureNode",
    "FieldDecl",
    "GroupCountPredicate",
    "ModelError",
    "RecordDecl",
    "ValidationReport",
    "Violation",
    "parse_feature_model",
    "emit_feature_model",
    "dumps_feature_model",
    "required_data_fields",
    "validate_configuration",
    "enumerate_configurations",
    "achievable_pairs",
    "sample_pairwise",
    "RULE_MANDATORY",
    "RULE_CARDINALITY",
    "RULE_REQUIRES",
    "RULE_EXCLUDES",
    "RULE_CONDITIONAL",
    "RULE_CLOSURE",
    "RULE_WRITE_BEFORE_READ",
    "RULE_UNKNOWN",
]
