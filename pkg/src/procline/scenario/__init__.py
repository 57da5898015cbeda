"""Parking permit scenario: fixtures, handlers, stubs, golden flows."""

from .golden import (
    CORE_PROCESS,
    GRANT_FLOW,
    REJECT_FLOW,
    GoldenResult,
    engine_for_bundle,
    run_golden_flow,
)
from .handlers import HANDLERS, automatic_check, send_mail, send_sms
from .pack import (
    ENV_VAR,
    compose_named,
    list_configurations,
    load_scenario_model,
    named_configuration,
    scenario_root,
)
from .stubs import CommercialRegisterStub, NotificationGatewayStub

__all__ = [
    "CORE_PROCESS", "GRANT_FLOW", "REJECT_FLOW", "GoldenResult",
    "engine_for_bundle", "run_golden_flow",
    "HANDLERS", "automatic_check", "send_mail", "send_sms",
    "ENV_VAR", "compose_named", "list_configurations", "load_scenario_model",
    "named_configuration", "scenario_root",
    "CommercialRegisterStub", "NotificationGatewayStub",
]
