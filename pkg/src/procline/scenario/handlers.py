"""Automated task handlers for the parking permit processes."""

from __future__ import annotations

from ..engine.runtime import HandlerContext


def automatic_check(ctx: HandlerContext) -> dict:
    """Compare the application's register number with the register entry."""
    application = ctx.variables["application"]
    company = application["company"]
    register = ctx.services["register"]
    expected = register.lookup(company["name"])
    claimed = company.get("commercialRegisterNo")
    justified = expected is not None and claimed == expected
    return {"decision.justified": justified}


def _outcome(ctx: HandlerContext) -> str:
    return "granted" if ctx.variables["decision"]["justified"] else "rejected"


def send_mail(ctx: HandlerContext) -> dict:
    applicant = ctx.variables["application"]["applicant"]
    ctx.services["notifications"].send(
        channel="mail",
        sender=ctx.config.get("notify.mail.sender", "permits@city.example"),
        recipient=applicant["contact"],
        subject="Your parking permit application",
        body=f"Dear {applicant['name']}, your parking permit application "
             f"was {_outcome(ctx)}.",
    )
    return {}


def send_sms(ctx: HandlerContext) -> dict:
    applicant = ctx.variables["application"]["applicant"]
    ctx.services["notifications"].send(
        channel="sms",
        recipient=applicant["contact"],
        body=f"Permit application {_outcome(ctx)}.",
    )
    return {}


HANDLERS = {
    "automatic-check": automatic_check,
    "send-mail": send_mail,
    "send-sms": send_sms,
}
