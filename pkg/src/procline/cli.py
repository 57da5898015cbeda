"""Command line interface.

Exit codes: 0 on success, 1 when the input fails validation or a file is
corrupt, 2 for usage errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .composer import (
    ComposeError,
    InvalidConfiguration,
    ProductError,
    compose_product,
    emit_product,
)
from .engine.journal import JournalCorruption, iter_records, replay
from .feature_model import (
    Configuration,
    ModelError,
    enumerate_configurations,
    achievable_pairs,
    parse_feature_model,
    sample_pairwise,
    validate_configuration,
)


def _load_model(path: str):
    try:
        return parse_feature_model(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise click.ClickException(f"cannot read {path}: {exc}")
    except ModelError as exc:
        click.echo(f"invalid model: {exc}", err=True)
        sys.exit(1)


def _load_configuration(path: str) -> Configuration:
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise click.ClickException(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        click.echo(f"{path}: not valid JSON: {exc}", err=True)
        sys.exit(1)
    if isinstance(doc, list):
        selected = doc
    elif isinstance(doc, dict) and isinstance(doc.get("selected"), list):
        selected = doc["selected"]
    else:
        click.echo(f'{path}: expected {{"selected": [...]}} or a JSON list', err=True)
        sys.exit(1)
    return Configuration.of(*selected)


@click.group()
def main() -> None:
    """Feature-model tooling, product derivation, and the process service."""


@main.command("validate-model")
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
def validate_model(model_file: str) -> None:
    """Parse MODEL_FILE and report whether it is well formed."""
    model = _load_model(model_file)
    click.echo(
        f"ok: {model.process} with {len(model.activities)} activities, "
        f"{len(model.leaves())} leaves, {len(model.optional_units())} optional units"
    )


@main.command("validate-config")
@click.option("--model", "model_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_file", required=True, type=click.Path(exists=True, dir_okay=False))
def validate_config(model_file: str, config_file: str) -> None:
    """Check a configuration against the model's rules."""
    model = _load_model(model_file)
    configuration = _load_configuration(config_file)
    report = validate_configuration(model, configuration)
    if report.valid:
        click.echo("valid")
        return
    for violation in report.violations:
        click.echo(f"{violation.rule}: {violation.message}")
    sys.exit(1)


@main.command("enumerate")
@click.option("--model", "model_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--limit", type=int, default=None, help="Stop after this many configurations.")
@click.option("--as-json", is_flag=True, help="Emit one JSON list per line.")
def enumerate_cmd(model_file: str, limit: int | None, as_json: bool) -> None:
    """List every valid configuration of the model."""
    model = _load_model(model_file)
    count = 0
    for config in enumerate_configurations(model, limit=limit):
        ids = config.sorted()
        click.echo(json.dumps(ids) if as_json else " ".join(ids))
        count += 1
    click.echo(f"# {count} configurations", err=True)


@main.command("sample-pairwise")
@click.option("--model", "model_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--as-json", is_flag=True, help="Emit one JSON list per line.")
def sample_pairwise_cmd(model_file: str, as_json: bool) -> None:
    """Pick a small set of configurations covering all achievable pairs."""
    model = _load_model(model_file)
    sample = sample_pairwise(model)
    for config in sample:
        ids = config.sorted()
        click.echo(json.dumps(ids) if as_json else " ".join(ids))
    pairs = achievable_pairs(model)
    click.echo(f"# {len(sample)} configurations cover {len(pairs)} pair combinations", err=True)


@main.command("derive")
@click.option("--model", "model_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--features", "features_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def derive(model_file: str, config_file: str, features_dir: str, out_dir: str) -> None:
    """Compose the product for a configuration and write it to OUT."""
    model = _load_model(model_file)
    configuration = _load_configuration(config_file)
    try:
        bundle = compose_product(model, configuration, features_dir)
    except InvalidConfiguration as exc:
        for violation in exc.report.violations:
            click.echo(f"{violation.rule}: {violation.message}", err=True)
        click.echo("configuration is invalid; nothing was written", err=True)
        sys.exit(1)
    except ComposeError as exc:
        click.echo(f"composition failed: {exc}", err=True)
        sys.exit(1)
    emit_product(bundle, out_dir)
    click.echo(f"product written to {out_dir}")


def _parse_exclusions(pairs: tuple[str, ...]) -> dict[str, list[str]]:
    excl: dict[str, list[str]] = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.BadParameter(f"--exclude takes VP=PLUGIN, got {pair!r}")
        vp, plugin = pair.split("=", 1)
        excl.setdefault(vp, []).append(plugin)
    return excl


@main.command("serve")
@click.option("--product", "product_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--listen", default="127.0.0.1:8000", show_default=True, help="HOST:PORT to bind.")
@click.option("--exclude", "excludes", multiple=True, metavar="VP=PLUGIN",
              help="Exclude a registered plugin at startup. Repeatable.")
@click.option("--journal", "journal_dir", type=click.Path(file_okay=False), default=None,
              help="Journal directory; reusing one resumes prior instances.")
@click.option("--retry-attempts", type=int, default=3, show_default=True)
@click.option("--retry-backoff-ms", type=int, default=100, show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False), default=None,
              help="Serve a static frontend under /ui.")
def serve(product_dir: str, listen: str, excludes: tuple[str, ...],
          journal_dir: str | None, retry_attempts: int, retry_backoff_ms: int,
          ui_dir: str | None) -> None:
    """Serve a derived product over HTTP."""
    import uvicorn

    from .service import ServiceConfig, create_app

    host, _, port = listen.partition(":")
    config = ServiceConfig(
        product_dir=product_dir,
        journal_dir=journal_dir,
        exclusions=_parse_exclusions(excludes),
        retry_attempts=retry_attempts,
        retry_backoff=retry_backoff_ms / 1000.0,
        ui_dir=ui_dir,
    )
    try:
        app = create_app(config)
    except ProductError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="info")


@main.command("replay")
@click.argument("journal_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--instance", "instance_id", default=None, help="Print one instance's snapshot.")
def replay_cmd(journal_file: str, instance_id: str | None) -> None:
    """Rebuild state from a journal and print it."""
    try:
        state = replay(journal_file)
    except JournalCorruption as exc:
        click.echo(f"journal corrupt: {exc} (last good seq: {exc.last_good_seq})", err=True)
        sys.exit(1)
    if instance_id:
        if instance_id not in state.instances:
            click.echo(f"no instance {instance_id!r} in this journal", err=True)
            sys.exit(1)
        click.echo(json.dumps(state.snapshot(instance_id), indent=2, sort_keys=True))
        return
    summary = {
        "records": state.last_seq,
        "instances": {
            iid: {"state": inst["state"], "version": inst["version"]}
            for iid, inst in sorted(state.instances.items())
        },
        "open_tasks": [t["task_id"] for t in state.open_tasks()],
        "open_incidents": sorted(
            i["incident_id"] for i in state.incidents.values() if i["state"] == "open"
        ),
    }
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
