"""Command-line client for the probe service.

Every subcommand talks HTTP to the FastAPI app: against a remote service when
--server is given, otherwise against an in-process instance, so one code path
serves both deployment styles.  Exit status reports pipeline health, never
the scientific verdict: a probe that concludes "does_not_comprehend" still
exits 0.

Set PANO_PROBE_LOG=debug|info|warning|error to control verbosity.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

import click
import httpx

log = logging.getLogger("pano_probe")

DEFAULT_CUES = ["", "image, ", "photo, ", "picture, "]


def _make_client(server: str | None, timeout: float) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=timeout)
    from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _post(client: httpx.Client, endpoint: str, payload: dict) -> dict:
    log.debug("POST %s %s", endpoint, payload)
    try:
        resp = client.post(endpoint, json=payload)
    except httpx.TransportError as exc:
        raise click.ClickException(f"cannot reach probe service: {exc}") from exc
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise click.ClickException(f"{endpoint} failed ({resp.status_code}): {detail}")
    return resp.json()


def _abs(path: str | None) -> str | None:
    return str(Path(path).resolve()) if path else None


def _emit_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


def _write_report(resp: dict, out_dir: str, stem: str, table_format: str = "both") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_json = json.dumps(resp["report"], indent=2, sort_keys=True) + "\n"
    (out / f"{stem}_report.json").write_text(report_json, encoding="utf-8")
    written = [".json"]
    if table_format in ("csv", "both"):
        (out / f"{stem}_report.csv").write_text(resp["csv"], encoding="utf-8")
        written.append(".csv")
    if table_format in ("markdown", "both"):
        (out / f"{stem}_report.md").write_text(resp["markdown"], encoding="utf-8")
        written.append(".md")
    verdict = resp["report"]["verdict"]
    click.echo(f"verdict: {verdict}")
    click.echo(f"wrote {out / (stem + '_report')}{{{','.join(written)}}}")


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Probe service URL; default runs the service in-process.")
@click.option("--timeout", default=300.0, show_default=True,
              help="HTTP timeout in seconds (remote server only).")
@click.pass_context
def main(ctx, server, timeout):
    """Probe panoramic image-text alignment with statistical tests."""
    level = os.environ.get("PANO_PROBE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    ctx.obj = _make_client(server, timeout)


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--divisions", default=8, show_default=True)
@click.option("--filter-directional", is_flag=True,
              help="Drop pairs whose prompt contains a directional cue.")
@click.pass_obj
def variants(client, manifest, out_dir, divisions, filter_directional):
    """Write flip and circular-shift image variants plus their index."""
    resp = _post(client, "/variants", {
        "manifest": _abs(manifest),
        "out_dir": _abs(out_dir),
        "divisions": divisions,
        "filter_directional": filter_directional,
    })
    click.echo(
        f"{resp['pair_count']} pairs, {resp['variant_count']} variants indexed"
    )
    click.echo(f"wrote {resp['index_path']}")


def _provider_options(fn):
    fn = click.option("--manifest", required=True, type=click.Path(exists=True))(fn)
    fn = click.option("--store", default=None, type=click.Path(),
                      help="Embedding store file.")(fn)
    fn = click.option("--service-url", default=None, metavar="URL",
                      help="Embedding service (POST /embed) instead of a store.")(fn)
    fn = click.option("--variant-index", default=None, type=click.Path(),
                      help="Variant index JSON (service provider only).")(fn)
    fn = click.option("--filter-directional", is_flag=True)(fn)
    return fn


_format_option = click.option(
    "--format", "table_format", default="both", show_default=True,
    type=click.Choice(["csv", "markdown", "both"]),
    help="Which rendered table(s) to write next to the report JSON.")


@main.command("probe-textual")
@_provider_options
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--alpha", default=0.01, show_default=True)
@click.option("--cue", "cues", multiple=True,
              help="Generic cue to substitute; repeatable. Defaults to "
                   '"", "image, ", "photo, ", "picture, ".')
@_format_option
@click.pass_obj
def probe_textual_cmd(client, manifest, store, service_url, variant_index,
                      filter_directional, out_dir, alpha, cues, table_format):
    """Test whether format-cue prompts outscore generic-cue prompts."""
    resp = _post(client, "/probe/textual", {
        "manifest": _abs(manifest),
        "store": _abs(store),
        "service_url": service_url,
        "variant_index": _abs(variant_index),
        "alpha": alpha,
        "generic_cues": list(cues) if cues else DEFAULT_CUES,
        "filter_directional": filter_directional,
    })
    _write_report(resp, out_dir, "textual", table_format)


@main.command("probe-visual")
@_provider_options
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--alpha", default=0.01, show_default=True)
@click.option("--divisions", default=8, show_default=True)
@click.option("--bound", default=None, type=float,
              help="Override the flip-derived stability bound.")
@_format_option
@click.pass_obj
def probe_visual_cmd(client, manifest, store, service_url, variant_index,
                     filter_directional, out_dir, alpha, divisions, bound,
                     table_format):
    """Test score stability under the full circular-shift schedule."""
    resp = _post(client, "/probe/visual", {
        "manifest": _abs(manifest),
        "store": _abs(store),
        "service_url": service_url,
        "variant_index": _abs(variant_index),
        "alpha": alpha,
        "divisions": divisions,
        "bound_override": bound,
        "filter_directional": filter_directional,
    })
    _write_report(resp, out_dir, "visual", table_format)


@main.command(name="lambda")
@click.argument("curve_lambda1", type=click.Path(exists=True))
@click.argument("curve_lambda0", type=click.Path(exists=True))
@click.option("--out", default=None, type=click.Path(),
              help="Write the record here instead of stdout.")
@click.pass_obj
def lambda_cmd(client, curve_lambda1, curve_lambda0, out):
    """Derive the balance weight from two loss-curve CSVs (lambda=1, lambda=0)."""
    resp = _post(client, "/lambda", {
        "curve_lambda1": _abs(curve_lambda1),
        "curve_lambda0": _abs(curve_lambda0),
    })
    _emit_json(resp, out)


@main.command()
@_provider_options
@click.option("--metric", default="orig-scores", show_default=True,
              help='"orig-scores", "flip-diffs" or "shift-diffs:<delta>".')
@click.option("--out", default=None, type=click.Path())
@click.pass_obj
def boxplot(client, manifest, store, service_url, variant_index,
            filter_directional, metric, out):
    """Tukey boxplot summary of a score or score-difference distribution."""
    resp = _post(client, "/boxplot", {
        "manifest": _abs(manifest),
        "store": _abs(store),
        "service_url": service_url,
        "variant_index": _abs(variant_index),
        "metric": metric,
        "filter_directional": filter_directional,
    })
    _emit_json(resp["summary"], out)


@main.command()
@click.argument("before", type=click.Path(exists=True))
@click.argument("after", type=click.Path(exists=True))
@click.option("--out", default=None, type=click.Path())
@click.pass_obj
def compare(client, before, after, out):
    """Decision flips between two probe report JSON files."""
    try:
        before_doc = json.loads(Path(before).read_text(encoding="utf-8"))
        after_doc = json.loads(Path(after).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read report: {exc}") from exc
    resp = _post(client, "/compare", {"before": before_doc, "after": after_doc})
    _emit_json(resp["delta"], out)


if __name__ == "__main__":
    main()
