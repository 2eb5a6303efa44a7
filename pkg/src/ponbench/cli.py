"""Command-line front end.

The CLI is a thin client of the HTTP service: every subcommand builds a
JSON payload, posts it to an endpoint, and writes the response out. By
default the service app is mounted in-process (no daemon needed);
``--server URL`` targets a running instance instead. Exit codes:
0 success, 1 infeasible result, 2 usage or IO error.
"""
from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import httpx

from .service.app import create_app

PLOT_FIELDS = ("x", "solver", "mean", "ci_lo", "ci_hi", "component")


class ServiceClient:
    """HTTP client over a remote server or the in-process app."""

    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            from starlette.testclient import TestClient

            self._client = TestClient(create_app())

    def post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        return self._handle(response)

    def get(self, path: str) -> dict:
        return self._handle(self._client.get(path))

    @staticmethod
    def _handle(response: httpx.Response) -> dict:
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise click.ClickException(f"service error ({response.status_code}): {detail}")
        return response.json()


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"cannot read {path}: {exc}") from exc


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        click.echo(text, nl=not text.endswith("\n"))
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise click.ClickException(f"cannot write {path}: {exc}") from exc


def _scenario_payload(ref: str):
    """A preset key passes through; a path loads the scenario document."""
    if Path(ref).is_file():
        return _read_json(ref)
    return ref


def _parse_overrides(pairs: tuple[str, ...], json_text: str | None) -> dict:
    overrides: dict = json.loads(json_text) if json_text else {}
    for pair in pairs:
        if "=" not in pair:
            raise click.UsageError(f"override {pair!r} is not key=value")
        key, raw = pair.split("=", 1)
        try:
            overrides[key] = json.loads(raw)
        except ValueError:
            overrides[key] = raw
    return overrides


@click.group()
@click.option("--server", default=None, envvar="PONBENCH_SERVER",
              help="Service base URL; default runs the service in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """PON fronthaul planning bench: generate, evaluate, solve, benchmark."""
    ctx.obj = ServiceClient(server)


@main.command()
@click.option("--scenario", required=True, help="Preset key (s1..s4) or scenario JSON file.")
@click.option("--n-du", type=int, required=True)
@click.option("--n-ru", type=int, required=True)
@click.option("--topology", type=int, default=0, show_default=True)
@click.option("--master-seed", type=int, default=0, show_default=True)
@click.option("--out", default="-", help="Output path for the instance JSON.")
@click.pass_obj
def generate(client: ServiceClient, scenario: str, n_du: int, n_ru: int,
             topology: int, master_seed: int, out: str) -> None:
    """Generate a problem instance."""
    payload = {
        "scenario": _scenario_payload(scenario),
        "n_du": n_du, "n_ru": n_ru,
        "topology_index": topology, "master_seed": master_seed,
    }
    result = client.post("/instances/generate", payload)
    _write_text(out, json.dumps(result, indent=2))


@main.command()
@click.option("--instance", "instance_path", required=True, type=click.Path(exists=True))
@click.option("--solution", "solution_path", required=True, type=click.Path(exists=True))
@click.option("--scenario", required=True)
@click.option("--catalog", "catalog_path", default=None, type=click.Path(exists=True))
@click.pass_obj
def evaluate(client: ServiceClient, instance_path: str, solution_path: str,
             scenario: str, catalog_path: str | None) -> None:
    """Cost and feasibility of a solution file; exit 1 when infeasible."""
    payload = {
        "instance": _read_json(instance_path),
        "solution": _read_json(solution_path),
        "scenario": _scenario_payload(scenario),
    }
    if catalog_path:
        payload["catalog"] = _read_json(catalog_path)
    result = client.post("/evaluate", payload)
    click.echo(json.dumps(result, indent=2))
    if not result["feasible"]:
        sys.exit(1)


@main.command()
@click.option("--instance", "instance_path", required=True, type=click.Path(exists=True))
@click.option("--scenario", required=True)
@click.option("--solver", required=True, type=click.Choice(["ga", "kmc", "rssa"]))
@click.option("--set", "set_pairs", multiple=True,
              help="Solver config override, key=value (repeatable).")
@click.option("--config-json", default=None, help="Solver config overrides as JSON.")
@click.option("--budget-s", type=float, default=None, help="Shortcut for t_run_s.")
@click.option("--seed", type=int, default=None)
@click.option("--out", default="-", help="Where to write the solution JSON.")
@click.option("--trace", "trace_path", default=None, help="Write the solver trace CSV here.")
@click.pass_obj
def solve(client: ServiceClient, instance_path: str, scenario: str, solver: str,
          set_pairs: tuple[str, ...], config_json: str | None,
          budget_s: float | None, seed: int | None, out: str,
          trace_path: str | None) -> None:
    """Run one solver on one instance; exit 1 on an infeasible marker."""
    overrides = _parse_overrides(set_pairs, config_json)
    if budget_s is not None:
        overrides["t_run_s"] = budget_s
    if seed is not None:
        overrides["seed"] = seed
    payload = {
        "instance": _read_json(instance_path),
        "scenario": _scenario_payload(scenario),
        "solver": solver,
        "overrides": overrides,
        "include_trace": trace_path is not None,
    }
    result = client.post("/solve", payload)
    if trace_path and result.get("trace"):
        rows = result["trace"]
        with open(trace_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    if not result["feasible"]:
        click.echo(json.dumps({
            "feasible": False,
            "failure": result.get("failure"),
            "iterations": result.get("iterations"),
            "runtime_s": result.get("runtime_s"),
        }, indent=2))
        sys.exit(1)
    _write_text(out, json.dumps(result["solution"], indent=2))
    click.echo(json.dumps({
        "feasible": True,
        "best_cost": result["best_cost"],
        "iterations": result["iterations"],
        "runtime_s": result["runtime_s"],
    }, indent=2), err=True)


@main.command("export-lp")
@click.option("--instance", "instance_path", required=True, type=click.Path(exists=True))
@click.option("--scenario", required=True)
@click.option("--catalog", "catalog_path", default=None, type=click.Path(exists=True))
@click.option("--out", default="-", help="Path for the LP text.")
@click.pass_obj
def export_lp_cmd(client: ServiceClient, instance_path: str, scenario: str,
                  catalog_path: str | None, out: str) -> None:
    """Export the exact model as an LP-format file."""
    payload = {
        "instance": _read_json(instance_path),
        "scenario": _scenario_payload(scenario),
    }
    if catalog_path:
        payload["catalog"] = _read_json(catalog_path)
    result = client.post("/lp/export", payload)
    _write_text(out, result["lp"])
    click.echo(
        f"variables={result['variable_count']} "
        f"constraints={result['constraint_count']} big_m={result['big_m']}",
        err=True,
    )


@main.command("import-sol")
@click.option("--instance", "instance_path", required=True, type=click.Path(exists=True))
@click.option("--scenario", required=True)
@click.option("--solver-output", "output_path", required=True, type=click.Path(exists=True))
@click.option("--out", default="-", help="Where to write the reconstructed solution JSON.")
@click.pass_obj
def import_sol(client: ServiceClient, instance_path: str, scenario: str,
               output_path: str, out: str) -> None:
    """Import an external solver's variable listing back into a solution."""
    try:
        solver_output = Path(output_path).read_text()
    except OSError as exc:
        raise click.ClickException(f"cannot read {output_path}: {exc}") from exc
    payload = {
        "instance": _read_json(instance_path),
        "scenario": _scenario_payload(scenario),
        "solver_output": solver_output,
    }
    result = client.post("/lp/import", payload)
    _write_text(out, json.dumps(result["solution"], indent=2))
    if not result["feasible"]:
        click.echo("imported solution is infeasible", err=True)
        sys.exit(1)


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, help="Directory for record files.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.pass_obj
def bench(client: ServiceClient, spec_path: str, out_dir: str, workers: int) -> None:
    """Run a full experiment sweep and persist the records."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("ok")
        probe.unlink()
    except OSError as exc:
        raise click.ClickException(f"output dir {out_dir} not writable: {exc}") from exc

    spec = _read_json(spec_path)
    result = client.post("/bench", {"spec": spec, "max_workers": workers})
    records = result["records"]
    (out / "records.json").write_text(json.dumps(records, indent=2))
    fields = list(records[0].keys()) if records else []
    with open(out / "records.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in records:
            writer.writerow({k: ("" if row[k] is None else row[k]) for k in fields})
    (out / "determinism.sha256").write_text(result["determinism_hash"] + "\n")
    click.echo(f"{len(records)} records -> {out}")


@main.command()
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, help="Directory for summary and plot CSVs.")
@click.pass_obj
def report(client: ServiceClient, records_path: str, out_dir: str) -> None:
    """Aggregate records into summary tables and plot-ready CSVs."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise click.ClickException(f"output dir {out_dir} not writable: {exc}") from exc
    records = _read_json(records_path)
    result = client.post("/report", {"records": records})

    summary = result["summary"]
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    if summary:
        with open(out / "summary.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(summary[0].keys()))
            writer.writeheader()
            for row in summary:
                writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    plots_dir = out / "plots"
    plots_dir.mkdir(exist_ok=True)
    for name, rows in result["plots"].items():
        with open(plots_dir / f"{name}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(PLOT_FIELDS))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: ("" if row[k] is None else row[k]) for k in PLOT_FIELDS})
    click.echo(f"summary ({len(summary)} rows) and {len(result['plots'])} plots -> {out}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
