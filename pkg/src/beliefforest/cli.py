"""Command line entry points: benchmark suite, session service, synthetic
network export."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .bench import export_scatter, format_summary, run_suite
from .network import load_network
from .synth import SyntheticSpec, default_spec, generate, sample_cases


def _resolve_spec(spec: str, seed) -> SyntheticSpec:
    if spec == "default":
        resolved = default_spec()
    else:
        resolved = SyntheticSpec.from_json(Path(spec).read_text())
    if seed is not None:
        resolved = SyntheticSpec(
            disease_cardinality=resolved.disease_cardinality,
            portions=resolved.portions,
            independent_features=resolved.independent_features,
            seed=seed,
        )
    return resolved


@click.group()
def main():
    """Exact inference for discrete belief networks."""


@main.command()
@click.option("--spec", default="default", help='Spec JSON path, or "default".')
@click.option("--cases", default=20, show_default=True, help="Number of sampled cases.")
@click.option("--seed", default=11, show_default=True, help="Case sampling seed.")
@click.option("--net-seed", default=None, type=int, help="Override the spec's network seed.")
@click.option("--repeat", default=5, show_default=True, help="Timing repetitions per case.")
@click.option("--out", default=None, type=click.Path(), help="Write the scatter CSV here.")
@click.option("--parallel", is_flag=True, help="Propagate instances in worker threads.")
def bench(spec, cases, seed, net_seed, repeat, out, parallel):
    """Time whole-network propagation against cutset conditioning."""
    resolved = _resolve_spec(spec, net_seed)
    net = generate(resolved)
    samples = sample_cases(net, cases, seed)
    try:
        report = run_suite(net, samples, repeat=repeat, parallel=parallel)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(format_summary(report))
    if out:
        Path(out).write_text(export_scatter(report))
        click.echo(f"scatter written to {out}")


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option(
    "--networks",
    default=None,
    type=click.Path(exists=True, file_okay=False),
    help="Directory of network JSON files to register (id = file stem).",
)
@click.option("--synthetic-seed", default=7, show_default=True, help="Seed for the bundled synthetic network.")
def serve(port, host, networks, synthetic_seed):
    """Run the diagnosis-session HTTP service.

    The default synthetic network is always registered as
    "synthetic-default"; files from --networks are registered beside it.
    """
    import uvicorn

    from .service import create_app

    registry = {"synthetic-default": generate(default_spec(synthetic_seed))}
    if networks:
        for path in sorted(Path(networks).glob("*.json")):
            registry[path.stem] = load_network(path.read_text())
    app = create_app(registry)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--spec", default="default", help='Spec JSON path, or "default".')
@click.option("--seed", default=None, type=int, help="Override the spec's seed.")
@click.option("--out", required=True, type=click.Path(), help="Write the network JSON here.")
@click.option("--cases", default=0, help="Also sample this many cases (written beside --out).")
@click.option("--case-seed", default=11, show_default=True)
def synth(spec, seed, out, cases, case_seed):
    """Generate a synthetic diagnosis network (and optionally cases)."""
    resolved = _resolve_spec(spec, seed)
    net = generate(resolved)
    Path(out).write_text(net.to_json())
    click.echo(f"network written to {out}")
    if cases:
        samples = sample_cases(net, cases, case_seed)
        case_doc = [
            {
                "case": c.index,
                "observations": {
                    node: net.node(node).values[idx]
                    for node, idx in c.observations.items()
                },
            }
            for c in samples
        ]
        case_path = Path(out).with_suffix(".cases.json")
        case_path.write_text(json.dumps(case_doc, indent=2))
        click.echo(f"cases written to {case_path}")


if __name__ == "__main__":
    main()
