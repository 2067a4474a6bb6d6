"""Command-line interface: detect structures, run benchmarks, generate fixtures.

Exit codes: 0 success, 2 unreadable or unusable input, 3 invalid
configuration, 4 numeric or detection failure.  All randomness flows from
--seed and every report embeds it, so outputs are reproducible.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bands import run_em_bs
from .bench import BenchError, run_suite, suite_csv
from .em import init_params, normalize_image, run_em
from .hessian import HessianError, init_from_hessian
from .imgio import ImageIOError, read_image, write_image, write_overlay
from .model import EmptyImageError, LagmixError
from .synth import CorruptionSpec, SceneError, corrupt, render_reference

EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4


def _fail(code: int, exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _guarded(fn):
    """Map package exceptions to the documented exit codes."""
    try:
        fn()
    except (ImageIOError, EmptyImageError) as exc:
        _fail(EXIT_INPUT, exc)
    except (SceneError, BenchError, ValueError) as exc:
        _fail(EXIT_CONFIG, exc)
    except (HessianError, LagmixError) as exc:
        _fail(EXIT_NUMERIC, exc)


def _dump_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        click.echo(text)


def _parse_floats(text: str, name: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError:
        raise ValueError(f"--{name} must be a comma-separated list of numbers")


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Detect thick linear structures in grayscale images."""


@main.command()
@click.argument("image", type=click.Path())
@click.option("--algo", type=click.Choice(["em", "em-bs"]), default="em", show_default=True)
@click.option(
    "--init",
    "init_mode",
    type=click.Choice(["manual", "random", "hessian"]),
    default="hessian",
    show_default=True,
)
@click.option("--angles", default=None, help="Initial normal angles in degrees, comma separated (manual init).")
@click.option("--rho", default=None, help="Initial offsets, comma separated (manual init, optional).")
@click.option("--m", "m_components", type=int, default=None, help="Component count (required for random init).")
@click.option("--nu", type=float, default=2.0, show_default=True, help="Band half-width in sigmas (em-bs).")
@click.option("--eps", type=float, default=1e-6, show_default=True)
@click.option("--max-iter", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Write the JSON report here instead of stdout.")
@click.option("--overlay", type=click.Path(), default=None, help="Write an annotated RGB overlay image.")
def detect(image, algo, init_mode, angles, rho, m_components, nu, eps, max_iter, seed, out, overlay):
    """Fit the mixture to IMAGE and report centerlines and widths."""

    def body():
        img = read_image(image)
        h = normalize_image(img)

        if init_mode == "manual":
            if angles is None:
                raise ValueError("manual init requires --angles")
            theta0 = [math.radians(a) for a in _parse_floats(angles, "angles")]
            rho0 = None
            if rho is not None:
                rho0 = _parse_floats(rho, "rho")
                if len(rho0) != len(theta0):
                    raise ValueError("--rho must list one value per angle")
            if m_components is not None and m_components != len(theta0):
                raise ValueError("--m disagrees with the number of --angles")
            pis = [1.0 / len(theta0)] * len(theta0)
            init = init_params(h, theta0, pis, rho0=rho0)
        elif init_mode == "random":
            if m_components is None or m_components < 1:
                raise ValueError("random init requires --m >= 1")
            rng = np.random.default_rng(seed)
            theta0 = rng.uniform(-math.pi / 2, math.pi / 2, size=m_components).tolist()
            pis = [1.0 / m_components] * m_components
            init = init_params(h, theta0, pis)
        else:
            init = init_from_hessian(img)
            if m_components is not None and m_components != init.m:
                raise ValueError(
                    f"--m {m_components} disagrees with detected structure count {init.m}"
                )

        if algo == "em":
            state, report = run_em(h, init, eps=eps, max_iter=max_iter)
        else:
            state, report = run_em_bs(img, init, eps=eps, max_iter=max_iter, nu=nu)

        payload = {
            "schema": "lagmix-detect/1",
            "image": str(image),
            "algorithm": algo,
            "init": init_mode,
            "seed": seed,
            "eps": eps,
            "nu": nu if algo == "em-bs" else None,
            "m": state.m,
            "components": report.components,
            "iterations": report.iterations,
            "converged": report.converged,
            "runtime_s": report.runtime_s,
            "flags": report.flags,
            "n_v": report.n_v,
        }
        _dump_json(payload, out)
        if overlay:
            write_overlay(overlay, img, state)
        for c in report.components:
            click.echo(
                "component: pi={pi:.4f} theta={theta_deg:.2f} deg "
                "rho={rho:.2f} width={width:.2f}".format(**c),
                err=True,
            )

    _guarded(body)


@main.command()
@click.argument("suite", type=click.Choice(["r1", "r2", "r3-table1", "r3-table2", "r3-hessian"]))
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed for the cell seed stream.")
@click.option("--eps", type=float, default=1e-6, show_default=True)
@click.option("--max-iter", type=int, default=1000, show_default=True)
@click.option("--nu", type=float, default=2.0, show_default=True)
@click.option("--clamp", is_flag=True, help="Clamp corrupted intensities at zero (default keeps signed values).")
@click.option("--out", type=click.Path(), default=None, help="JSON output path (default SUITE.json); a CSV summary is written alongside.")
def bench(suite, seed, eps, max_iter, nu, clamp, out):
    """Run a reproduction suite over the (sigma_n, kappa) corruption grid."""

    def body():
        result, runtimes = run_suite(
            suite, master_seed=seed, eps=eps, max_iter=max_iter, nu=nu, clamp=clamp
        )
        json_path = Path(out) if out else Path(f"{suite}.json")
        json_path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
        csv_path = json_path.with_suffix(".csv")
        csv_path.write_text(suite_csv(result, runtimes))
        click.echo(f"wrote {json_path} and {csv_path}", err=True)
        for cell in result["cells"]:
            med = cell["median"]
            click.echo(
                "cell ({:g}|{:g}): rmse_theta={:.3f} deg rmse_rho={:.3f} rmse_w={:.3f}".format(
                    cell["sigma_n"], cell["kappa"],
                    med["rmse_theta_deg"], med["rmse_rho"], med["rmse_w"],
                ),
                err=True,
            )

    _guarded(body)


@main.command()
@click.argument("scene", type=click.Choice(["r1", "r2", "r3"]))
@click.option("--sigma-n", type=float, default=0.0, show_default=True, help="Additive Gaussian noise level.")
@click.option("--kappa", type=float, default=0.0, show_default=True, help="Gaussian blur spread (0 disables).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--clamp/--no-clamp", default=True, show_default=True, help="Clamp negative intensities to zero.")
@click.option("--out", type=click.Path(), default=None, help="Image path (.pgm/.png/.npy); truth JSON is written alongside.")
def gen(scene, sigma_n, kappa, seed, clamp, out):
    """Generate a reference scene image with its ground-truth JSON."""

    def body():
        img, truth = render_reference(scene)
        spec = CorruptionSpec(
            kappa=kappa, sigma_n=sigma_n, seed=seed, noise_first=True, clamp_low=clamp
        )
        img = corrupt(img, spec)
        path = Path(out) if out else Path(f"{scene}.pgm")
        if path.suffix.lower() == ".npy":
            np.save(path, img)
        else:
            if not clamp:
                raise ValueError("unclamped output requires a .npy path")
            write_image(path, img)
        payload = {
            "schema": "lagmix-truth/1",
            "scene": scene,
            "corruption": {
                "sigma_n": sigma_n,
                "kappa": kappa,
                "seed": seed,
                "clamp_low": clamp,
                "noise_first": True,
            },
            "components": [
                {
                    "pi": c.pi,
                    "rho": c.line.rho,
                    "theta_rad": c.line.theta,
                    "theta_deg": math.degrees(c.line.theta),
                    "sigma": c.sigma,
                    "width": c.width,
                }
                for c in truth.components
            ],
        }
        truth_path = path.with_suffix(".truth.json")
        truth_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        click.echo(f"wrote {path} and {truth_path}", err=True)

    _guarded(body)


if __name__ == "__main__":
    main()
