"""Command-line front end: regenerate the tables, traces and pictures.

Exit codes: 0 success, 2 usage error, 3 a numerical contract failed.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__, blowup, extremals, fuller, hyperboloid
from .errors import ReinhardtError
from .export import SvgPlot, write_csv, write_json

FORMATS = ("csv", "json", "svg")
EXIT_CONTRACT = 3


class ContractViolation(click.ClickException):
    """A computed quantity broke one of its stated invariants."""
    exit_code = EXIT_CONTRACT


@dataclass(frozen=True)
class RunConfig:
    tol_abs: float = 1e-12
    tol_rel: float = 1e-12
    seed: int = 0
    out: Path = Path("out")
    formats: tuple[str, ...] = FORMATS
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.tol_abs > 0 and self.tol_rel > 0):
            raise click.BadParameter("tolerances must be positive")

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats

    def path(self, name: str) -> Path:
        return self.out / name

    def provenance(self) -> dict:
        return {"version": __version__,
                "tolerances": {"abs": self.tol_abs, "rel": self.tol_rel},
                "seed": self.seed,
                "params": self.params}


def _emit_json(cfg: RunConfig, name: str, payload: dict) -> None:
    body = {"provenance": cfg.provenance(), **payload}
    if cfg.wants("json"):
        write_json(cfg.path(name), body)


def _require(ok: bool, message: str) -> None:
    if not ok:
        raise ContractViolation(message)


@click.group()
@click.version_option(__version__)
@click.option("--tol-abs", type=float, default=1e-12, show_default=True,
              help="Absolute integrator tolerance.")
@click.option("--tol-rel", type=float, default=1e-12, show_default=True,
              help="Relative integrator tolerance.")
@click.option("--seed", type=int, default=0, show_default=True, help="Random seed.")
@click.option("--out", "out", type=click.Path(file_okay=False, path_type=Path),
              default=Path("out"), show_default=True, help="Output directory.")
@click.option("--format", "formats", type=click.Choice(FORMATS), multiple=True,
              help="Output formats to write (repeatable; default all).")
@click.pass_context
def main(ctx, tol_abs, tol_rel, seed, out, formats):
    """Reinhardt optimal-control computations."""
    if tol_abs <= 0 or tol_rel <= 0:
        raise click.BadParameter("tolerances must be positive", param_hint="--tol-abs/--tol-rel")
    ctx.obj = RunConfig(tol_abs, tol_rel, seed, out, tuple(formats) or FORMATS)


def _with_params(cfg: RunConfig, **params) -> RunConfig:
    return RunConfig(cfg.tol_abs, cfg.tol_rel, cfg.seed, cfg.out, cfg.formats, params)


def _guard(func):
    """Turn package errors into the contract-violation exit code."""
    import functools

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ReinhardtError as exc:
            raise ContractViolation(f"{type(exc).__name__}: {exc}") from exc
    return wrapper


# ---------------------------------------------------------------------------
# polygons


def count_straight_edges(points: np.ndarray, tol: float = 1e-9, min_run: int = 5) -> int:
    """Number of maximal runs of collinear consecutive boundary samples.

    Turning is measured by the cross product of successive unit chords;
    a straight edge is a run of at least ``min_run`` chords that do not turn.
    """
    chords = np.diff(np.vstack([points, points[:1]]), axis=0)
    lengths = np.linalg.norm(chords, axis=1)
    chords = chords[lengths > 1e-14] / lengths[lengths > 1e-14, None]
    turn = np.abs(chords[:, 0] * np.roll(chords[:, 1], -1) - chords[:, 1] * np.roll(chords[:, 0], -1))
    straight = turn < tol
    if straight.all():
        return 1
    start = int(np.argmin(straight))  # rotate so the sequence starts on a turning chord
    straight = np.roll(straight, -start)
    runs, length = 0, 0
    for flag in np.append(straight, False):
        if flag:
            length += 1
        else:
            runs += length >= min_run - 1
            length = 0
    return runs


@main.command()
@click.option("--k", "k", type=int, required=True, help="Family index k >= 1.")
@click.option("--family", type=click.Choice(["plus", "minus"]), default="plus",
              show_default=True, help="6k+2 (plus) or 6k-2 (minus) sides.")
@click.option("--samples", type=int, default=200, show_default=True,
              help="Boundary samples per arc.")
@click.pass_obj
@_guard
def polygon(cfg: RunConfig, k, family, samples):
    """Parameters and boundary of a smoothed polygon."""
    if k < 1:
        raise click.BadParameter("k must be at least 1", param_hint="--k")
    cfg = _with_params(cfg, k=k, family=family, samples=samples)
    params = extremals.solve_polygon(k, family)
    payload = {"polygon": asdict(params)}
    if params.degenerate:
        payload["note"] = "degenerate member: a rectangle of area sqrt(12)"
        _emit_json(cfg, f"polygon_{family}_{k}.json", payload)
        click.echo(f"sides={params.n_sides} degenerate area={params.area:.12f}")
        return
    pts = extremals.polygon_boundary(k, samples, family)
    edges = count_straight_edges(pts)
    area = extremals.shoelace_area(pts)
    payload["boundary"] = {"straight_edges": edges, "shoelace_area": area,
                           "convexity_margin": extremals.convexity_margin(pts)}
    _require(abs(area - params.area) < 1e-6 * params.area,
             f"boundary area {area} disagrees with the cost {params.area}")
    _emit_json(cfg, f"polygon_{family}_{k}.json", payload)
    if cfg.wants("csv"):
        write_csv(cfg.path(f"polygon_{family}_{k}.csv"), ["x", "y"], pts)
    if cfg.wants("svg"):
        SvgPlot(f"smoothed {params.n_sides}-gon").line(pts, closed=True).save(
            cfg.path(f"polygon_{family}_{k}.svg"))
    click.echo(f"sides={params.n_sides} y0={params.y0:.12f} t_sw={params.t_sw:.12f} "
               f"area={params.area:.12f} density={params.density:.12f} edges={edges}")


@main.command("density-table")
@click.option("--k-max", type=int, default=10, show_default=True)
@click.pass_obj
@_guard
def density_table(cfg: RunConfig, k_max):
    """Areas and densities of the 6k+2 and 6k-2 families."""
    if k_max < 1:
        raise click.BadParameter("k-max must be at least 1", param_hint="--k-max")
    cfg = _with_params(cfg, k_max=k_max)
    rows = []
    for k in range(1, k_max + 1):
        for family in ("plus", "minus"):
            p = extremals.solve_polygon(k, family)
            rows.append((p.n_sides, family, k, p.area, p.density))
    plus = [r[3] for r in rows if r[1] == "plus"]
    _require(all(a < b for a, b in zip(plus, plus[1:])), "6k+2 areas are not increasing")
    _require(all(a < math.pi for a in plus), "a 6k+2 area reaches pi")
    header = ["n", "family", "k", "area", "density"]
    if cfg.wants("csv"):
        write_csv(cfg.path("density_table.csv"), header, rows)
    _emit_json(cfg, "density_table.json", {"columns": header, "rows": rows})
    for r in rows:
        click.echo(f"{r[0]:4d} {r[1]:5s} {r[3]:.12f} {r[4]:.12f}")


# ---------------------------------------------------------------------------
# Fuller system


@main.group("fuller")
def fuller_group():
    """Circular and triangular Fuller systems."""


def _state_columns(times, states) -> list[list[float]]:
    return [[t, *(v for z in row for v in (z.real, z.imag))] for t, row in zip(times, states)]


STATE_HEADER = ["t", "re_z1", "im_z1", "re_z2", "im_z2", "re_z3", "im_z3"]


@fuller_group.command()
@click.option("--t-min", type=float, default=0.1, show_default=True)
@click.option("--t-max", type=float, default=10.0, show_default=True)
@click.option("--samples", type=int, default=200, show_default=True)
@click.option("--switches", type=int, default=4, show_default=True,
              help="Arcs of the triangular spiral started at q_out.")
@click.pass_obj
@_guard
def spiral(cfg: RunConfig, t_min, t_max, samples, switches):
    """Logarithmic (circular) and triangular spirals."""
    cfg = _with_params(cfg, t_min=t_min, t_max=t_max, samples=samples, switches=switches)
    times = np.linspace(t_min, t_max, samples)
    exact = np.array([fuller.log_spiral(t).array for t in times])
    run = fuller.circular_trajectory(fuller.log_spiral(t_min), t_max, samples, t_start=t_min,
                                     rtol=cfg.tol_rel, atol=cfg.tol_abs)
    drift = float(np.max(np.abs(run.states - exact)))
    tt, tri = fuller.triangular_trajectory(fuller.q_out(), switches)
    if cfg.wants("csv"):
        write_csv(cfg.path("log_spiral.csv"), STATE_HEADER, _state_columns(times, exact))
        write_csv(cfg.path("triangular_spiral.csv"), STATE_HEADER, _state_columns(tt, tri))
    if cfg.wants("svg"):
        SvgPlot("log spiral z1(t)").line(exact[:, 0]).save(cfg.path("log_spiral.svg"))
        SvgPlot("triangular spiral z1(t)").line(tri[:, 0]).save(cfg.path("triangular_spiral.svg"))
    _emit_json(cfg, "spiral.json", {"integrator_vs_closed_form": drift})
    click.echo(f"log spiral integrator drift {drift:.3e}")


@fuller_group.command()
@click.pass_obj
@_guard
def fixed(cfg: RunConfig):
    """The two fixed points of the angular return map."""
    r = fuller.scale_factor()
    t_sw = fuller.fixed_point_switch_time(r)
    q_out, q_in = fuller.q_out(), fuller.q_in()
    res_out = q_out.distance(fuller.fuller_poincare_angular(q_out))
    res_in = q_in.distance(fuller.fuller_poincare_angular(q_in))
    eigs = np.linalg.eigvals(fuller.fixed_point_jacobian())
    _require(res_out < 1e-10 and res_in < 1e-10, "fixed point residual too large")
    _require(bool(np.all(np.abs(eigs) < 0.1)), "q_out is not strongly contracting")
    payload = {
        "r_scale": r,
        "switch_time": t_sw,
        "q_out": q_out.array, "q_in": q_in.array,
        "q_out_cell": fuller.cell_coords(q_out).array,
        "q_in_cell": fuller.cell_coords(q_in).array,
        "residual_out": res_out, "residual_in": res_in,
        "jacobian_eigenvalues": [complex(e) for e in eigs],
    }
    _emit_json(cfg, "fixed_points.json", payload)
    if cfg.wants("csv"):
        write_csv(cfg.path("fixed_points.csv"), ["name", *STATE_HEADER[1:]],
                  [["q_out", *(v for z in q_out.array for v in (z.real, z.imag))],
                   ["q_in", *(v for z in q_in.array for v in (z.real, z.imag))]])
    click.echo(f"r_scale={r:.12f} t_sw={t_sw:.12f} residual_out={res_out:.2e} "
               f"|eig|max={np.abs(eigs).max():.4f}")


@fuller_group.command()
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--boundary-samples", type=int, default=None,
              help="Boundary mesh size (default 10 x samples).")
@click.pass_obj
@_guard
def basin(cfg: RunConfig, samples, boundary_samples):
    """Sampled basin-of-attraction check for q_out."""
    cfg = _with_params(cfg, samples=samples, boundary_samples=boundary_samples)
    report = fuller.basin_check(samples, cfg.seed, boundary_samples)
    payload = asdict(report) | {"ok": report.ok}
    _emit_json(cfg, "basin.json", payload)
    if cfg.wants("csv"):
        rng = np.random.default_rng(cfg.seed)
        pts = fuller.random_wall_states(min(samples, 50), rng)
        rows = []
        for n, p in enumerate(pts):
            for it in range(report.max_iterations + 1):
                rows.append([n, it, *p])
                p = fuller.cell_map_batch(p[None, :])[0]
        write_csv(cfg.path("basin_iterates.csv"), ["orbit", "iteration", "r2", "psi", "theta2"],
                  rows)
    click.echo(f"converged: {report.converged}/{report.started}")
    click.echo(f"max iterations: {report.max_iterations}")
    click.echo(f"boundary escapes: {report.boundary_escapes}/{report.boundary_samples}")
    click.echo(f"table violations: {sum(report.row_violations.values())}")
    click.echo(f"F^2(D3) escapes: {report.d3_twice_escapes}/{report.d3_twice_samples}")
    _require(report.ok, "basin check failed")


@fuller_group.command()
@click.option("--t-max", type=float, default=40.0, show_default=True)
@click.option("--samples", type=int, default=801, show_default=True)
@click.pass_obj
@_guard
def special(cfg: RunConfig, t_max, samples):
    """The circular trajectory through (1, 2i, 2) and its base-space image."""
    cfg = _with_params(cfg, t_max=t_max, samples=samples)
    crossing = fuller.special_crossing_time()
    times, moduli = fuller.special_trajectory(t_max, samples)
    limit = moduli[-1]
    _emit_json(cfg, "special.json", {"crossing_time": crossing, "final_moduli": limit,
                                     "stable_equilibrium": fuller.STABLE_EQUILIBRIUM})
    if cfg.wants("csv"):
        write_csv(cfg.path("special.csv"), ["t", "x2", "x3"],
                  [[t, *m] for t, m in zip(times, moduli)])
    if cfg.wants("svg"):
        plot = SvgPlot("base space").line(fuller.base_domain_outline(), "#888888", closed=True)
        plot.line(moduli, label="special trajectory")
        for e2 in (1, -1):
            for e3 in (1, -1):
                for x2, x3 in ((0.5, 0.2), (1.0, 0.6), (1.5, 1.2), (0.3, 0.1)):
                    if fuller.in_base_domain(x2, x3):
                        line = fuller.base_streamline(fuller.BaseSpacePoint(x2, x3, e2, e3))
                        plot.line(line, "#bbbbbb", 0.8)
        plot.dots([fuller.STABLE_EQUILIBRIUM], "#000000", 3, "q+*")
        plot.save(cfg.path("special.svg"))
    click.echo(f"crossing time {crossing:.6f}; final (x2, x3) = ({limit[0]:.6f}, {limit[1]:.6f})")


# ---------------------------------------------------------------------------
# blowup and chaos


@main.command()
@click.option("--max-r", type=float, default=0.25, show_default=True)
@click.option("--step", type=float, default=5e-4, show_default=True)
@click.pass_obj
@_guard
def unstable(cfg: RunConfig, max_r, step):
    """Trace the unstable curve of the outward fixed point."""
    cfg = _with_params(cfg, max_r=max_r, step=step)
    curve = blowup.unstable_curve(max_r, step)
    _require(curve.radii_increase, "an iterate moved back towards the exceptional divisor")
    _require(curve.other_switch_min > 0, "switching order is not cyclic")
    payload = {"exit_onset": curve.exit_onset, "boundary_hit": curve.boundary_hit,
               "points": len(curve.points), "x_out": blowup.X_OUT}
    _emit_json(cfg, "unstable.json", payload)
    if cfg.wants("csv"):
        write_csv(cfg.path("unstable_curve.csv"), ["r", "xt21", "lt11", "lt21"], curve.points)
    if cfg.wants("svg"):
        rr = np.linspace(0.17, max(curve.points[-1, 0], curve.boundary_hit[0]) + 0.02, 100)
        SvgPlot("unstable curve", equal_aspect=False).line(
            curve.points[:, :2], label="unstable curve").line(
            np.column_stack([rr, blowup.SQRT3 - 1 / rr]), "#d62728",
            label="star boundary").save(cfg.path("unstable_curve.svg"))
        plot = SvgPlot("outward triangular spirals")
        for rot in (0, 2, 4):
            plot.line(blowup.outward_spiral(rotation=rot))
        plot.save(cfg.path("triangular_spirals.svg"))
    click.echo(f"boundary hit near (r, xt21) = ({curve.boundary_hit[0]:.4f}, "
               f"{curve.boundary_hit[1]:.4f}); exit onset r = {curve.exit_onset:.4f}")


@main.command()
@click.option("--t-max", type=float, default=20.0, show_default=True)
@click.option("--samples", type=int, default=2001, show_default=True)
@click.pass_obj
@_guard
def chaos(cfg: RunConfig, t_max, samples):
    """|w|(t) for two nearby starts at angular momentum 3 and 2.5."""
    cfg = _with_params(cfg, t_max=t_max, samples=samples)
    summary = {}
    plot = SvgPlot("|w|(t)", equal_aspect=False)
    for a0 in (3.0, 2.5):
        run = hyperboloid.chaos_sweep(a0, t_max=t_max, n_samples=samples)
        summary[str(a0)] = {"max_divergence": float(run.divergence.max()),
                            "stop_reason": run.stop_reason}
        if cfg.wants("csv"):
            write_csv(cfg.path(f"chaos_A{a0}.csv"), ["t", "abs_w_1", "abs_w_2"],
                      np.column_stack([run.times, *run.abs_w]))
        for w in run.abs_w:
            plot.line(np.column_stack([run.times, w]), label=f"A0={a0}")
    if cfg.wants("svg"):
        plot.save(cfg.path("chaos.svg"))
    _emit_json(cfg, "chaos.json", summary)
    for a0, s in summary.items():
        click.echo(f"A0={a0}: max divergence {s['max_divergence']:.4f}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
