"""Command line front end: run configuration, orchestration, file output.

Three subcommands cover the package's capabilities. `converge` runs a
manufactured-solution mesh refinement study and writes the error table,
`fhn` integrates the excitable-media system and writes field snapshots,
`weights` tabulates the memory quadrature weights for a kernel. Every run
records its full configuration in a manifest file next to its outputs, so
a result can be reproduced from the manifest alone.

Configuration is plain key = value text with sections (TOML syntax). Every
value can be overridden from the command line. The environment variable
GBHFEM_THREADS caps the BLAS thread pools; leave it unset for whatever the
linked BLAS chooses, set it to 1 for byte-reproducible tables.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:       # Python < 3.11
    import tomli as tomllib

from .analysis import format_table, run_study, write_csv
from .assembly import ProblemCoefficients
from .kernel import KernelSpec, build_weights, exponential, no_kernel, power_law
from .linalg import LinearSolverConfig, SolverError
from .mesh import Mesh, build_structured_mesh
from .mms import case as manufactured_case
from .space import NEUMANN, FemFunction, FunctionSpace
from .stepper import (FhnCoefficients, NewtonConfig, NewtonError, Problem,
                      TimeGrid, run_fhn)

THREAD_ENV_VAR = "GBHFEM_THREADS"


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Complete description of one run. Immutable; compare by value.

    The defaults reproduce the reference verification protocol
    alpha = beta = delta = nu = 1, gamma = 0.5. The kernel fields matter
    only for `fhn` and `weights`; each convergence case carries its own
    kernel. `dt_rule` selects between a fixed step `dt` and the
    mesh-proportional step `dt_over_h * h`.
    """

    command: str = "converge"
    case: str = "smooth-exp-2d"
    dim: int = 2
    meshes: tuple = (4, 8, 16, 32, 64)
    t_final: float = 1.0
    dt_rule: str = "proportional"
    dt: float = 0.2
    dt_over_h: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.5
    delta: int = 1
    nu: float = 1.0
    etas: tuple = (0.0, 1.0)
    kernel_kind: str = "power"        # none | constant | exponential | power
    kernel_alpha: float = 0.5
    kernel_rate: float = 1.0
    epsilon: float = 0.02
    rho: float = 0.5
    extent: float = 2.5
    fhn_mesh: int = 48
    stride: int = 100
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    solver_method: str = "auto"
    out_dir: str = "runs"


# (field name, config section, key within the section)
_CONFIG_LAYOUT = (
    ("command", "run", "command"),
    ("case", "run", "case"),
    ("dim", "run", "dim"),
    ("meshes", "run", "meshes"),
    ("t_final", "run", "t_final"),
    ("dt_rule", "run", "dt_rule"),
    ("dt", "run", "dt"),
    ("dt_over_h", "run", "dt_over_h"),
    ("out_dir", "run", "out_dir"),
    ("alpha", "coefficients", "alpha"),
    ("beta", "coefficients", "beta"),
    ("gamma", "coefficients", "gamma"),
    ("delta", "coefficients", "delta"),
    ("nu", "coefficients", "nu"),
    ("etas", "coefficients", "etas"),
    ("kernel_kind", "kernel", "kind"),
    ("kernel_alpha", "kernel", "alpha"),
    ("kernel_rate", "kernel", "rate"),
    ("epsilon", "fhn", "epsilon"),
    ("rho", "fhn", "rho"),
    ("extent", "fhn", "extent"),
    ("fhn_mesh", "fhn", "mesh"),
    ("stride", "fhn", "stride"),
    ("newton_tol", "solver", "newton_tol"),
    ("newton_max_iter", "solver", "newton_max_iter"),
    ("solver_method", "solver", "method"),
)

_INT_FIELDS = {"dim", "delta", "fhn_mesh", "stride", "newton_max_iter"}
_STR_FIELDS = {"command", "case", "dt_rule", "kernel_kind", "solver_method",
               "out_dir"}
_INT_TUPLE_FIELDS = {"meshes"}
_FLOAT_TUPLE_FIELDS = {"etas"}


def _toml_value(value) -> str:
    if isinstance(value, bool):
        raise TypeError("no boolean config fields")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        # repr round-trips exactly and happens to be valid TOML
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def serialize_config(config: RunConfig) -> str:
    """Config as sectioned key = value text; parse_config inverts exactly."""
    lines = []
    current = None
    for field, section, key in _CONFIG_LAYOUT:
        if section != current:
            if lines:
                lines.append("")
            lines.append(f"[{section}]")
            current = section
        lines.append(f"{key} = {_toml_value(getattr(config, field))}")
    return "\n".join(lines) + "\n"


def _coerce(field: str, value):
    bad = ValueError(f"config field {field!r} has bad value {value!r}")
    if field in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad
        return value
    if field in _STR_FIELDS:
        if not isinstance(value, str):
            raise bad
        return value
    if field in _INT_TUPLE_FIELDS:
        if not isinstance(value, list) or any(
                isinstance(v, bool) or not isinstance(v, int) for v in value):
            raise bad
        return tuple(value)
    if field in _FLOAT_TUPLE_FIELDS:
        if not isinstance(value, list) or any(
                isinstance(v, bool) or not isinstance(v, (int, float))
                for v in value):
            raise bad
        return tuple(float(v) for v in value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise bad
    return float(value)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Read sectioned key = value text, filling unmentioned fields from base.

    Accepts manifest files as well; their extra [manifest] section is
    ignored, so a recorded run can be replayed directly from its manifest.
    """
    data = tomllib.loads(text)
    known = {(section, key): field for field, section, key in _CONFIG_LAYOUT}
    found = {}
    for section, content in data.items():
        if section == "manifest":
            continue
        if not isinstance(content, dict):
            raise ValueError(f"top-level key {section!r} does not belong to "
                             "any section")
        for key, value in content.items():
            field = known.get((section, key))
            if field is None:
                raise ValueError(f"unrecognized config entry [{section}] {key}")
            found[field] = _coerce(field, value)
    return replace(base if base is not None else RunConfig(), **found)


def kernel_from_config(config: RunConfig) -> KernelSpec:
    kind = config.kernel_kind
    if kind == "none":
        return no_kernel()
    if kind == "constant":
        return exponential(0.0)
    if kind == "exponential":
        return exponential(config.kernel_rate)
    if kind == "power":
        return power_law(config.kernel_alpha)
    raise ValueError(f"unknown kernel kind {kind!r}; choose none, constant, "
                     "exponential or power")


def validate_config(config: RunConfig) -> None:
    """Raise ValueError on the first bad field. Runs before any file output."""
    if config.command not in ("converge", "fhn", "weights"):
        raise ValueError(f"unknown command {config.command!r}")
    if not config.etas:
        raise ValueError("need at least one eta value")
    for eta in config.etas:
        ProblemCoefficients(alpha=config.alpha, beta=config.beta,
                            gamma=config.gamma, delta=config.delta,
                            nu=config.nu, eta=eta)
    if config.dt_rule not in ("fixed", "proportional"):
        raise ValueError(f"dt_rule must be 'fixed' or 'proportional', "
                         f"got {config.dt_rule!r}")
    if config.t_final <= 0.0:
        raise ValueError(f"t_final must be positive, got {config.t_final}")
    if config.dt <= 0.0:
        raise ValueError(f"dt must be positive, got {config.dt}")
    if config.dt_over_h <= 0.0:
        raise ValueError(f"dt_over_h must be positive, got {config.dt_over_h}")
    NewtonConfig(abs_tol=config.newton_tol, max_iter=config.newton_max_iter)
    LinearSolverConfig(method=config.solver_method)

    if config.command == "converge":
        manufactured_case(config.case)
        if int(config.case[-2]) != config.dim:
            raise ValueError(f"case {config.case!r} does not match "
                             f"dim = {config.dim}")
        if not config.meshes:
            raise ValueError("need at least one mesh size")
        if any(not isinstance(n, int) or n < 1 for n in config.meshes):
            raise ValueError(f"mesh sizes must be integers >= 1, "
                             f"got {config.meshes}")
        if any(b <= a for a, b in zip(config.meshes, config.meshes[1:])):
            raise ValueError(f"mesh sizes must increase strictly, "
                             f"got {config.meshes}")
    else:
        kernel_from_config(config)
        if config.dt_rule != "fixed":
            raise ValueError(f"{config.command} uses a fixed time step; "
                             "set dt, not dt_over_h")
        if round(config.t_final / config.dt) < 1:
            raise ValueError(f"t_final = {config.t_final} is shorter than "
                             f"one step dt = {config.dt}")

    if config.command == "fhn":
        FhnCoefficients(alpha=config.alpha, beta=config.beta,
                        gamma=config.gamma, delta=config.delta,
                        nu=config.nu, eta=config.etas[0],
                        epsilon=config.epsilon, rho=config.rho)
        if len(config.etas) != 1:
            raise ValueError(f"fhn takes a single eta, got {config.etas}")
        if config.extent <= 0.0:
            raise ValueError(f"extent must be positive, got {config.extent}")
        if config.fhn_mesh < 1:
            raise ValueError(f"fhn mesh must be >= 1, got {config.fhn_mesh}")
        if config.stride < 1:
            raise ValueError(f"stride must be >= 1, got {config.stride}")


# ---------------------------------------------------------------------------
# file output
# ---------------------------------------------------------------------------

def content_hash(data: bytes) -> str:
    """Content hash compatible with git's blob object ids."""
    header = b"blob %d\x00" % len(data)
    return hashlib.sha1(header + data).hexdigest()


def write_manifest(config: RunConfig, out_dir, extra_inputs=None) -> Path:
    """Record the full configuration plus content hashes of the run inputs.

    extra_inputs maps labels to raw bytes (for instance the config file a
    run was started from). The manifest is itself a valid config file.
    """
    text = serialize_config(config)
    hashes = {"config": content_hash(text.encode())}
    for name, data in (extra_inputs or {}).items():
        hashes[name] = content_hash(data)
    lines = [text, "[manifest]",
             f"threads = {json.dumps(os.environ.get(THREAD_ENV_VAR, ''))}",
             "", "[manifest.input_sha1]"]
    lines += [f"{name} = {json.dumps(hashes[name])}" for name in sorted(hashes)]
    path = Path(out_dir) / "manifest.toml"
    path.write_text("\n".join(lines) + "\n")
    return path


_VTK_CELL_TYPE = {2: 5, 3: 10}    # triangle, tetrahedron


def write_vtk(mesh: Mesh, fields, path) -> None:
    """Write nodal scalar fields as a legacy ASCII unstructured-grid file.

    fields maps names to FemFunctions or plain coefficient arrays with one
    value per mesh vertex. The output loads in any standard VTK viewer.
    """
    points = np.zeros((mesh.n_vertices, 3))
    points[:, :mesh.dim] = mesh.vertices
    corners = mesh.cells.shape[1]
    out = ["# vtk DataFile Version 3.0", "gbhfem fields", "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_vertices} float"]
    out += [" ".join(f"{c:.9g}" for c in p) for p in points]
    out.append(f"CELLS {mesh.n_cells} {mesh.n_cells * (corners + 1)}")
    out += [f"{corners} " + " ".join(str(v) for v in cell)
            for cell in mesh.cells]
    out.append(f"CELL_TYPES {mesh.n_cells}")
    out += [str(_VTK_CELL_TYPE[mesh.dim])] * mesh.n_cells
    out.append(f"POINT_DATA {mesh.n_vertices}")
    for name, f in fields.items():
        if not name or any(ch.isspace() for ch in name):
            raise ValueError(f"field name {name!r} will not survive in a "
                             "VTK header")
        values = np.asarray(f.coeffs if isinstance(f, FemFunction) else f,
                            dtype=float)
        if values.shape != (mesh.n_vertices,):
            raise ValueError(f"field {name!r} has shape {values.shape}, "
                             f"expected ({mesh.n_vertices},)")
        out.append(f"SCALARS {name} float 1")
        out.append("LOOKUP_TABLE default")
        out += [f"{v:.9g}" for v in values]
    try:
        Path(path).write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cli_converge(config: RunConfig, extra_inputs=None) -> int:
    """Mesh refinement study; exit 0 when every row solved and the final
    rates sit in [0.85, 1.15]."""
    validate_config(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(config, out, extra_inputs)

    base = ProblemCoefficients(alpha=config.alpha, beta=config.beta,
                               gamma=config.gamma, delta=config.delta,
                               nu=config.nu, eta=config.etas[0])
    newton = NewtonConfig(abs_tol=config.newton_tol,
                          max_iter=config.newton_max_iter)
    linear = LinearSolverConfig(method=config.solver_method)

    def note(row):
        print(f"  n = {row.n:<4d} dt = {row.dt:<10.4g} "
              f"done in {row.wall_time:.1f}s", file=sys.stderr)

    try:
        result = run_study(config.case, config.meshes, etas=config.etas,
                           t_final=config.t_final,
                           dt_over_h=config.dt_over_h,
                           dt=config.dt if config.dt_rule == "fixed" else None,
                           base_coeffs=base, newton=newton, linear=linear,
                           progress=note)
    except (NewtonError, SolverError) as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return 1

    write_csv(result, out / "study.csv")
    table = format_table(result)
    (out / "study.txt").write_text(table + "\n")
    print(table)

    final = result.rows[-1]
    bad = {eta: rate for eta, rate in final.rates.items()
           if rate is not None and not 0.85 <= rate <= 1.15}
    if bad:
        detail = ", ".join(f"eta = {eta:g}: {rate:.3f}"
                           for eta, rate in bad.items())
        print(f"final-row rate outside [0.85, 1.15]: {detail}",
              file=sys.stderr)
        return 1
    return 0


def cli_fhn(config: RunConfig, extra_inputs=None) -> int:
    """Excitable-media run with snapshots of u and v every stride steps."""
    validate_config(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(config, out, extra_inputs)

    mesh = build_structured_mesh(2, config.fhn_mesh,
                                 extent=(0.0, config.extent))
    space = FunctionSpace(mesh, bc_kind=NEUMANN)
    coeffs = FhnCoefficients(alpha=config.alpha, beta=config.beta,
                             gamma=config.gamma, delta=config.delta,
                             nu=config.nu, eta=config.etas[0],
                             epsilon=config.epsilon, rho=config.rho)
    n_steps = max(1, round(config.t_final / config.dt))
    grid = TimeGrid(config.t_final, n_steps)

    # excited left half against a recovering bottom half
    mid = config.extent / 2.0
    u0 = np.where(mesh.vertices[:, 0] < mid, 1.0, 0.0)
    v0 = np.where(mesh.vertices[:, 1] < mid, 0.1, 0.0)

    def snap(step, u, v):
        write_vtk(mesh, {"u": u, "v": v}, out / f"state_{step:06d}.vtk")

    snap(0, u0, v0)
    written = [0]

    def watch(k, u_hist, v_hist):
        if k % config.stride == 0 or k == n_steps:
            snap(k, u_hist.snapshots[k], v_hist.snapshots[k])
            written.append(k)

    try:
        u_hist, _ = run_fhn(Problem(space=space, coeffs=coeffs,
                                    kernel=kernel_from_config(config),
                                    grid=grid, u0=FemFunction(space, u0)),
                            v0=v0, callback=watch,
                            newton=NewtonConfig(abs_tol=config.newton_tol,
                                                max_iter=config.newton_max_iter),
                            linear=LinearSolverConfig(
                                method=config.solver_method))
    except (NewtonError, SolverError) as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return 1

    u_max = float(np.abs(u_hist.snapshots).max())
    print(f"completed {n_steps} steps to t = {grid.t_final:g}; "
          f"max |u| = {u_max:.4g}; {len(written)} snapshots in {out}")
    return 0


def cli_weights(config: RunConfig, extra_inputs=None) -> int:
    """Tabulate the memory quadrature weights for the configured kernel."""
    validate_config(config)
    kern = kernel_from_config(config)
    n_steps = max(1, round(config.t_final / config.dt))
    table = build_weights(kern, config.dt, n_steps)

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(config, out, extra_inputs)
    path = out / "weights.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lag", "weight"])
        for lag, w in enumerate(table.w):
            writer.writerow([lag, f"{w:.17g}"])
    print(f"{table.w.size} weights ({table.method}) for dt = {table.dt:g} "
          f"in {path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

# per-subcommand deviations from the RunConfig defaults
_COMMAND_DEFAULTS = {
    "fhn": {"t_final": 200.0, "dt_rule": "fixed", "alpha": 0.0,
            "etas": (0.0001,)},
    "weights": {"dt_rule": "fixed", "t_final": 2.0},
}

_FLAG_FIELDS = ("case", "dim", "meshes", "t_final", "dt", "dt_over_h",
                "dt_rule", "etas", "alpha", "beta", "gamma", "delta", "nu",
                "kernel_kind", "kernel_alpha", "kernel_rate", "epsilon",
                "rho", "extent", "fhn_mesh", "stride", "newton_tol",
                "newton_max_iter", "solver_method", "out_dir")


def _comma_ints(text: str) -> tuple:
    return tuple(int(part) for part in text.split(","))


def _comma_floats(text: str) -> tuple:
    return tuple(float(part) for part in text.split(","))


def _add_options(sub: argparse.ArgumentParser) -> None:
    # defaults stay None so a config file loses only to flags actually given
    sub.add_argument("--config", help="config or manifest file to start from")
    sub.add_argument("--case", help="manufactured case, family or full name")
    sub.add_argument("--meshes", type=_comma_ints,
                     help="comma-separated cells per side, e.g. 4,8,16")
    sub.add_argument("--dim", type=int, choices=(2, 3))
    sub.add_argument("--eta", dest="etas", type=_comma_floats,
                     help="memory coupling, comma-separated for studies")
    sub.add_argument("--T", dest="t_final", type=float, help="final time")
    sub.add_argument("--dt", type=float, help="fixed time step")
    sub.add_argument("--dt-over-h", dest="dt_over_h", type=float,
                     help="time step per unit mesh width")
    sub.add_argument("--dt-rule", dest="dt_rule",
                     choices=("fixed", "proportional"))
    sub.add_argument("--out", dest="out_dir", help="output directory")
    sub.add_argument("--alpha", type=float, help="advection coefficient")
    sub.add_argument("--beta", type=float, help="reaction coefficient")
    sub.add_argument("--gamma", type=float, help="reaction root in (0, 1)")
    sub.add_argument("--delta", type=int, help="nonlinearity power")
    sub.add_argument("--nu", type=float, help="diffusion coefficient")
    sub.add_argument("--kernel", dest="kernel_kind",
                     choices=("none", "constant", "exponential", "power"))
    sub.add_argument("--kernel-alpha", dest="kernel_alpha", type=float,
                     help="power-law exponent in (0, 1]")
    sub.add_argument("--kernel-rate", dest="kernel_rate", type=float,
                     help="exponential decay rate")
    sub.add_argument("--epsilon", type=float, help="recovery rate")
    sub.add_argument("--rho", type=float, help="recovery damping")
    sub.add_argument("--extent", type=float, help="square side length")
    sub.add_argument("--mesh", dest="fhn_mesh", type=int,
                     help="cells per side of the excitable-media mesh")
    sub.add_argument("--stride", type=int, help="steps between snapshots")
    sub.add_argument("--newton-tol", dest="newton_tol", type=float)
    sub.add_argument("--newton-max-iter", dest="newton_max_iter", type=int)
    sub.add_argument("--solver", dest="solver_method",
                     choices=("auto", "direct", "bicgstab"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbhfem",
        description="Finite element solver for advection-diffusion-reaction "
                    "equations with memory.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_options(sub.add_parser(
        "converge", help="mesh refinement study against a manufactured "
                         "solution"))
    _add_options(sub.add_parser(
        "fhn", help="excitable-media run with VTK snapshots"))
    _add_options(sub.add_parser(
        "weights", help="tabulate memory quadrature weights"))
    return parser


def _resolve_case(case: str, dim: int) -> tuple:
    name = case if case.endswith(("-2d", "-3d")) else f"{case}-{dim}d"
    return name, int(name[-2])


def build_config(args: argparse.Namespace) -> tuple:
    """Merge defaults, config file and flags; returns (config, extra_inputs)."""
    config = RunConfig(command=args.command)
    config = replace(config, **_COMMAND_DEFAULTS.get(args.command, {}))
    extra_inputs = {}
    if args.config:
        raw = Path(args.config).read_bytes()
        extra_inputs["config_file"] = raw
        config = parse_config(raw.decode(), base=config)
        config = replace(config, command=args.command)

    overrides = {}
    for name in _FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if "dt_rule" not in overrides:
        if "dt" in overrides and "dt_over_h" in overrides:
            raise ValueError("both --dt and --dt-over-h given; "
                             "pass --dt-rule to disambiguate")
        if "dt" in overrides:
            overrides["dt_rule"] = "fixed"
        elif "dt_over_h" in overrides:
            overrides["dt_rule"] = "proportional"
    config = replace(config, **overrides)

    if config.command == "converge":
        name, dim = _resolve_case(config.case, config.dim)
        config = replace(config, case=name, dim=dim)
    return config, extra_inputs


def _apply_thread_env() -> None:
    # explicit BLAS settings in the environment win over the shorthand
    value = os.environ.get(THREAD_ENV_VAR, "")
    if value.isdigit():
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, value)


_RUNNERS = {"converge": cli_converge, "fhn": cli_fhn, "weights": cli_weights}


def main(argv=None) -> int:
    _apply_thread_env()
    args = build_parser().parse_args(argv)
    try:
        config, extra_inputs = build_config(args)
        validate_config(config)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return _RUNNERS[config.command](config, extra_inputs)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
