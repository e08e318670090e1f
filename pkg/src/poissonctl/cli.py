"""Batch front end: config-driven pipelines writing plotter-ready artifacts.

Configs are flat ``section.key = value`` text files (``#`` starts a
comment).  Five presets ship with the package and can be named directly:
``ex61``, ``ex62``, ``ex63``, ``compliance-disk``, ``annulus-regularity``.

Subcommands
-----------
``mesh``       build the domain mesh and save it
``solve``      one forward solve for a given or configured source
``optimize``   full pipeline: mesh, descent loop, optimality report
``kkt``        audit an externally supplied control against a config
``analyze``    refinement study of the singular-gradient integrals

Exit codes: 0 success (for ``optimize``: stop-rule convergence),
2 iteration cap reached, 3 solver failure, 4 bad config or input.
"""

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .analysis import regularity_integral
from .constraints import ConstraintSpec
from .errors import ConfigError, PoissonctlError, SolverError
from .kkt import extract_bang_set, format_report, kkt_report
from .mesh import (
    generate_annulus,
    generate_disk,
    generate_disk_with_hole,
    generate_rectangle,
    load_mesh,
    save_mesh,
)
from .optimizer import OptimizerConfig, run
from .poisson import (
    Control,
    ScalarField,
    load_atoms,
    load_field,
    resolvent,
    save_atoms,
    save_field,
)
from .problems import CostSpec, adjoint, coefficient_field

PRESETS = ("ex61", "ex62", "ex63", "compliance-disk", "annulus-regularity")

# key -> (converter name, default); None default means "no default".
_SCHEMA = {
    "domain.kind": ("str", None),
    "domain.h": ("float", None),
    "domain.radius": ("float", 1.0),
    "domain.inner_radius": ("float", 1.0),
    "domain.outer_radius": ("float", 2.0),
    "domain.hole_center_x": ("float", 0.4),
    "domain.hole_center_y": ("float", 0.0),
    "domain.hole_radius": ("float", 0.25),
    "domain.width": ("float", 1.0),
    "domain.height": ("float", 1.0),
    "cost.kind": ("str", None),
    "cost.coefficient": ("str", ""),
    "cost.exponent": ("float", 4.0),
    "constraint.kind": ("str", None),
    "constraint.mass": ("float", None),
    "constraint.lower": ("float", 0.0),
    "constraint.upper": ("float", 1.0),
    "optimizer.step_rule": ("str", "armijo"),
    "optimizer.tol": ("float", 1e-6),
    "optimizer.max_iters": ("int", 500),
    "optimizer.cg_tol": ("float", 1e-10),
    "output.dir": ("str", "run-out"),
    "emit.fields": ("bool", True),
    "emit.history": ("bool", True),
    "emit.kkt": ("bool", True),
    "emit.levelsets": ("bool", True),
    "solve.source": ("str", "const:1"),
    "analysis.q": ("floats", (1.0, 2.0)),
    "analysis.refinements": ("int", 3),
    "analysis.source": ("str", "const:1"),
}

_DOMAIN_KINDS = ("disk", "annulus", "disk_with_hole", "rectangle")


def _convert(key, kind, text, problems):
    try:
        if kind == "str":
            return text
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            if text.lower() in ("true", "yes", "1", "on"):
                return True
            if text.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind == "floats":
            return tuple(float(p) for p in text.replace(",", " ").split())
    except ValueError:
        problems.append("%s: expected %s, got %r" % (key, kind, text))
        return None
    raise AssertionError("unhandled schema kind %r" % kind)


@dataclass
class RunConfig:
    """Typed view of a parsed config; sections absent from the file stay None."""

    values: dict = field(default_factory=dict)

    def get(self, key):
        return self.values.get(key, _SCHEMA[key][1])

    def has(self, key):
        return self.values.get(key) is not None or _SCHEMA[key][1] is not None


def parse_config(text):
    """Parse and type-check config text, collecting every problem at once."""
    problems = []
    values = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append("line %d: expected 'section.key = value'" % no)
            continue
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            problems.append("line %d: unknown key %r" % (no, key))
            continue
        converted = _convert(key, _SCHEMA[key][0], val, problems)
        if converted is not None:
            values[key] = converted
    if problems:
        raise ConfigError(problems)
    return RunConfig(values=values)


def apply_overrides(config, overrides):
    problems = []
    for item in overrides:
        if "=" not in item:
            problems.append("override %r: expected section.key=value" % item)
            continue
        key, _, val = item.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            problems.append("override: unknown key %r" % key)
            continue
        converted = _convert(key, _SCHEMA[key][0], val, problems)
        if converted is not None:
            config.values[key] = converted
    if problems:
        raise ConfigError(problems)


def domain_area(config):
    """Analytic area of the configured domain."""
    kind = config.get("domain.kind")
    if kind == "disk":
        r = config.get("domain.radius")
        return math.pi * r * r
    if kind == "annulus":
        a, b = config.get("domain.inner_radius"), config.get("domain.outer_radius")
        return math.pi * (b * b - a * a)
    if kind == "disk_with_hole":
        r, rh = config.get("domain.radius"), config.get("domain.hole_radius")
        return math.pi * (r * r - rh * rh)
    return config.get("domain.width") * config.get("domain.height")


def build_mesh(config):
    kind = config.get("domain.kind")
    h = config.get("domain.h")
    if kind == "disk":
        return generate_disk(config.get("domain.radius"), h)
    if kind == "annulus":
        return generate_annulus(
            config.get("domain.inner_radius"), config.get("domain.outer_radius"), h
        )
    if kind == "disk_with_hole":
        return generate_disk_with_hole(
            config.get("domain.radius"),
            (config.get("domain.hole_center_x"), config.get("domain.hole_center_y")),
            config.get("domain.hole_radius"),
            h,
        )
    return generate_rectangle(
        config.get("domain.width"), config.get("domain.height"), h
    )


def _require(config, keys, problems):
    for key in keys:
        if not config.has(key):
            problems.append("%s is required" % key)


def validate_domain(config, problems):
    _require(config, ("domain.kind", "domain.h"), problems)
    kind = config.get("domain.kind")
    if kind is not None and kind not in _DOMAIN_KINDS:
        problems.append(
            "domain.kind: unknown kind %r (expected one of %s)"
            % (kind, ", ".join(_DOMAIN_KINDS))
        )
    h = config.get("domain.h")
    if h is not None and not h > 0.0:
        problems.append("domain.h must be positive")


def make_cost_spec(config, problems):
    if not config.has("cost.kind"):
        problems.append("cost.kind is required")
        return None
    try:
        return CostSpec(
            kind=config.get("cost.kind"),
            coefficient=config.get("cost.coefficient"),
            exponent=config.get("cost.exponent"),
        )
    except ConfigError as err:
        problems.extend("cost: " + p for p in err.problems)
        return None


def make_constraint_spec(config, problems, check_box=True):
    missing = [k for k in ("constraint.kind", "constraint.mass") if not config.has(k)]
    if missing:
        problems.extend("%s is required" % k for k in missing)
        return None
    try:
        spec = ConstraintSpec(
            kind=config.get("constraint.kind"),
            mass=config.get("constraint.mass"),
            lower=config.get("constraint.lower"),
            upper=config.get("constraint.upper"),
        )
    except PoissonctlError as err:
        problems.append("constraint: %s" % err)
        return None
    if (
        check_box
        and spec.kind in ("box_mass", "box_mass_lower")
        and config.has("domain.kind")
        and config.get("domain.kind") in _DOMAIN_KINDS
    ):
        area = domain_area(config)
        if not spec.lower * area < spec.mass <= spec.upper * area:
            problems.append(
                "constraint.mass: requires lower*|Omega| < mass <= upper*|Omega|, "
                "got %g not in (%g, %g]" % (spec.mass, spec.lower * area, spec.upper * area)
            )
    return spec


def make_optimizer_config(config, problems):
    try:
        return OptimizerConfig(
            step_rule=config.get("optimizer.step_rule"),
            tol=config.get("optimizer.tol"),
            max_iters=config.get("optimizer.max_iters"),
            cg_tol=config.get("optimizer.cg_tol"),
        )
    except ConfigError as err:
        problems.extend("optimizer: " + p for p in err.problems)
        return None


def write_history(history, path):
    lines = ["n,cost,fw_gap,lambda,step"]
    for rec in history:
        lines.append(
            "%d,%.17g,%.17g,%.17g,%.17g"
            % (rec.n, rec.cost, rec.fw_gap, rec.lam, rec.step)
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_levelset(geom, path):
    lines = ["x1,y1,x2,y2"]
    for seg in geom.segments:
        lines.append("%.17g,%.17g,%.17g,%.17g" % tuple(seg))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _say(quiet, message):
    if not quiet:
        print(message)


def _load_config(args):
    if args.config is None:
        return RunConfig()
    path = args.config
    if os.path.exists(path):
        with open(path) as fh:
            text = fh.read()
    else:
        name = path[:-4] if path.endswith(".cfg") else path
        if name in PRESETS:
            text = (
                resources.files("poissonctl") / "presets" / (name + ".cfg")
            ).read_text()
        else:
            raise ConfigError(
                ["config %r is neither a file nor a preset (presets: %s)"
                 % (path, ", ".join(PRESETS))]
            )
    config = parse_config(text)
    apply_overrides(config, args.override)
    return config


def _load_control(mesh, args):
    density = None
    atoms = []
    if args.density:
        density = load_field(mesh, args.density)
    if args.atoms:
        atoms = load_atoms(args.atoms)
    if density is None and not atoms:
        return None
    return Control(density=density, atoms=atoms)


def _out_dir(args, config):
    out = args.out if args.out else config.get("output.dir")
    os.makedirs(out, exist_ok=True)
    return out


def cmd_mesh(args):
    config = _load_config(args)
    problems = []
    validate_domain(config, problems)
    if problems:
        raise ConfigError(problems)
    out = _out_dir(args, config)
    msh = build_mesh(config)
    save_mesh(msh, os.path.join(out, "mesh.txt"))
    _say(args.quiet, "mesh: %d vertices, %d triangles -> %s"
         % (msh.n_vertices, msh.n_triangles, os.path.join(out, "mesh.txt")))
    return 0


def cmd_solve(args):
    config = _load_config(args)
    problems = []
    if args.mesh is None:
        validate_domain(config, problems)
    if problems:
        raise ConfigError(problems)
    out = _out_dir(args, config)
    if args.mesh:
        msh = load_mesh(args.mesh)
    else:
        msh = build_mesh(config)
        save_mesh(msh, os.path.join(out, "mesh.txt"))
    control = _load_control(msh, args)
    if control is None:
        source = coefficient_field(msh, config.get("solve.source"))
        control = Control(density=ScalarField(msh, source))
    u = resolvent(msh, control, cg_tol=config.get("optimizer.cg_tol"))
    save_field(u, os.path.join(out, "state.txt"))
    _say(args.quiet, "solve: state written to %s" % os.path.join(out, "state.txt"))
    return 0


def cmd_optimize(args):
    config = _load_config(args)
    problems = []
    validate_domain(config, problems)
    cost_spec = make_cost_spec(config, problems)
    constraint_spec = make_constraint_spec(config, problems)
    opt_config = make_optimizer_config(config, problems)
    if problems:
        raise ConfigError(problems)
    out = _out_dir(args, config)

    msh = build_mesh(config)
    save_mesh(msh, os.path.join(out, "mesh.txt"))
    _say(args.quiet, "mesh: %d vertices, %d triangles"
         % (msh.n_vertices, msh.n_triangles))

    f, history, report = run(cost_spec, constraint_spec, msh, config=opt_config)
    _say(args.quiet, "optimize: %d iterations, stop=%s, cost %.12g"
         % (len(history), report.stop_mode, history[-1].cost))

    u = resolvent(msh, f, cg_tol=opt_config.cg_tol)
    w = adjoint(cost_spec, msh, f, cg_tol=opt_config.cg_tol, state=u)
    if config.get("emit.fields"):
        if f.density is not None:
            save_field(f.density, os.path.join(out, "control_density.txt"))
        if f.atoms:
            save_atoms(f.atoms, os.path.join(out, "control_atoms.txt"))
        save_field(u, os.path.join(out, "state.txt"))
        save_field(w, os.path.join(out, "adjoint.txt"))
    if config.get("emit.history"):
        write_history(history, os.path.join(out, "history.csv"))
    if config.get("emit.kkt"):
        with open(os.path.join(out, "kkt.txt"), "w") as fh:
            fh.write(format_report(report))
    if config.get("emit.levelsets"):
        _, geom = extract_bang_set(w, report.lam)
        write_levelset(geom, os.path.join(out, "levelset.csv"))
    _say(args.quiet, "artifacts in %s" % out)
    return 0 if report.stop_mode in ("relative", "absolute") else 2


def cmd_kkt(args):
    config = _load_config(args)
    problems = []
    cost_spec = make_cost_spec(config, problems)
    constraint_spec = make_constraint_spec(config, problems, check_box=False)
    if args.mesh is None:
        problems.append("--mesh is required for kkt")
    if problems:
        raise ConfigError(problems)
    msh = load_mesh(args.mesh)
    control = _load_control(msh, args)
    if control is None:
        raise ConfigError(["kkt needs --density and/or --atoms"])
    report = kkt_report(
        cost_spec, constraint_spec, msh, control,
        cg_tol=config.get("optimizer.cg_tol"),
    )
    out = _out_dir(args, config)
    text = format_report(report)
    with open(os.path.join(out, "kkt.txt"), "w") as fh:
        fh.write(text)
    _say(args.quiet, text.rstrip("\n"))
    return 0


def cmd_analyze(args):
    config = _load_config(args)
    problems = []
    validate_domain(config, problems)
    refinements = config.get("analysis.refinements")
    if refinements < 1:
        problems.append("analysis.refinements must be at least 1")
    if problems:
        raise ConfigError(problems)
    out = _out_dir(args, config)
    qs = config.get("analysis.q")
    lines = []
    for level in range(refinements + 1):
        level_config = RunConfig(values=dict(config.values))
        level_config.values["domain.h"] = config.get("domain.h") / 2.0 ** level
        msh = build_mesh(level_config)
        source = coefficient_field(msh, config.get("analysis.source"))
        u = resolvent(
            msh,
            Control(density=ScalarField(msh, source)),
            cg_tol=config.get("optimizer.cg_tol"),
        )
        for q in qs:
            value, excluded = regularity_integral(u, q)
            lines.append(
                "level=%d h=%.17g q=%.17g value=%.17g excluded_area=%.17g"
                % (level, level_config.values["domain.h"], q, value, excluded)
            )
        _say(args.quiet, "analyze: level %d (h=%g) done" % (level, level_config.values["domain.h"]))
    with open(os.path.join(out, "analysis.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="poissonctl",
        description="Source-constrained Poisson control: mesh, solve, optimize, audit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("mesh", cmd_mesh),
        ("solve", cmd_solve),
        ("optimize", cmd_optimize),
        ("kkt", cmd_kkt),
        ("analyze", cmd_analyze),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", help="config file path or preset name")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry")
        p.add_argument("--seed", type=int, default=0,
                       help="reserved; all algorithms are deterministic")
        p.add_argument("--quiet", action="store_true")
        if name in ("solve", "kkt"):
            p.add_argument("--mesh", help="mesh file to load instead of generating")
            p.add_argument("--density", help="nodal density file for the control")
            p.add_argument("--atoms", help="atom list file for the control")
        p.set_defaults(handler=fn)
    args = parser.parse_args(argv)

    try:
        return args.handler(args)
    except ConfigError as err:
        for problem in err.problems:
            print("config error: %s" % problem, file=sys.stderr)
        return 4
    except SolverError as err:
        print("solver failure: %s" % err, file=sys.stderr)
        return 3
    except PoissonctlError as err:
        print("error: %s" % err, file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
