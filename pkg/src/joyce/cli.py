"""Command-line front end.

Exit codes: 0 all checks pass, 1 a check failed, 2 the config could not be
parsed, 3 a pole or wall was hit (Z = 0, a Stokes ray, an active-ray
collision).  Every run writes a JSON report that embeds the resolved config
next to it as ``resolved-config.json``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import axioms, glstokes, isomonodromy, torus, wallcross
from .config import ConfigError, RunConfig, parse_complex
from .jets import PoleError
from .lattice import LatticeError, WallOfSecondKind

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_POLE = 0, 1, 2, 3

CHECK_ALIASES = {"J1": "J1_J2", "J2": "J1_J2", "J1_J2": "J1_J2", "J3": "J3", "J4": "J4", "J5": "J5",
                 "linearised": "linearised", "point": "point"}


# -- output helpers


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x)}")


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    write_atomic(path, buf.getvalue())


def _emit(cfg: RunConfig, name: str, report: dict) -> Path:
    out = Path(cfg.data["output"])
    report = {**report, "config": cfg.resolved()}
    write_atomic(out / name, dump_json(report))
    write_atomic(out / "resolved-config.json", dump_json(cfg.resolved()))
    return out


# -- check-joyce


def _potential(cfg: RunConfig):
    pot = cfg.data["potential"]
    if "terms" in pot:
        return cfg.literal_potential(), None
    b = pot["builder"]
    state = isomonodromy.FlowState.create(cfg.lattice(), cfg.charge_values(), cfg.flow_values(b.get("F", [])), cfg.truncation())
    return axioms.build_W_from_F(state, symmetrize=bool(b.get("symmetrize", False))), state


def _plan(cfg: RunConfig) -> axioms.SamplePlan:
    sp = dict(cfg.data["sample_plan"])
    if sp["z_center"] is not None:
        sp["z_center"] = [parse_complex(x) for x in sp["z_center"]]
    return axioms.SamplePlan(**sp)


def _linearised_report(p, plan, tol) -> axioms.AxiomReport:
    worst_f, worst_t, n = 0.0, 0.0, 0
    for z, _ in plan.points(p):
        lc = axioms.linearised_connection(p, z)
        worst_f, worst_t, n = max(worst_f, lc.flatness), max(worst_t, lc.torsion), n + 1
    return axioms.AxiomReport("linearised", {"flatness": worst_f, "torsion": worst_t},
                              {"flatness": tol, "torsion": 0.0}, n)


def _point_report(state, plan, tol) -> axioms.AxiomReport:
    if state is None:
        raise ConfigError("the 'point' check needs a builder potential")
    worst = 0.0
    pts = plan.points(axioms.build_W_from_F(state))[:10]
    for z, th in pts:
        worst = max(worst, axioms.point_residual(state, z, th))
    return axioms.AxiomReport("point", {"point_equation": worst}, {"point_equation": tol}, len(pts))


def cmd_check_joyce(cfg: RunConfig) -> int:
    checks = []
    for c in cfg.data["checks"]:
        if c not in CHECK_ALIASES:
            raise ConfigError(f"unknown check {c!r}; known: {sorted(CHECK_ALIASES)}")
        if CHECK_ALIASES[c] not in checks:
            checks.append(CHECK_ALIASES[c])
    tol = cfg.data["tolerances"]
    p, state = _potential(cfg)
    plan = _plan(cfg)
    cand = axioms.JoyceCandidate(p, plan)
    reports = []
    for name in checks:
        if name == "J1_J2":
            reports.append(axioms.check_J1_J2(cand, tol=tol["exact"]))
        elif name == "J3":
            reports.append(axioms.check_J3(cand, tol=tol["exact"]))
        elif name == "J4":
            reports.append(axioms.check_J4(cand, tol=tol["exact"], fd_tol=tol["fd"]))
        elif name == "J5":
            reports.append(axioms.check_J5(cand, tol=tol["exact"], relax=bool(cfg.data["j5_relax"])))
        elif name == "linearised":
            reports.append(_linearised_report(p, plan, tol["fd"]))
        elif name == "point":
            reports.append(_point_report(state, plan, 1e-6))
    failed = [r.name for r in reports if not r.passed]
    report = {
        "command": "check-joyce",
        "passed": not failed,
        "failed_checks": failed,
        "potential": p.to_json(),
        "sample_plan": plan.to_json(),
        "checks": [r.to_json() for r in reports],
    }
    out = _emit(cfg, "joyce-report.json", report)
    rows = []
    for r in reports:
        for k in r.residuals:
            rows.append([r.name, k, r.residuals[k], r.tolerances[k], k not in r.failures])
    write_csv(out / "residuals.csv", ["check", "quantity", "residual", "tolerance", "passed"], rows)
    for r in reports:
        print(f"{r.name}: {'pass' if r.passed else 'FAIL ' + ','.join(r.failures)}")
    return EXIT_OK if not failed else EXIT_FAIL


# -- wallcross


def _side(cfg: RunConfig, name: str, trunc):
    s = cfg.data["wallcross"][name]
    if s is None:
        raise ConfigError(f"wallcross.{name} is required")
    if ("omega" in s) == ("dt" in s):
        raise ConfigError(f"wallcross.{name} needs exactly one of 'omega' or 'dt'")
    try:
        if "omega" in s:
            data = wallcross.DTData.from_omega(wallcross.parse_rational_entries(s["omega"]), trunc)
        else:
            data = wallcross.DTData.from_dt(wallcross.parse_rational_entries(s["dt"]), trunc)
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"bad DT data in wallcross.{name}: {e}") from e
    return data, cfg.central_charge(s.get("charge"))


def cmd_wallcross(cfg: RunConfig) -> int:
    w = cfg.data["wallcross"]
    if w["mode"] not in ("exact", "float"):
        raise ConfigError("wallcross.mode is 'exact' or 'float'")
    if w["sector"] is None or len(w["sector"]) != 2:
        raise ConfigError("wallcross.sector is [start_angle, end_angle] (clockwise)")
    trunc = cfg.truncation()
    before, z_before = _side(cfg, "before", trunc)
    after, z_after = _side(cfg, "after", trunc)
    sector = wallcross.Sector.from_angles(float(w["sector"][0]), float(w["sector"][1]))
    twisted = bool(w["twisted"])
    rep = wallcross.verify_wall_crossing(before, z_before, after, z_after, sector, trunc, twisted=twisted)
    poisson = []
    for label, dt, z in (("before", before, z_before), ("after", after, z_after)):
        for ray, classes in wallcross.sector_rays(sector, z, dt):
            f = wallcross.stokes_factor(classes, dt, trunc, twisted)
            poisson.append({"side": label, "ray": ray.arg, "classes": [list(g) for g in classes],
                            "poisson_defect": str(f.poisson_defect())})
    disc = rep.max_discrepancy
    if w["mode"] == "exact":
        ok = disc == 0 and all(e["poisson_defect"] == "0" for e in poisson)
    else:
        tol = cfg.data["tolerances"]["float"]
        ok = float(disc) < tol and all(float(Fraction(e["poisson_defect"])) < tol for e in poisson)
    report = {
        "command": "wallcross",
        "passed": ok,
        "mode": w["mode"],
        "comparison": rep.to_json(),
        "stokes_factors": poisson,
        "before": before.to_json(),
        "after": after.to_json(),
    }
    _emit(cfg, "wallcross-report.json", report)
    print(f"wallcross: max discrepancy {disc} ({'pass' if ok else 'FAIL'})")
    return EXIT_OK if ok else EXIT_FAIL


# -- isomonodromy


def _path(cfg: RunConfig, z0: np.ndarray) -> list[np.ndarray]:
    f = cfg.data["flow"]
    if (f["path"] is None) == (f["loop"] is None):
        raise ConfigError("flow needs exactly one of 'path' or 'loop'")
    if f["path"] is not None:
        path = [np.array(cfg.charge_values(p)) for p in f["path"]]
        if not path:
            raise ConfigError("flow.path is empty")
        return path
    loop = f["loop"]
    extra = set(loop) - {"index", "radius", "vertices"}
    if extra:
        raise ConfigError(f"unknown keys in flow.loop: {sorted(extra)}")
    return isomonodromy.circle_path(z0, int(loop.get("index", 0)), float(loop.get("radius", 0.3)),
                                    int(loop.get("vertices", 24)))


def cmd_isomonodromy(cfg: RunConfig) -> int:
    f = cfg.data["flow"]
    if f["rhs"] not in ("classical", "quantum"):
        raise ConfigError("flow.rhs is 'classical' or 'quantum'")
    z0 = np.array(cfg.charge_values())
    path = _path(cfg, z0)
    if np.abs(path[0] - z0).max() > 0:
        path = [z0] + path
    state = isomonodromy.FlowState.create(cfg.lattice(), z0, cfg.flow_values(f["F"]), cfg.truncation())
    rtol = float(f["rtol"])
    rows: list = []
    hbar = None if f["hbar"] is None else float(f["hbar"])
    final = isomonodromy.integrate_flow(state, path, rhs=f["rhs"], hbar=hbar, rtol=rtol, trajectory=rows)
    closed = bool(np.abs(path[-1] - path[0]).max() == 0) and len(path) > 1
    scale = max([1.0] + [abs(v) for v in state.F.values()])
    drift = final.max_abs_diff(state)
    bound = cfg.data["tolerances"]["loop_factor"] * rtol * scale
    ok = drift < bound if closed else True
    n = len(z0)
    header = ["segment", "s"] + [f"{p}_z{i + 1}" for i in range(n) for p in ("re", "im")]
    header += [f"{p}_F_" + "_".join(map(str, g)) for g in state.support for p in ("re", "im")]
    out_rows = []
    for seg, s, z, F in rows:
        r = [seg, float(s)]
        for zi in z:
            r += [float(zi.real), float(zi.imag)]
        for v in np.asarray(F, dtype=complex):
            r += [float(v.real), float(v.imag)]
        out_rows.append(r)
    report = {
        "command": "isomonodromy",
        "passed": ok,
        "closed_path": closed,
        "max_drift": drift,
        "closure_bound": bound if closed else None,
        "support": [list(g) for g in state.support],
        "initial": {str(list(g)): complex(v) for g, v in sorted(state.F.items())},
        "final": {str(list(g)): complex(v) for g, v in sorted(final.F.items())},
    }
    out = _emit(cfg, "isomonodromy-report.json", report)
    write_csv(out / "trajectory.csv", header, out_rows)
    print(f"isomonodromy: drift {drift:.3e}" + (f" (bound {bound:.3e}, {'pass' if ok else 'FAIL'})" if closed else ""))
    return EXIT_OK if ok else EXIT_FAIL


# -- stokes-gl


def _gl_connection(cfg: RunConfig) -> glstokes.GLConnection:
    g = cfg.data["gl"]
    if g["u"] is None or g["V"] is None:
        raise ConfigError("gl needs 'u' and 'V'")
    try:
        return glstokes.GLConnection.from_json({"u": g["u"], "V": g["V"]})
    except (TypeError, IndexError, KeyError) as e:
        raise ConfigError(f"bad gl data: {e}") from e


def _factors(conn, rays, offset):
    return [glstokes.extract_stokes_factor(conn, a, offset=offset) for a in rays]


def cmd_stokes_gl(cfg: RunConfig) -> int:
    g = cfg.data["gl"]
    tol = cfg.data["tolerances"]
    conn = _gl_connection(cfg)
    offset = float(g["offset"])
    rays = [a for a, _, _ in conn.stokes_directions()] if g["rays"] is None else [float(a) for a in g["rays"]]
    reports = _factors(conn, rays, offset)
    ok = all(r.unipotent_deviation < tol["stokes"] for r in reports)
    report: dict = {
        "command": "stokes-gl",
        "connection": conn.to_json(),
        "stokes_factors": [r.to_json() for r in reports],
    }
    if g["rh3"] is not None:
        h = g["rh3"]
        extra = set(h) - {"r_minus", "r_plus", "eps"}
        if extra:
            raise ConfigError(f"unknown keys in gl.rh3: {sorted(extra)}")
        eps = [parse_complex(e) for e in h["eps"]]
        res = glstokes.rh3_residual(conn, float(h["r_minus"]), float(h["r_plus"]), eps, offset)
        report["rh3_residual"] = res
        ok = ok and res < tol["stokes"]
    if g["deform_to"] is not None:
        target = [parse_complex(x) for x in g["deform_to"]]
        moved = glstokes.isomonodromic_deformation(conn, target)
        after = _factors(moved, rays, offset) if g["rays"] is not None else _factors(
            moved, [a for a, _, _ in moved.stokes_directions()], offset)
        key = lambda r: tuple(r.support)
        before_map = {key(r): r.S for r in reports}
        change = 0.0
        for r in after:
            if key(r) not in before_map:
                raise ConfigError("the deformation changed the Stokes ray arrangement")
            change = max(change, float(np.abs(r.S - before_map[key(r)]).max()))
        report["deformed_connection"] = moved.to_json()
        report["deformed_stokes_factors"] = [r.to_json() for r in after]
        report["iso_stokes_change"] = change
        ok = ok and change < tol["iso_stokes"]
    report["passed"] = ok
    _emit(cfg, "stokes-report.json", report)
    for r in reports:
        print(f"ray {r.ray:+.6f}: support {r.support} unipotent deviation {r.unipotent_deviation:.2e}")
    return EXIT_OK if ok else EXIT_FAIL


# -- moyal


def _series(cfg: RunConfig, domain: str):
    """Named series from config; rational values (strings like "1/2") or [re, im] in numeric mode."""
    trunc = cfg.truncation()
    out = {}
    for name, terms in sorted(cfg.data["moyal"]["series"].items()):
        coeffs = {}
        for t in terms:
            if set(t) - {"gamma", "value"}:
                raise ConfigError(f"series terms take 'gamma' and 'value', got {sorted(t)}")
            g = tuple(int(x) for x in t["gamma"])
            if g not in trunc:
                raise ConfigError(f"class {list(g)} of series {name!r} is outside the truncation")
            v = t["value"]
            if isinstance(v, list):
                if domain != "complex":
                    raise ConfigError("complex coefficients need a numeric hbar")
                coeffs[g] = parse_complex(v)
            else:
                coeffs[g] = Fraction(str(v))
        if domain == "complex":
            out[name] = torus.CharacterSeries(trunc, {g: complex(c) for g, c in coeffs.items()}, "complex")
        else:
            out[name] = torus.CharacterSeries(trunc, coeffs, "exact")
    return out


def _size(s) -> float:
    if s.domain == "formal":
        return float(max((abs(v) for c in s.coeffs.values() for v in c.terms.values()), default=0))
    return float(max((abs(c) for c in s.coeffs.values()), default=0))


def cmd_moyal(cfg: RunConfig) -> int:
    """Star/Moyal/Poisson tables over all ordered pairs of named series, plus associativity and Jacobi."""
    m = cfg.data["moyal"]
    hbar = m["hbar"]
    formal = hbar == torus.FORMAL
    if not formal:
        try:
            hbar = float(hbar)
        except (TypeError, ValueError) as e:
            raise ConfigError("moyal.hbar is 'formal' or a number") from e
        if hbar == 0:
            raise ConfigError("moyal.hbar = 0 is the Poisson limit; use a nonzero value or 'formal'")
    exact = _series(cfg, "exact" if formal else "complex")
    series = {k: v.to_domain("formal") for k, v in exact.items()} if formal else exact
    st = lambda x, y: torus.star_product(x, y, hbar)
    br = lambda x, y: torus.moyal_bracket(x, y, hbar)
    names = list(series)
    tables = []
    for a in names:
        for b in names:
            row = {"f": a, "g": b, "star": st(series[a], series[b]).to_json(), "moyal": br(series[a], series[b]).to_json()}
            if formal:
                row["poisson"] = torus.poisson_bracket(exact[a], exact[b]).to_json()
            tables.append(row)
    assoc = jacobi = 0.0
    assoc_scale = jacobi_scale = 1.0
    for a in names:
        for b in names:
            for c in names:
                f, g, h = series[a], series[b], series[c]
                left, right = st(st(f, g), h), st(f, st(g, h))
                assoc = max(assoc, float(left.max_abs_diff(right)))
                assoc_scale = max(assoc_scale, _size(left))
                parts = [br(f, br(g, h)), br(g, br(h, f)), br(h, br(f, g))]
                total = parts[0] + parts[1] + parts[2]
                jacobi = max(jacobi, _size(total))
                jacobi_scale = max([jacobi_scale] + [_size(x) for x in parts])
    if formal:
        ok = assoc == 0 and jacobi == 0
    else:
        tol = cfg.data["tolerances"]["float"]
        ok = assoc <= tol * assoc_scale and jacobi <= tol * jacobi_scale
    report = {
        "command": "moyal",
        "passed": ok,
        "hbar": hbar,
        "associativity_defect": assoc,
        "jacobi_defect": jacobi,
        "tables": tables,
    }
    _emit(cfg, "moyal-report.json", report)
    print(f"moyal: associativity {assoc:.3e} jacobi {jacobi:.3e} ({'pass' if ok else 'FAIL'})")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "check-joyce": cmd_check_joyce,
    "wallcross": cmd_wallcross,
    "isomonodromy": cmd_isomonodromy,
    "stokes-gl": cmd_stokes_gl,
    "moyal": cmd_moyal,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="joyce", description="Joyce structure and wall-crossing checks")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config (// comments allowed)")
        sp.add_argument("--out", help="output directory (overrides config 'output')")
        sp.add_argument("--tolerance", type=float, help="exact/float comparison tolerance")
        sp.add_argument("--truncation", type=int, help="truncation degree bound")
        sp.add_argument("--seed", type=int, help="sample plan seed")
        sp.add_argument("--checks", help="comma-separated checks, e.g. J1,J2,J3,J4")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config).override(
            tolerance=args.tolerance,
            truncation=args.truncation,
            seed=args.seed,
            checks=None if args.checks is None else [c.strip() for c in args.checks.split(",") if c.strip()],
            out=args.out,
        )
        return COMMANDS[args.command](cfg)
    except (PoleError, WallOfSecondKind, isomonodromy.ActiveRayCollision, glstokes.StokesRayError,
            wallcross.BoundaryActive, ZeroDivisionError) as e:
        print(f"pole or wall hit: {e}", file=sys.stderr)
        return EXIT_POLE
    except (ConfigError, LatticeError, torus.TruncationError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except glstokes.StokesExtractionError as e:
        print(f"Stokes extraction failed: {e}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, TypeError, KeyError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
