"""Command-line front end: one subcommand per analysis plus scenarios.

Every analysis writes plain CSV/JSON artifacts into --out; nothing is
plotted. Exit codes: 0 success, 2 configuration problem, 3 analysis
failure (error details land in <out>/error.json either way).
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .classify import (ClassifyConfig, classify_pattern, mmo_signature,
                       multistability_probe, simulate_pattern)
from .cycles import (continue_cycle, detect_homoclinic_snpo,
                     find_limit_cycle, floquet_multipliers)
from .equilibria import (classify_fold_as_snic, continue_equilibrium,
                         fi_curve, find_equilibria, hopf_criticality,
                         hopf_frequency)
from .errors import (AnalysisFailed, ConfigInvalid, Inconclusive,
                     NakduoError, NoRecurrence, NotPeriodic)
from .ode import (IntegratorConfig, field_coupled, field_single, integrate,
                  plane)
from .params import (CoupledSystem, default_pair, dump_coupled,
                     integrator_neuron, load_coupled, resonator_neuron)
from .poincare import (orbit_diagram, rotation_number, section_orbit,
                       torus_breakdown_bracket, torus_smoothness)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ANALYSIS = 3

COLD_TORUS = (-20.0, 0.3, -20.0, 0.4)
COLD_SUB = (-20.0, 0.3, -55.0, 0.03)


def _parse_floats(text, n=None):
    vals = [float(x) for x in str(text).split(",") if x != ""]
    if n is not None and len(vals) != n:
        raise ConfigInvalid(f"expected {n} comma-separated values, "
                            f"got {len(vals)}: {text!r}")
    return vals


def _parse_range(text, default_n=None):
    """a:b or a:b:n -> (a, b, n)."""
    parts = str(text).split(":")
    if len(parts) == 2 and default_n is not None:
        return float(parts[0]), float(parts[1]), int(default_n)
    if len(parts) != 3:
        raise ConfigInvalid(f"range must be a:b:n, got {text!r}")
    return float(parts[0]), float(parts[1]), int(parts[2])


def _parse_section(text):
    """'V2=-50' -> EventSpec on the named coupled-state column."""
    cols = {"V1": 0, "n1": 1, "V2": 2, "n2": 3, "V": 0, "n": 1}
    name, _, value = str(text).partition("=")
    name = name.strip()
    if name not in cols or value == "":
        raise ConfigInvalid(f"section must look like V2=-50, got {text!r}")
    return plane(cols[name], float(value), direction=1, label=name)


def _neuron_for(which, I):
    if which in (1, "1", "integrator"):
        return integrator_neuron(I)
    if which in (2, "2", "resonator"):
        return resonator_neuron(I)
    raise ConfigInvalid(f"neuron must be 1 or 2, got {which!r}")


def _system_from(args, q2=None):
    if getattr(args, "params", None):
        c = load_coupled(args.params)
        return c.with_q2(q2) if q2 is not None else c
    return default_pair(q2=q2 if q2 is not None else 0.0)


def _iconfig(args):
    kw = {}
    if getattr(args, "rtol", None) is not None:
        kw["rtol"] = args.rtol
    if getattr(args, "atol", None) is not None:
        kw["atol"] = args.atol
    return IntegratorConfig(**kw)


def _outdir(args):
    out = getattr(args, "out", None) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, payload):
    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        if isinstance(obj, np.ndarray):
            return clean(obj.tolist())
        if isinstance(obj, (np.floating, float)):
            f = float(obj)
            return f if np.isfinite(f) else None
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, complex):
            return {"re": obj.real, "im": obj.imag}
        return obj

    with open(path, "w") as fh:
        json.dump(clean(payload), fh, indent=2)
        fh.write("\n")


def _report_dict(rep):
    return {
        "label": rep.label,
        "n_spikes_1": rep.n_spikes_1,
        "n_spikes_2": rep.n_spikes_2,
        "small_osc_count": rep.small_osc_count,
        "burst_count": rep.burst_count,
        "mmo_signature": rep.mmo_signature,
        "synchrony_index": rep.synchrony_index,
        "max_spike_offset": rep.max_spike_offset,
        "mean_vdiff_at_spikes": rep.mean_vdiff_at_spikes,
        "periodic": rep.periodic,
        "config": rep.config,
    }


# ---------------------------------------------------------------- simulate

def cmd_simulate(args):
    out = _outdir(args)
    cfg = _iconfig(args)
    if args.single:
        p = _neuron_for(args.single, args.I)
        fld = field_single(p)
        y0 = np.array(_parse_floats(args.x0, 2) if args.x0 else (-65.0, 0.1))
    else:
        c = _system_from(args, q2=args.q2)
        fld = field_coupled(c)
        y0 = np.array(_parse_floats(args.x0, 4) if args.x0 else COLD_TORUS)
    warm = integrate(fld, y0, (0.0, args.transient), cfg, record=False)
    traj = integrate(fld, warm.y_end, (0.0, args.tspan), cfg)
    path = os.path.join(out, args.prefix + "trajectory.csv")
    traj.to_csv(path)
    print(path)
    return EXIT_OK


# --------------------------------------------------------------- equilibria

def cmd_equilibria(args):
    out = _outdir(args)
    p = _neuron_for(args.neuron, 0.0)
    lo, hi, _ = _parse_range(args.i_range, default_n=0)
    branch = continue_equilibrium(p, (lo, hi))
    rows = ["I,V,n,class"]
    for I, state, klass in zip(branch.I, branch.states, branch.klass):
        rows.append(f"{I:.12g},{state[0]:.12g},{state[1]:.12g},{klass}")
    bpath = os.path.join(out, f"equilibria_n{args.neuron}.csv")
    with open(bpath, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    points = []
    for bp in branch.points:
        entry = {"I": bp.I, "kind": bp.kind,
                 "V": bp.equilibrium.V, "n": bp.equilibrium.n}
        if bp.kind == "Hopf":
            entry["frequency_hz"] = hopf_frequency(bp.equilibrium)
            if args.classify_onset:
                entry["criticality"] = hopf_criticality(p, bp)
        elif bp.kind == "Fold" and args.classify_onset:
            entry["onset"] = classify_fold_as_snic(p, bp)
        points.append(entry)
    jpath = os.path.join(out, f"equilibria_n{args.neuron}_points.json")
    _write_json(jpath, {"neuron": args.neuron, "points": points})
    print(bpath)
    print(jpath)
    return EXIT_OK


def cmd_fi(args):
    out = _outdir(args)
    p = _neuron_for(args.neuron, 0.0)
    lo, hi, n = _parse_range(args.i_range, default_n=40)
    pairs = fi_curve(p, (lo, hi), n)
    path = os.path.join(out, f"fi_n{args.neuron}.csv")
    with open(path, "w") as fh:
        fh.write("I,f_hz\n")
        for I, f in pairs:
            fh.write(f"{I:.12g},{f:.12g}\n")
    print(path)
    return EXIT_OK


# ------------------------------------------------------------------ cycles

def _warm_cycle(c, args, cfg):
    section = _parse_section(args.section)
    y0 = np.array(_parse_floats(args.x0, 4) if args.x0 else COLD_TORUS)
    return find_limit_cycle(c, y0, section, config=cfg), section


def _branch_csv(out, prefix, branch):
    path = os.path.join(out, prefix + "branch.csv")
    with open(path, "w") as fh:
        fh.write("q2,T,period,mult1,mult2,mult3,mult4,stability,"
                 "max_V1,max_V2\n")
        for q, cyc in zip(branch.q2, branch.cycles):
            ms = sorted(cyc.multipliers, key=abs, reverse=True)
            ms = [abs(m) for m in ms] + [0.0] * (4 - len(ms))
            fh.write(f"{q:.12g},{cyc.T:.12g},{cyc.T:.12g},"
                     f"{ms[0]:.12g},{ms[1]:.12g},{ms[2]:.12g},{ms[3]:.12g},"
                     f"{cyc.stability},{cyc.col_max[0]:.12g},"
                     f"{cyc.col_max[2]:.12g}\n")
    ppath = os.path.join(out, prefix + "points.csv")
    with open(ppath, "w") as fh:
        fh.write("q2,kind\n")
        for bp in branch.points:
            fh.write(f"{bp.q2:.12g},{bp.kind}\n")
    return path, ppath


def cmd_cycles(args):
    out = _outdir(args)
    cfg = _iconfig(args)
    c = _system_from(args, q2=args.q2)
    cycle, section = _warm_cycle(c, args, cfg)
    info = {
        "q2": args.q2, "T": cycle.T, "returns": cycle.returns,
        "stability": cycle.stability, "residual": cycle.residual,
        "multipliers": [{"re": m.real, "im": m.imag}
                        for m in np.atleast_1d(cycle.multipliers)],
        "max_V1": cycle.col_max[0], "max_V2": cycle.col_max[2],
        "anchor": cycle.anchor,
    }
    _write_json(os.path.join(out, "cycle.json"), info)
    print(os.path.join(out, "cycle.json"))
    if args.q2_range:
        lo, hi, _ = _parse_range(args.q2_range, default_n=0)
        branch = continue_cycle(c, cycle, (lo, hi), ds=args.ds, config=cfg)
        for p in _branch_csv(out, "cycles_", branch):
            print(p)
    return EXIT_OK


# ---------------------------------------------------------------- poincare

def cmd_poincare(args):
    out = _outdir(args)
    cfg = _iconfig(args)
    section = _parse_section(args.section)
    y0 = np.array(_parse_floats(args.x0, 4) if args.x0 else COLD_TORUS)
    if args.action == "sweep":
        lo, hi, n = _parse_range(args.q2_range)
        c = _system_from(args)
        diagram = orbit_diagram(
            c, (lo, hi), n, section, observable=args.obs, y0=y0,
            n_crossings=args.crossings, transient=args.transient,
            policy=args.seed_policy, config=cfg)
        path = os.path.join(out, "orbit_diagram.csv")
        with open(path, "w") as fh:
            fh.write(f"q2,crossing_index,{diagram.observable}\n")
            for q, vals in zip(diagram.q2, diagram.values):
                for i, v in enumerate(vals):
                    fh.write(f"{q:.12g},{i},{v:.12g}\n")
        if diagram.failures:
            _write_json(os.path.join(out, "orbit_diagram_failures.json"),
                        {str(diagram.q2[k]): msg
                         for k, msg in diagram.failures.items()})
        print(path)
        return EXIT_OK
    # single-orbit analysis at one q2
    c = _system_from(args, q2=args.q2)
    orbit = section_orbit(c, y0, section, args.crossings,
                          transient=args.transient, config=cfg)
    path = os.path.join(out, "section_orbit.csv")
    with open(path, "w") as fh:
        fh.write("t," + ",".join(orbit.columns) + "\n")
        for t, row in zip(orbit.times, orbit.states):
            fh.write(f"{t:.12g}," + ",".join(f"{v:.12g}" for v in row) + "\n")
    payload = {"q2": args.q2, "n_crossings": len(orbit)}
    try:
        est = rotation_number(orbit)
        payload["rotation"] = {
            "rho": est.rho, "classification": est.classification,
            "confidence": est.confidence, "locked_ratio": est.locked_ratio}
        score, wrinkled = torus_smoothness(orbit)
        payload["smoothness"] = {"score_deg": score, "non_smooth": wrinkled}
    except NakduoError as err:
        payload["rotation_error"] = f"{type(err).__name__}: {err}"
    _write_json(os.path.join(out, "rotation.json"), payload)
    print(path)
    print(os.path.join(out, "rotation.json"))
    return EXIT_OK


# ---------------------------------------------------------------- classify

def cmd_classify(args):
    out = _outdir(args)
    cfg = _iconfig(args)
    c = _system_from(args, q2=args.q2)
    y0 = np.array(_parse_floats(args.x0, 4) if args.x0 else COLD_TORUS)
    traj = simulate_pattern(c, y0, transient=args.transient,
                            window=args.window, iconfig=cfg)
    rep = classify_pattern(traj, c)
    payload = _report_dict(rep)
    if rep.label == "TS_MMO" and rep.mmo_signature is None:
        try:
            payload["mmo_signature"] = mmo_signature(traj, c)
        except (NotPeriodic, NakduoError) as err:
            payload["mmo_signature_error"] = f"{type(err).__name__}"
    _write_json(os.path.join(out, "pattern.json"), payload)
    print(os.path.join(out, "pattern.json"))
    print(rep.label)
    return EXIT_OK


# ------------------------------------------------------------------- sweep

def _sweep_point(task):
    """Classify one q2 point; used by both policies."""
    q2, y0, transient, window, rtol, atol = task
    cfg = IntegratorConfig(rtol=rtol, atol=atol)
    c = default_pair(q2=q2)
    try:
        traj = simulate_pattern(c, np.asarray(y0), transient=transient,
                                window=window, iconfig=cfg)
        rep = classify_pattern(traj, c)
        return q2, rep.label, traj.y_end
    except NakduoError as err:
        return q2, f"error:{type(err).__name__}", np.asarray(y0)


def cmd_sweep(args):
    out = _outdir(args)
    lo, hi, n = _parse_range(args.q2_range)
    qgrid = np.linspace(lo, hi, n)
    cfg = _iconfig(args)
    y0 = np.array(_parse_floats(args.x0, 4) if args.x0 else COLD_TORUS)
    rows = []
    if args.seed_policy == "warm":
        carry = y0.copy()
        for q in qgrid:
            q, label, carry = _sweep_point(
                (q, carry, args.transient, args.window, cfg.rtol, cfg.atol))
            rows.append((q, label))
    else:
        tasks = [(q, y0, args.transient, args.window, cfg.rtol, cfg.atol)
                 for q in qgrid]
        if args.jobs > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                for q, label, _ in ex.map(_sweep_point, tasks):
                    rows.append((q, label))
        else:
            for task in tasks:
                q, label, _ = _sweep_point(task)
                rows.append((q, label))
    failures = sum(1 for _, lab in rows if lab.startswith("error:"))
    path = os.path.join(out, f"sweep_{args.seed_policy}.csv")
    with open(path, "w") as fh:
        fh.write("q2,label\n")
        for q, label in rows:
            fh.write(f"{q:.12g},{label}\n")
    print(path)
    if failures > 0.5 * len(rows):
        raise AnalysisFailed(f"{failures}/{len(rows)} sweep points failed")
    return EXIT_OK


# ---------------------------------------------------------------- scenario

def _scenario_dir():
    here = os.path.dirname(os.path.dirname(os.path.dirname(
        os.path.abspath(__file__))))
    cand = os.path.join(here, "scenarios")
    if os.path.isdir(cand):
        return cand
    return os.path.join(os.getcwd(), "scenarios")


def _step_simulate(args, spec, out, cfg):
    q2 = spec.get("q2", 0.0)
    if "neuron" in spec:
        p = _neuron_for(spec["neuron"], spec.get("I", 0.0))
        fld = field_single(p)
        y0 = np.asarray(spec.get("x0", (-65.0, 0.1)), dtype=float)
    else:
        c = _system_from(args, q2=q2)
        fld = field_coupled(c)
        y0 = np.asarray(spec.get("x0", COLD_TORUS), dtype=float)
    warm = integrate(fld, y0, (0.0, spec.get("transient", 2000.0)), cfg,
                     record=False)
    traj = integrate(fld, warm.y_end, (0.0, spec.get("tspan", 1000.0)), cfg)
    traj.to_csv(os.path.join(out, spec["out"]))


def _step_equilibria(args, spec, out, cfg):
    ns = argparse.Namespace(**vars(args))
    ns.neuron = spec["neuron"]
    ns.i_range = spec["i_range"]
    ns.classify_onset = spec.get("classify_onset", False)
    ns.out = out
    cmd_equilibria(ns)


def _step_fi(args, spec, out, cfg):
    ns = argparse.Namespace(**vars(args))
    ns.neuron = spec["neuron"]
    ns.i_range = spec["i_range"]
    ns.out = out
    cmd_fi(ns)


def _step_cycle_branch(args, spec, out, cfg):
    c = _system_from(args, q2=spec["q2"])
    section = _parse_section(spec.get("section", "V1=-20"))
    y0 = np.asarray(spec.get("x0", COLD_TORUS), dtype=float)
    if "settle" in spec:
        fld = field_coupled(c)
        y0 = integrate(fld, y0, (0.0, spec["settle"]), cfg,
                       record=False).y_end
    cycle = find_limit_cycle(c, y0, section, config=cfg)
    lo, hi = spec["q2_range"]
    branch = continue_cycle(c, cycle, (lo, hi), ds=spec.get("ds", 0.002),
                            config=cfg)
    _branch_csv(out, spec.get("prefix", "cycles_"), branch)


def _step_orbit_diagram(args, spec, out, cfg):
    c = _system_from(args)
    section = _parse_section(spec.get("section", "V2=-50"))
    lo, hi = spec["q2_range"]
    diagram = orbit_diagram(
        c, (lo, hi), spec.get("n", 120), section,
        observable=spec.get("obs", "V1"),
        y0=np.asarray(spec.get("x0", COLD_TORUS), dtype=float),
        n_crossings=spec.get("crossings", 200),
        transient=spec.get("transient", 300), policy=spec.get("policy",
                                                              "warm"),
        config=cfg)
    with open(os.path.join(out, spec["out"]), "w") as fh:
        fh.write(f"q2,crossing_index,{diagram.observable}\n")
        for q, vals in zip(diagram.q2, diagram.values):
            for i, v in enumerate(vals):
                fh.write(f"{q:.12g},{i},{v:.12g}\n")


def _step_section_orbit(args, spec, out, cfg):
    c = _system_from(args, q2=spec["q2"])
    section = _parse_section(spec.get("section", "V2=-50"))
    orbit = section_orbit(c, np.asarray(spec.get("x0", COLD_TORUS)),
                          section, spec.get("crossings", 600),
                          transient=spec.get("transient", 300), config=cfg)
    with open(os.path.join(out, spec["out"]), "w") as fh:
        fh.write("t," + ",".join(orbit.columns) + "\n")
        for t, row in zip(orbit.times, orbit.states):
            fh.write(f"{t:.12g}," + ",".join(f"{v:.12g}" for v in row)
                     + "\n")
    payload = {"q2": spec["q2"]}
    try:
        est = rotation_number(orbit)
        payload["rotation"] = {
            "rho": est.rho, "classification": est.classification,
            "confidence": est.confidence, "locked_ratio": est.locked_ratio}
        score, wrinkled = torus_smoothness(orbit)
        payload["smoothness"] = {"score_deg": score, "non_smooth": wrinkled}
    except NakduoError as err:
        payload["rotation_error"] = f"{type(err).__name__}: {err}"
    _write_json(os.path.join(out, spec.get("json_out", "rotation.json")),
                payload)


def _step_classify(args, spec, out, cfg):
    c = _system_from(args, q2=spec["q2"])
    traj = simulate_pattern(c, np.asarray(spec.get("x0", COLD_TORUS)),
                            transient=spec.get("transient", 3000.0),
                            window=spec.get("window", 4000.0), iconfig=cfg)
    rep = classify_pattern(traj, c)
    _write_json(os.path.join(out, spec["out"]), _report_dict(rep))


def _step_multistability(args, spec, out, cfg):
    c = _system_from(args, q2=spec["q2"])
    results = multistability_probe(
        c, [np.asarray(x, dtype=float) for x in spec["seeds"]],
        transient=spec.get("transient", 3000.0),
        window=spec.get("window", 4000.0), iconfig=cfg)
    payload = []
    for y0, item in results:
        if isinstance(item, NakduoError):
            payload.append({"x0": y0, "error": type(item).__name__})
        else:
            payload.append({"x0": y0, "report": _report_dict(item)})
    _write_json(os.path.join(out, spec["out"]), payload)


def _step_torus_bracket(args, spec, out, cfg):
    c = _system_from(args)
    lo, hi = spec["q2_bracket"]
    bracket = torus_breakdown_bracket(
        c, lo, hi, np.asarray(spec.get("x0", COLD_TORUS)),
        _parse_section(spec.get("section", "V2=-50")),
        n_crossings=spec.get("crossings", 600),
        transient=spec.get("transient", 400),
        tol=spec.get("tol", 5e-5), config=cfg)
    _write_json(os.path.join(out, spec["out"]),
                {"q2_lo": bracket[0], "q2_hi": bracket[1]})


def _step_snpo(args, spec, out, cfg):
    c = _system_from(args)
    section = _parse_section(spec.get("section", "V2=-41.5"))
    result = detect_homoclinic_snpo(
        c, tuple(spec["q2_bracket"]), section,
        np.asarray(spec.get("x0", COLD_TORUS)), config=cfg)
    _write_json(os.path.join(out, spec["out"]),
                {"q2": result.q2, "kind": result.kind,
                 "details": result.details})


def _step_input_signal(args, spec, out, cfg):
    from .classify import input_signal
    c = _system_from(args, q2=spec["q2"])
    traj = simulate_pattern(c, np.asarray(spec.get("x0", COLD_TORUS)),
                            transient=spec.get("transient", 3000.0),
                            window=spec.get("window", 2000.0), iconfig=cfg)
    yin, zin = input_signal(traj, c)
    with open(os.path.join(out, spec["out"]), "w") as fh:
        fh.write("t,V1,V2,Y,Z\n")
        for k in range(len(traj.t)):
            fh.write(f"{traj.t[k]:.12g},{traj.y[k, 0]:.12g},"
                     f"{traj.y[k, 2]:.12g},{yin[k]:.12g},{zin[k]:.12g}\n")


STEP_HANDLERS = {
    "simulate": _step_simulate,
    "equilibria": _step_equilibria,
    "fi": _step_fi,
    "cycle_branch": _step_cycle_branch,
    "orbit_diagram": _step_orbit_diagram,
    "section_orbit": _step_section_orbit,
    "classify": _step_classify,
    "multistability": _step_multistability,
    "torus_bracket": _step_torus_bracket,
    "snpo": _step_snpo,
    "input_signal": _step_input_signal,
}


def cmd_scenario(args):
    sdir = args.dir or _scenario_dir()
    if args.list:
        for name in sorted(os.listdir(sdir)):
            if name.endswith(".json"):
                print(name[:-5])
        return EXIT_OK
    path = os.path.join(sdir, args.name + ".json")
    if not os.path.isfile(path):
        raise ConfigInvalid(f"unknown scenario {args.name!r} (no {path})")
    with open(path) as fh:
        scenario = json.load(fh)
    out = os.path.join(_outdir(args), scenario.get("name", args.name))
    os.makedirs(out, exist_ok=True)
    cfg = _iconfig(args)
    for step in scenario["steps"]:
        op = step.get("op")
        if op not in STEP_HANDLERS:
            raise ConfigInvalid(f"unknown scenario op {op!r}")
        STEP_HANDLERS[op](args, step, out, cfg)
    print(out)
    return EXIT_OK


# -------------------------------------------------------------------- main

def build_parser():
    ap = argparse.ArgumentParser(
        prog="nakduo",
        description="Bifurcation and oscillation-pattern analysis for a "
                    "gap-junction coupled integrator/resonator neuron pair.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--params", help="JSON file with the coupled-system "
                                     "parameters")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--rtol", type=float, default=None)
    ap.add_argument("--atol", type=float, default=None)
    ap.add_argument("--seed-policy", choices=("warm", "cold"),
                    default="warm", dest="seed_policy")
    ap.add_argument("--jobs", type=int, default=1)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate and dump a trajectory")
    s.add_argument("--q2", type=float, default=0.0)
    s.add_argument("--x0")
    s.add_argument("--single", type=int, choices=(1, 2), default=None)
    s.add_argument("--I", type=float, default=0.0)
    s.add_argument("--tspan", type=float, default=1000.0)
    s.add_argument("--transient", type=float, default=0.0)
    s.add_argument("--prefix", default="")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("equilibria", help="continue equilibria over I")
    s.add_argument("--neuron", type=int, choices=(1, 2), required=True)
    s.add_argument("--i-range", required=True, dest="i_range")
    s.add_argument("--classify-onset", action="store_true",
                   dest="classify_onset")
    s.set_defaults(func=cmd_equilibria)

    s = sub.add_parser("fi", help="frequency-current curve")
    s.add_argument("--neuron", type=int, choices=(1, 2), required=True)
    s.add_argument("--i-range", required=True, dest="i_range")
    s.set_defaults(func=cmd_fi)

    s = sub.add_parser("cycles", help="find and continue limit cycles")
    s.add_argument("--q2", type=float, required=True)
    s.add_argument("--q2-range", dest="q2_range")
    s.add_argument("--section", default="V1=-20")
    s.add_argument("--x0")
    s.add_argument("--ds", type=float, default=0.002)
    s.set_defaults(func=cmd_cycles)

    s = sub.add_parser("poincare", help="section orbits and q2 sweeps")
    s.add_argument("action", choices=("orbit", "sweep"))
    s.add_argument("--q2", type=float, default=0.04)
    s.add_argument("--q2-range", dest="q2_range")
    s.add_argument("--section", default="V2=-50")
    s.add_argument("--obs", default="V1")
    s.add_argument("--x0")
    s.add_argument("--crossings", type=int, default=600)
    s.add_argument("--transient", type=int, default=300)
    s.set_defaults(func=cmd_poincare)

    s = sub.add_parser("classify", help="label the oscillation pattern")
    s.add_argument("--q2", type=float, required=True)
    s.add_argument("--x0")
    s.add_argument("--transient", type=float, default=3000.0)
    s.add_argument("--window", type=float, default=4000.0)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("sweep", help="pattern labels across a q2 range")
    s.add_argument("--q2-range", required=True, dest="q2_range")
    s.add_argument("--x0")
    s.add_argument("--transient", type=float, default=2500.0)
    s.add_argument("--window", type=float, default=3000.0)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("scenario", help="run a packaged scenario file")
    s.add_argument("name", nargs="?", default="")
    s.add_argument("--list", action="store_true")
    s.add_argument("--dir", default=None)
    s.set_defaults(func=cmd_scenario)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    out = getattr(args, "out", ".")
    try:
        return args.func(args)
    except ConfigInvalid as err:
        _emit_error(out, err)
        return EXIT_CONFIG
    except NakduoError as err:
        _emit_error(out, err)
        return EXIT_ANALYSIS


def _emit_error(out, err):
    print(f"error: {err}", file=sys.stderr)
    try:
        os.makedirs(out, exist_ok=True)
        _write_json(os.path.join(out, "error.json"),
                    {"error": type(err).__name__, "message": str(err)})
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
