"""Command-line front end.

Exit codes: 0 on success, 1 on verification failure, 2 on usage or input
errors.  All randomness derives from --seed, and reports carry no
timestamps, so identical invocations produce byte-identical outputs.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, decompose, fio, flow, verify
from .config import DEFAULT_TOLS, RunConfig
from .errors import CarnotWaveError
from .groups import BUILTIN_GROUPS, Covector, Point, classify, load_group
from .kernels import backend_name
from .rng import make_rng
from .symbols import band_symbol, gaussian_symbol, ratio_band_symbol


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _dump_json(data, path=None):
    text = json.dumps(_jsonify(data), sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row) + "\n")


def _manifest(cfg: RunConfig, command: str, inputs: dict) -> dict:
    return {
        "command": command,
        "version": __version__,
        "kernel_backend": backend_name(),
        "seed": cfg.seed,
        "group": cfg.group_source,
        "inputs": _jsonify(inputs),
    }


def _add_common(p):
    p.add_argument("--group", default="heisenberg",
                   help=f"builtin name ({', '.join(sorted(BUILTIN_GROUPS))}) or JSON file")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None, help="output directory for artifacts")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--tol", action="append", default=[], metavar="KEY=VAL",
                   help="tolerance override, repeatable")
    p.add_argument("--config", default=None, help="JSON file mirroring the flags")


def _build_config(args) -> RunConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(json.load(fh))
    tols = dict(values.get("tol", {}))
    for item in args.tol:
        if "=" not in item:
            raise ValueError(f"malformed --tol {item!r}, expected KEY=VAL")
        key, val = item.split("=", 1)
        if key not in DEFAULT_TOLS:
            raise ValueError(f"unknown tolerance key {key!r}")
        tols[key] = float(val)
    for key in tols:
        if key not in DEFAULT_TOLS:
            raise ValueError(f"unknown tolerance key {key!r}")
    return RunConfig(
        group_source=values.get("group", args.group),
        seed=int(values.get("seed", args.seed)),
        tol_overrides=tols,
        output_dir=values.get("out", args.out) or ".",
        jobs=int(values.get("jobs", args.jobs)),
    )


def _load(cfg: RunConfig):
    return load_group(cfg.group_source)


def _print_table(results):
    width = max(len(r.name) for r in results) + 2
    print(f"{'check'.ljust(width)}{'max error':>13}  {'tolerance':>10}  status")
    for r in results:
        stat = "pass" if r.passed else "FAIL"
        note = f"  ({r.note})" if r.note else ""
        print(f"{r.name.ljust(width)}{r.max_error:>13.3e}  {r.tolerance:>10.1e}  {stat}{note}")


# --------------------------------------------------------------------------
# commands


def cmd_group_validate(args) -> int:
    cfg = _build_config(args)
    g = _load(cfg)
    c = classify(g, 200, seed=cfg.seed)
    results = verify.suite_carnot(g, cfg)
    report = verify.results_to_dict(results, cfg, g.name or cfg.group_source)
    report["classification"] = {
        "max_rank": c.max_rank,
        "is_metivier": c.is_metivier,
        "is_htype": c.is_htype,
        "omega_witness": None if c.omega_witness is None else c.omega_witness.tolist(),
    }
    _print_table(results)
    if args.out:
        _dump_json(report, os.path.join(args.out, "group_validate.json"))
    else:
        _dump_json(report)
    return 0 if report["all_passed"] else 1


def cmd_verify_all(args) -> int:
    cfg = _build_config(args)
    g = _load(cfg)
    results = verify.run_suites(g, cfg, names=args.suites)
    report = verify.results_to_dict(results, cfg, g.name or cfg.group_source)
    _print_table(results)
    if args.out:
        _dump_json(report, os.path.join(args.out, "verify_all.json"))
    else:
        _dump_json(report)
    return 0 if report["all_passed"] else 1


def cmd_sphere_sample(args) -> int:
    cfg = _build_config(args)
    g = _load(cfg)
    rng = make_rng(cfg.seed, 7)
    covs = []
    for _ in range(args.count):
        xi = rng.standard_normal(g.d1)
        xi /= np.linalg.norm(xi)
        mu = args.mu_scale * rng.standard_normal(g.d2)
        covs.append(Covector(xi, mu))
    points, skipped = flow.geodesic_sphere_sample(g, args.t, covs, jobs=cfg.jobs)
    rows = []
    for i, (cov, pt) in enumerate(zip(covs, points)):
        if pt is None:
            continue
        rows.append([i] + [float(v) for v in cov.xi] + [float(v) for v in cov.mu]
                    + [float(v) for v in pt.x] + [float(v) for v in pt.u])
    header = (
        ["index"]
        + [f"xi{j}" for j in range(g.d1)] + [f"mu{j}" for j in range(g.d2)]
        + [f"x{j}" for j in range(g.d1)] + [f"u{j}" for j in range(g.d2)]
    )
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "sphere.csv"), header, rows)
    _dump_json(
        _manifest(cfg, "sphere sample",
                  {"t": args.t, "count": args.count, "mu_scale": args.mu_scale,
                   "skipped": skipped, "rows": len(rows)}),
        os.path.join(out_dir, "sphere_manifest.json"),
    )
    print(f"wrote {len(rows)} rows to {os.path.join(out_dir, 'sphere.csv')}"
          + (f" (skipped {len(skipped)})" if skipped else ""))
    return 0


def cmd_phase_eval(args) -> int:
    cfg = _build_config(args)
    g = _load(cfg)
    from .phase import mixed_hessian, phase_value

    p = Point(np.asarray(args.x, float), np.asarray(args.u, float))
    cov = Covector(np.asarray(args.xi, float), np.asarray(args.mu, float))
    pe = phase_value(g, args.t, p, cov)
    he = mixed_hessian(g, args.t, cov)
    record = {
        "inputs": {"t": args.t, "x": args.x, "u": args.u, "xi": args.xi, "mu": args.mu},
        "phase": pe.value,
        "im_part": pe.im_part,
        "grad_x": pe.grad_x,
        "grad_xi": pe.grad_xi,
        "det_phi": he.det_phi,
        "density": he.density,
    }
    _dump_json(record, os.path.join(args.out, "phase_eval.json") if args.out else None)
    return 0


def cmd_transport_verify(args) -> int:
    cfg = _build_config(args)
    g = _load(cfg)
    results = verify.suite_transport(g, cfg)
    _print_table(results)
    report = verify.results_to_dict(results, cfg, g.name or cfg.group_source)
    if args.out:
        _dump_json(report, os.path.join(args.out, "transport_verify.json"))
    return 0 if report["all_passed"] else 1


def cmd_decompose_directions(args) -> int:
    cfg = _build_config(args)
    ds = decompose.make_directions(args.d, args.m, c=args.c, seed=cfg.seed)
    rows = [[i] + [float(v) for v in vec] for i, vec in enumerate(ds.directions)]
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"directions_d{args.d}_m{args.m}.csv")
    _write_csv(path, ["index"] + [f"v{j}" for j in range(args.d)], rows)
    print(f"wrote {len(rows)} directions to {path}")
    return 0


def cmd_decompose_report(args) -> int:
    cfg = _build_config(args)
    ms = list(range(args.m_min, args.m_max + 1))
    report = {"direction_counts": {}, "slopes": {}, "sector_counts": {}}
    for d in (2, 3):
        slope, counts = decompose.direction_count_slope(d, ms, seed=cfg.seed)
        report["direction_counts"][str(d)] = dict(zip(map(str, ms), counts))
        report["slopes"][str(d)] = {"fitted": slope, "expected": (d - 1) / 2.0}
    kappa = args.kappa
    for d2 in (1, 2, 3):
        counts = {}
        for mult in (16.0, 32.0, 64.0):
            T = mult * kappa**2
            counts[f"T={T:g}"] = len(decompose.make_mu_sectors(d2, T, kappa, seed=cfg.seed))
        report["sector_counts"][str(d2)] = counts
    report["manifest"] = _manifest(cfg, "decompose report", {"m_range": ms, "kappa": kappa})
    _dump_json(report, os.path.join(args.out, "decompose_report.json") if args.out else None)
    return 0


def _study_symbol(g, args):
    cut = decompose.make_cutoffs()
    return band_symbol(g, cut, args.m, h=args.h)


def cmd_fio_eval(args) -> int:
    cfg = _build_config(args)
    g = _load(cfg)
    q = _study_symbol(g, args)
    spec = fio.QuadratureSpec(nodes_per_dim=args.nodes, tolerance=args.quad_tol)
    p = Point(np.asarray(args.x, float), np.asarray(args.u, float))
    sample = fio.eval_kernel(g, q, args.t, p, spec)
    record = {
        "inputs": {"m": args.m, "h": args.h, "t": args.t, "x": args.x, "u": args.u,
                   "nodes": args.nodes},
        "value_re": sample.value.real,
        "value_im": sample.value.imag,
        "refine_error": sample.refine_error,
    }
    _dump_json(record, os.path.join(args.out, "fio_eval.json") if args.out else None)
    return 0


def cmd_fio_wave_check(args) -> int:
    cfg = _build_config(args)
    g = _load(cfg)
    if g.d1 != 2 or g.d2 != 1:
        print("wave-check requires a d1 = 2, d2 = 1 group", file=sys.stderr)
        return 2
    q = _study_symbol(g, args)
    rng = make_rng(cfg.seed, 21)
    spec = fio.QuadratureSpec(nodes_per_dim=16, axis_counts=[args.nodes] * 3, mode="annulus")
    rows = []
    worst = 0.0
    scale = 2.0**args.m
    for i in range(args.points):
        xi = rng.standard_normal(2)
        xi *= 1.5 * scale / np.linalg.norm(xi)
        mu = float(rng.uniform(0.7, 1.4)) * scale * (1.0 if rng.uniform() < 0.5 else -1.0)
        t = float(rng.uniform(0.2, 1.2))
        fp = flow.flow_origin(g, t, Covector(xi, [mu]))
        p = Point(fp.x + 0.05 * rng.standard_normal(2), fp.u + 0.05 * rng.standard_normal(1))
        res = fio.wave_identity_residual(g, q, t, p, spec)
        worst = max(worst, res)
        rows.append([i, t, float(p.x[0]), float(p.x[1]), float(p.u[0]), res])
    record = _manifest(cfg, "fio wave-check",
                       {"m": args.m, "points": args.points, "nodes": args.nodes})
    record["residuals"] = [r[-1] for r in rows]
    record["max_residual"] = worst
    record["tolerance"] = cfg.tol("fio.wave_residual")
    out_dir = args.out
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(os.path.join(out_dir, "wave_check.csv"),
                   ["index", "t", "x0", "x1", "u0", "residual"], rows)
        _dump_json(record, os.path.join(out_dir, "wave_check.json"))
    else:
        _dump_json(record)
    return 0 if worst <= record["tolerance"] else 1


def cmd_fio_dec_check(args) -> int:
    cfg = _build_config(args)
    g = _load(cfg)
    if g.d1 != 2 or g.d2 != 1:
        print("dec-check requires a d1 = 2, d2 = 1 group", file=sys.stderr)
        return 2
    cut = decompose.make_cutoffs()
    q = ratio_band_symbol(g, cut, 2.0, args.kappa)
    rng = make_rng(cfg.seed, 22)
    pts = []
    for _ in range(args.points):
        ang = float(rng.uniform(0, 2 * np.pi))
        fp = flow.flow_origin(g, args.t, Covector([2 * np.cos(ang), 2 * np.sin(ang)], [2.0]))
        pts.append(Point(fp.x * float(rng.uniform(0.95, 1.05)), fp.u))
    spec = fio.QuadratureSpec(nodes_per_dim=16, axis_counts=[args.nodes] * 3, mode="annulus")
    pspec = fio.QuadratureSpec(nodes_per_dim=16, axis_counts=[3 * args.nodes // 4] * 3, mode="annulus")
    res = fio.dec_periodic_check(g, q, args.t, pts, args.kappa, spec, piece_spec=pspec,
                                 seed=cfg.seed)
    record = _manifest(cfg, "fio dec-check",
                       {"t": args.t, "kappa": args.kappa, "points": args.points,
                        "nodes": args.nodes})
    record["discrepancy"] = res.discrepancy
    record["pieces"] = res.pieces
    record["tolerance"] = cfg.tol("fio.dec_discrepancy")
    _dump_json(record, os.path.join(args.out, "dec_check.json") if args.out else None)
    return 0 if res.discrepancy <= record["tolerance"] else 1


def cmd_fio_l1_study(args) -> int:
    cfg = _build_config(args)
    g = _load(cfg)
    ms = list(range(args.m_min, args.m_max + 1))
    study = fio.l1_growth_study(g, ms, args.t, args.radius)
    record = _manifest(cfg, "fio l1-study",
                       {"m": ms, "t": args.t, "radius": args.radius})
    record["norms"] = study.norms
    record["slope"] = study.slope
    record["refine_change"] = {str(k): v for k, v in study.refine_change.items()}
    out_dir = args.out
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(os.path.join(out_dir, "l1_study.csv"), ["m", "l1_norm"],
                   [[m, n] for m, n in zip(ms, study.norms)])
        _dump_json(record, os.path.join(out_dir, "l1_study.json"))
    else:
        _dump_json(record)
    return 0


def cmd_fio_parametrix_study(args) -> int:
    cfg = _build_config(args)
    g = _load(cfg)
    if g.d1 != 2 or g.d2 != 1:
        print("parametrix-study requires a d1 = 2, d2 = 1 group", file=sys.stderr)
        return 2
    from .transport import SupportRegion

    s = 2.0**args.m
    region = SupportRegion(xi_band=(0.25 * s, 6.0 * s), ratio_band=(0.125, 8.0), kappa=8.0)
    q0 = gaussian_symbol(g, [2.5 * s, 0.0], [2.5 * s], region, xi_pad=0.02, ratio_pad=0.02)
    fp = flow.flow_origin(g, 0.8, Covector([2.5 * s, 0.0], [2.5 * s]))
    pts = [Point(fp.x, fp.u), Point(fp.x * 0.97, fp.u * 1.02), Point(fp.x * 1.02, fp.u)]
    spec = fio.QuadratureSpec(nodes_per_dim=args.nodes)
    study = fio.parametrix_residual_study(
        g, q0, args.N, [0.4, 0.8], pts, spec,
        iterate_kwargs=dict(t_nodes=13, xi_nodes=26, mu_nodes=26),
    )
    record = _manifest(cfg, "fio parametrix-study", {"m": args.m, "N": args.N})
    record["sup_remainder"] = study.sup_remainder
    record["ratios"] = [
        study.sup_remainder[j] / study.sup_remainder[j - 1]
        for j in range(1, len(study.sup_remainder))
        if study.sup_remainder[j - 1] > 0
    ]
    _dump_json(record, os.path.join(args.out, "parametrix_study.json") if args.out else None)
    return 0


def _bench_inline(args) -> int:
    """Compare the compiled and pure-Python kernel backends."""
    import time

    from .kernels import greedy_pack_python, phase_sum, phase_sum_python

    rng = make_rng(args.seed, 99)
    n, m, d1, d2 = args.nodes, args.points, 2, 1
    xt = rng.standard_normal((n, d1))
    ut = rng.standard_normal((n, d2))
    xit = rng.standard_normal((n, d1)) * 8.0
    mu = rng.standard_normal((n, d2)) * 8.0
    absj = np.abs(mu)[:, :, None] * np.eye(d1)[None, :, :]
    coeff = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / n
    px = rng.standard_normal((m, d1))
    pu = rng.standard_normal((m, d2))

    t0 = time.perf_counter()
    ref = phase_sum_python(px, pu, xt, ut, xit, mu, absj, coeff)
    t_py = time.perf_counter() - t0
    t0 = time.perf_counter()
    fast = phase_sum(px, pu, xt, ut, xit, mu, absj, coeff)
    t_active = time.perf_counter() - t0
    err = float(np.max(np.abs(ref - fast)))
    print(f"phase_sum  nodes={n} points={m}")
    print(f"  python  : {t_py:.4f} s")
    print(f"  {backend_name():8s}: {t_active:.4f} s   (agreement {err:.2e})")

    pts = rng.standard_normal((args.pack, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    t0 = time.perf_counter()
    mask_py = greedy_pack_python(pts, 0.05)
    t_py = time.perf_counter() - t0
    from .kernels import greedy_pack

    t0 = time.perf_counter()
    mask = greedy_pack(pts, 0.05)
    t_active = time.perf_counter() - t0
    same = bool(np.array_equal(mask_py, mask))
    print(f"greedy_pack stream={args.pack}")
    print(f"  python  : {t_py:.4f} s")
    print(f"  {backend_name():8s}: {t_active:.4f} s   (identical: {same})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="carnotwave",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("group", help="group definition commands")
    gsub = p.add_subparsers(dest="subcommand", required=True)
    pv = gsub.add_parser("validate", help="validate a group and classify it")
    _add_common(pv)
    pv.set_defaults(func=cmd_group_validate)

    p = sub.add_parser("verify", help="verification suites")
    vsub = p.add_subparsers(dest="subcommand", required=True)
    pa = vsub.add_parser("all", help="run every invariant suite")
    _add_common(pa)
    pa.add_argument("--suites", nargs="*", default=None,
                    choices=list(verify.ALL_SUITES), help="subset of suites")
    pa.set_defaults(func=cmd_verify_all)

    p = sub.add_parser("sphere", help="geodesic sphere sampling")
    ssub = p.add_subparsers(dest="subcommand", required=True)
    ps = ssub.add_parser("sample", help="sample flow endpoints to CSV")
    _add_common(ps)
    ps.add_argument("--t", type=float, default=1.0)
    ps.add_argument("--count", type=int, default=256)
    ps.add_argument("--mu-scale", type=float, default=1.0, dest="mu_scale")
    ps.set_defaults(func=cmd_sphere_sample)

    p = sub.add_parser("phase", help="phase evaluation")
    psub = p.add_subparsers(dest="subcommand", required=True)
    pe = psub.add_parser("eval", help="evaluate phi, gradients, density")
    _add_common(pe)
    pe.add_argument("--t", type=float, required=True)
    pe.add_argument("--x", type=float, nargs="+", required=True)
    pe.add_argument("--u", type=float, nargs="+", required=True)
    pe.add_argument("--xi", type=float, nargs="+", required=True)
    pe.add_argument("--mu", type=float, nargs="+", required=True)
    pe.set_defaults(func=cmd_phase_eval)

    p = sub.add_parser("transport", help="transport operator checks")
    tsub = p.add_subparsers(dest="subcommand", required=True)
    tv = tsub.add_parser("verify", help="run the transport identity table")
    _add_common(tv)
    tv.set_defaults(func=cmd_transport_verify)

    p = sub.add_parser("decompose", help="decomposition constructions")
    dsub = p.add_subparsers(dest="subcommand", required=True)
    dd = dsub.add_parser("directions", help="emit a direction set as CSV")
    _add_common(dd)
    dd.add_argument("--d", type=int, required=True)
    dd.add_argument("--m", type=int, required=True)
    dd.add_argument("--c", type=float, default=0.25)
    dd.set_defaults(func=cmd_decompose_directions)
    dr = dsub.add_parser("report", help="counts and fitted slopes as JSON")
    _add_common(dr)
    dr.add_argument("--m-min", type=int, default=2, dest="m_min")
    dr.add_argument("--m-max", type=int, default=5, dest="m_max")
    dr.add_argument("--kappa", type=float, default=1.1)
    dr.set_defaults(func=cmd_decompose_report)

    p = sub.add_parser("fio", help="oscillatory kernel studies")
    fsub = p.add_subparsers(dest="subcommand", required=True)
    fe = fsub.add_parser("eval", help="evaluate I[q](t, x)")
    _add_common(fe)
    fe.add_argument("--m", type=int, default=2)
    fe.add_argument("--h", type=int, default=0, choices=(0, 1))
    fe.add_argument("--t", type=float, default=0.5)
    fe.add_argument("--x", type=float, nargs="+", required=True)
    fe.add_argument("--u", type=float, nargs="+", required=True)
    fe.add_argument("--nodes", type=int, default=32)
    fe.add_argument("--quad-tol", type=float, default=None, dest="quad_tol")
    fe.set_defaults(func=cmd_fio_eval)

    fw = fsub.add_parser("wave-check", help="wave-operator identity residuals")
    _add_common(fw)
    fw.add_argument("--m", type=int, default=2)
    fw.add_argument("--h", type=int, default=0, choices=(0, 1))
    fw.add_argument("--points", type=int, default=5)
    fw.add_argument("--nodes", type=int, default=64)
    fw.set_defaults(func=cmd_fio_wave_check)

    fd = fsub.add_parser("dec-check", help="large-time decomposition identity")
    _add_common(fd)
    fd.add_argument("--t", type=float, default=20.0)
    fd.add_argument("--kappa", type=float, default=1.1)
    fd.add_argument("--points", type=int, default=4)
    fd.add_argument("--nodes", type=int, default=64)
    fd.set_defaults(func=cmd_fio_dec_check)

    fl = fsub.add_parser("l1-study", help="L1 growth of band kernels")
    _add_common(fl)
    fl.add_argument("--m-min", type=int, default=2, dest="m_min")
    fl.add_argument("--m-max", type=int, default=5, dest="m_max")
    fl.add_argument("--t", type=float, default=1.0)
    fl.add_argument("--radius", type=float, default=1.5)
    fl.set_defaults(func=cmd_fio_l1_study)

    fp = fsub.add_parser("parametrix-study", help="remainder-generator sizes")
    _add_common(fp)
    fp.add_argument("--m", type=int, default=3)
    fp.add_argument("--N", type=int, default=1)
    fp.add_argument("--nodes", type=int, default=36)
    fp.set_defaults(func=cmd_fio_parametrix_study)

    p = sub.add_parser("bench", help="compare kernel backends")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--nodes", type=int, default=40000)
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--pack", type=int, default=200000)
    p.set_defaults(func=_bench_inline)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CarnotWaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
