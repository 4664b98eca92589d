"""Parameter sweeps: Rabi scans, 2D reflectivity maps, and the dichroic
operating-point search.

Map nodes are independent tasks; results merge by node index so output
is bitwise identical for any worker count.  Finished nodes are cached in
a JSON-lines file keyed by a parameter hash, making half-finished maps
resumable with identical results.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np
from scipy.optimize import minimize

from . import ensemble, gridprop, ladder
from .ensemble import MomentumDistribution, Quadrature, reflectivity_matrix
from .errors import ParameterError
from .pulses import Pulse


@dataclass(frozen=True)
class ScanPoint:
    """One node of a scan with its observables (or an error marker)."""

    params: dict
    values: dict
    failed: bool = False
    error: str = ""


@dataclass
class ScanResult:
    """Rectangular scan output: points in row-major axis order."""

    axes: tuple                 # ((name, values), ...)
    points: list
    meta: dict = field(default_factory=dict)

    def value_grid(self, key):
        shape = tuple(len(v) for _, v in self.axes)
        out = np.full(shape, np.nan)
        for idx, pt in enumerate(self.points):
            if not pt.failed:
                out.flat[idx] = pt.values.get(key, np.nan)
        return out


def _node_hash(payload):
    s = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(s.encode()).hexdigest()[:16]


def rabi_scan(cfg, n, tau, rabi_grid, dist, quadrature=Quadrature(),
              backend="ladder", rabi_convention="avg", phase=0.0,
              input_class=0, **kw):
    """Class populations 0..n versus Rabi frequency at fixed duration.

    rabi_grid in rad/s, ascending, interpreted per rabi_convention
    ("avg" = envelope-averaged lab convention, "peak" = peak of f(t)).
    Per-point failures are recorded, not raised.
    """
    rabi_grid = np.asarray(rabi_grid, dtype=float)
    if np.any(np.diff(rabi_grid) <= 0):
        raise ParameterError("rabi grid must be strictly ascending")
    classes = tuple(range(n + 1))
    points = []
    for om in rabi_grid:
        params = {"rabi": float(om)}
        try:
            kwarg = {"rabi_peak" if rabi_convention == "peak" else "rabi_avg": om}
            pulse = Pulse.on_resonance(cfg, n, tau, phase=phase, **kwarg)
            cp = ensemble.ensemble_average(pulse, dist, cfg, classes=classes,
                                           quadrature=quadrature, backend=backend,
                                           input_class=input_class, **kw)
            points.append(ScanPoint(params, {f"P{c}": cp[c] for c in classes}))
        except Exception as exc:  # propagation failures recorded per point
            points.append(ScanPoint(params, {}, failed=True, error=str(exc)))
    return ScanResult(axes=(("rabi", tuple(float(v) for v in rabi_grid)),),
                      points=points,
                      meta={"n": n, "tau": tau, "backend": backend,
                            "rabi_convention": rabi_convention, "dp": dist.dp})


def first_maximum(xs, ys):
    """Location and height of the first interior local maximum.

    Parabolic refinement through the three points around the first index
    where the sequence turns over.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    for i in range(1, len(ys) - 1):
        if ys[i] >= ys[i - 1] and ys[i] > ys[i + 1]:
            denom = ys[i - 1] - 2 * ys[i] + ys[i + 1]
            if denom == 0:
                return float(xs[i]), float(ys[i])
            delta = 0.5 * (ys[i - 1] - ys[i + 1]) / denom
            delta = float(np.clip(delta, -0.5, 0.5))
            h = xs[i + 1] - xs[i]
            x0 = xs[i] + delta * h
            y0 = ys[i] - 0.25 * (ys[i - 1] - ys[i + 1]) * delta
            return float(x0), float(y0)
    raise ParameterError("no interior maximum found in scan range")


def _map_node(args):
    """Worker: one (tau, rabi) node of a reflectivity map."""
    (tau, om, n, cfg, dist, quadrature, backend, rabi_convention, pairs,
     rtol, atol) = args
    params = {"tau": float(tau), "rabi": float(om)}
    try:
        kwarg = {"rabi_peak" if rabi_convention == "peak" else "rabi_avg": om}
        pulse = Pulse.on_resonance(cfg, n, tau, **kwarg)
        rec = reflectivity_matrix(pulse, dist, cfg, order=n, quadrature=quadrature,
                                  backend=backend, rtol=rtol, atol=atol)
        values = {}
        for a, b in pairs:
            values[f"R_{a}_{b}"] = rec.pair(a, b)
            values[f"R_{a}_{b}_fwd"], values[f"R_{a}_{b}_rev"] = rec.pair_directional(a, b)
        return ScanPoint(params, values)
    except Exception as exc:
        return ScanPoint(params, {}, failed=True, error=str(exc))


def reflectivity_map(cfg, n, tau_grid, rabi_grid, pairs, dist,
                     quadrature=Quadrature(), backend="ladder",
                     rabi_convention="avg", jobs=1, cache_path=None,
                     rtol=ladder.DEFAULT_RTOL, atol=ladder.DEFAULT_ATOL,
                     progress=None):
    """2D reflectivity map over (tau, rabi) for the given class pairs.

    Node results are cached by parameter hash in cache_path (JSON lines);
    resuming a partial map reproduces a fresh run exactly.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    rabi_grid = np.asarray(rabi_grid, dtype=float)
    for g, name in ((tau_grid, "tau"), (rabi_grid, "rabi")):
        if len(g) < 2 or np.any(np.diff(g) <= 0):
            raise ParameterError(f"{name} grid must be ascending with >= 2 points")
    for a, b in pairs:
        if not (0 <= a <= n and 0 <= b <= n):
            raise ParameterError(f"pair ({a},{b}) outside classes 0..{n}")

    node_params = [(float(tau), float(om)) for tau in tau_grid for om in rabi_grid]
    ident = {"n": n, "dp": dist.dp, "p0": dist.p0, "dist": dist.kind,
             "quad": [quadrature.kind, quadrature.n, quadrature.seed],
             "backend": backend, "conv": rabi_convention,
             "pairs": sorted(map(list, pairs)), "rtol": rtol, "atol": atol}
    hashes = [_node_hash({**ident, "tau": t, "rabi": om}) for t, om in node_params]

    cached = {}
    if cache_path and os.path.exists(cache_path):
        with open(cache_path) as fh:
            for line in fh:
                rec = json.loads(line)
                cached[rec["hash"]] = rec
    todo = [i for i, h in enumerate(hashes) if h not in cached]

    args = [(node_params[i][0], node_params[i][1], n, cfg, dist, quadrature,
             backend, rabi_convention, tuple(pairs), rtol, atol) for i in todo]
    if jobs > 1 and len(args) > 1:
        with Pool(processes=jobs) as pool:
            fresh = pool.map(_map_node, args, chunksize=max(1, len(args) // (4 * jobs)))
    else:
        fresh = []
        for k, a in enumerate(args):
            fresh.append(_map_node(a))
            if progress and (k + 1) % 25 == 0:
                progress(k + 1, len(args))

    new_lines = []
    for i, pt in zip(todo, fresh):
        rec = {"hash": hashes[i], "params": pt.params, "values": pt.values,
               "failed": pt.failed, "error": pt.error}
        cached[hashes[i]] = rec
        new_lines.append(json.dumps(rec, sort_keys=True))
    if cache_path and new_lines:
        with open(cache_path, "a") as fh:
            fh.write("\n".join(new_lines) + "\n")

    points = []
    for i, h in enumerate(hashes):
        rec = cached[h]
        points.append(ScanPoint(rec["params"], rec["values"], rec["failed"],
                                rec.get("error", "")))
    failures = [p.params for p in points if p.failed]
    return ScanResult(axes=(("tau", tuple(float(v) for v in tau_grid)),
                            ("rabi", tuple(float(v) for v in rabi_grid))),
                      points=points,
                      meta={"n": n, "backend": backend, "pairs": list(map(tuple, pairs)),
                            "dp": dist.dp, "rabi_convention": rabi_convention,
                            "failures": failures, "quadrature": quadrature.kind,
                            "quad_n": quadrature.n})


@dataclass(frozen=True)
class DmpCriterion:
    """Selection rule for a dichroic operating point.

    objective = resonant pair reflectivity - lambda_pen * sum(parasitic);
    feasibility requires resonant >= min_resonant and every parasitic
    <= max_parasitic.
    """

    resonant: tuple
    parasitic: tuple
    lambda_pen: float = 1.0
    min_resonant: float = 0.5
    max_parasitic: float = 0.15

    def __post_init__(self):
        if self.lambda_pen < 0:
            raise ParameterError(f"lambda_pen must be nonnegative, got {self.lambda_pen}")

    @classmethod
    def for_order(cls, n, **kw):
        parasitic = tuple((i, n - i) for i in range(1, (n + 1) // 2))
        return cls(resonant=(0, n), parasitic=parasitic, **kw)

    def evaluate(self, values):
        res = values[f"R_{self.resonant[0]}_{self.resonant[1]}"]
        paras = [values[f"R_{a}_{b}"] for a, b in self.parasitic]
        objective = res - self.lambda_pen * sum(paras)
        feasible = res >= self.min_resonant and all(p <= self.max_parasitic for p in paras)
        return objective, feasible, res, paras


@dataclass(frozen=True)
class DmpReport:
    found: bool
    tau: float = 0.0
    rabi: float = 0.0
    objective: float = 0.0
    resonant: float = 0.0
    parasitic: tuple = ()
    dichroic_ratio: float = 0.0
    refined: bool = False
    message: str = ""


def find_dmp(map_result, criterion: DmpCriterion, refine="none", cfg=None,
             dist=None, quadrature=Quadrature(), backend="ladder",
             rabi_convention="avg", max_refine_evals=60):
    """Best feasible node of a reflectivity map under the criterion.

    refine="local" polishes (tau, rabi) with a derivative-free simplex
    running fresh simulations around the best node (needs cfg and dist).
    """
    best = None
    for pt in map_result.points:
        if pt.failed:
            continue
        objective, feasible, res, paras = criterion.evaluate(pt.values)
        if feasible and (best is None or objective > best[0]):
            best = (objective, pt, res, paras)
    if best is None:
        return DmpReport(found=False, message="no operating point in range satisfies "
                                              "the resonant/parasitic constraints")
    objective, pt, res, paras = best
    tau, om = pt.params["tau"], pt.params["rabi"]
    refined = False
    if refine == "local":
        if cfg is None or dist is None:
            raise ParameterError("refine='local' needs cfg and dist")
        n = map_result.meta["n"]
        pairs = [criterion.resonant, *criterion.parasitic]

        def neg_obj(x):
            t, o = x
            if t <= 0 or o <= 0:
                return 1e3
            args = (t, o, n, cfg, dist, quadrature, backend, rabi_convention,
                    tuple(pairs), ladder.DEFAULT_RTOL, ladder.DEFAULT_ATOL)
            p = _map_node(args)
            if p.failed:
                return 1e3
            obj, _, _, _ = criterion.evaluate(p.values)
            return -obj

        taus = map_result.axes[0][1]
        oms = map_result.axes[1][1]
        dt = (taus[-1] - taus[0]) / max(1, len(taus) - 1)
        do = (oms[-1] - oms[0]) / max(1, len(oms) - 1)
        r = minimize(neg_obj, x0=[tau, om], method="Nelder-Mead",
                     options={"maxfev": max_refine_evals, "xatol": dt / 10,
                              "fatol": 1e-4,
                              "initial_simplex": [[tau, om], [tau + dt, om],
                                                  [tau, om + do]]})
        if r.fun < -objective:
            tau, om = float(r.x[0]), float(r.x[1])
            objective = -float(r.fun)
            args = (tau, om, map_result.meta["n"], cfg, dist, quadrature, backend,
                    rabi_convention, tuple(pairs), ladder.DEFAULT_RTOL,
                    ladder.DEFAULT_ATOL)
            p = _map_node(args)
            _, _, res, paras = criterion.evaluate(p.values)
            refined = True
    ratio = res / max(max(paras), 1e-12) if paras else np.inf
    return DmpReport(found=True, tau=tau, rabi=om, objective=objective,
                     resonant=res, parasitic=tuple(paras), dichroic_ratio=float(ratio),
                     refined=refined)


def pulse_area_labels(map_result, pair):
    """Label reflectivity extrema along each tau row with pi multiples.

    Counting from rabi = 0: the k-th maximum of the pair reflectivity is
    "(2k-1)pi", the k-th minimum after a maximum is "2k pi".
    """
    key = f"R_{pair[0]}_{pair[1]}"
    taus = map_result.axes[0][1]
    oms = np.asarray(map_result.axes[1][1])
    grid = map_result.value_grid(key)
    labels = []
    for i, tau in enumerate(taus):
        row = grid[i]
        n_max = n_min = 0
        for jj in range(1, len(oms) - 1):
            if np.isnan(row[jj - 1]) or np.isnan(row[jj]) or np.isnan(row[jj + 1]):
                continue
            if row[jj] >= row[jj - 1] and row[jj] > row[jj + 1]:
                n_max += 1
                labels.append({"tau": float(tau), "rabi": float(oms[jj]),
                               "kind": "max", "label": f"{2 * n_max - 1}pi"})
            elif n_max > 0 and row[jj] <= row[jj - 1] and row[jj] < row[jj + 1]:
                n_min += 1
                labels.append({"tau": float(tau), "rabi": float(oms[jj]),
                               "kind": "min", "label": f"{2 * n_min}pi"})
    return labels


def spot_check(cfg, map_result, dist, n_nodes=5, seed=0, tol=1e-3,
               quadrature=None, grid_opts=None):
    """Cross-validate random map nodes against the grid backend.

    Compares plane-wave class populations (all inputs 0..n) between the
    ladder and split-step backends at n_nodes nodes drawn by a seeded
    RNG; records the worst absolute deviation.
    """
    rng = np.random.default_rng(seed)
    ok_points = [p for p in map_result.points if not p.failed]
    picks = rng.choice(len(ok_points), size=min(n_nodes, len(ok_points)), replace=False)
    n = map_result.meta["n"]
    conv = map_result.meta.get("rabi_convention", "avg")
    worst = 0.0
    details = []
    delta = MomentumDistribution("delta", 0.0, 0.0)
    for ipick in sorted(int(i) for i in picks):
        pt = ok_points[ipick]
        kwarg = {"rabi_peak" if conv == "peak" else "rabi_avg": pt.params["rabi"]}
        pulse = Pulse.on_resonance(cfg, n, pt.params["tau"], **kwarg)
        rec_l = reflectivity_matrix(pulse, delta, cfg, order=n, backend="ladder")
        rec_g = reflectivity_matrix(pulse, delta, cfg, order=n, backend="grid",
                                    grid_opts=grid_opts)
        dev = float(np.max(np.abs(rec_l.matrix - rec_g.matrix)))
        worst = max(worst, dev)
        details.append({"tau": pt.params["tau"], "rabi": pt.params["rabi"],
                        "max_abs_dev": dev})
    return {"max_abs_dev": worst, "tol": tol, "passes": bool(worst < tol),
            "nodes": details}
