"""Mach-Zehnder sequences: coherent runs, path-resolved branch tracking,
mirror response tables and fringe scans.

Ports are the two detected momentum classes 0 and n.  The path-resolved
run splits the state into momentum-class branches after designated
pulses and propagates each branch independently; because propagation is
linear, the coherent sum of all branches reproduces the unsplit run
exactly (up to pruned mass).

Two per-branch delivery metrics are reported:

* port_class_mass - branch mass ending in the port classes {0, n}
  (final momentum binning).
* port_coupled_mass - branch mass on trajectory-closing class histories,
  i.e. paths whose free-flight displacement matches the resonant arms so
  they arrive at the final beam splitter on the detected output ports.
  A mirror that redirects class c to n - c closes the path; this is the
  quantity the path-resolved population plots visualize, and it does not
  depend on the free-evolution time.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import ladder
from .ensemble import (ClassPopulations, MomentumDistribution, Quadrature,
                       class_populations, ensemble_average)
from .errors import ParameterError
from .pulses import FreeEvolution, Pulse, PulseSequence

DEFAULT_MAX_BRANCHES = 64


@dataclass(frozen=True)
class PortReport:
    """Detected-port probabilities of an interferometer run."""

    ports: dict                  # class -> probability
    undetected: float
    pruned: float = 0.0
    per_branch: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def total(self):
        return sum(self.ports.values()) + self.undetected


@dataclass
class PathNode:
    """One branch of the path tree, keyed by its class history."""

    history: tuple               # class after each splitting pulse
    weight: float                # branch mass at the last split
    port_class_mass: float = 0.0
    port_coupled_mass: float = 0.0
    final_populations: dict = field(default_factory=dict)
    children: list = field(default_factory=list)


def _expected_ports(seq):
    n = seq.order_hint
    return (0, n)


def run_mzi(seq, dist, cfg, quadrature=Quadrature(), backend="ladder", **kw):
    """Coherent propagation through the full sequence; no path splitting."""
    n = seq.order_hint
    ports = _expected_ports(seq)
    classes = tuple(range(n + 1))
    cp = ensemble_average(seq, dist, cfg, classes=classes, quadrature=quadrature,
                          backend=backend, **kw)
    port_mass = {p: cp.raw[p] for p in ports}
    undetected = 1.0 - sum(port_mass.values())
    return PortReport(ports=port_mass, undetected=undetected,
                      meta={"backend": backend, "dp": dist.dp,
                            "normalized_ports": {p: cp[p] for p in ports}})


def _pulse_indices(seq):
    return [i for i, it in enumerate(seq.items) if isinstance(it, Pulse)]


def _free_displacement_after(seq, split_positions):
    """Free-flight displacement per unit class for each segment between splits."""
    # segments: free-evolution durations after each pulse
    segs = []
    cur = 0.0
    for it in seq.items:
        if isinstance(it, FreeEvolution):
            cur += it.duration
        else:
            segs.append(cur)
            cur = 0.0
    segs.append(cur)
    return segs  # segs[k] = free time before pulse k; segs[-1] after last


def path_resolved_mzi(seq, dist, cfg, quadrature=Quadrature(), backend="ladder",
                      split_after=(0, 1), keep_classes=None,
                      max_branches=DEFAULT_MAX_BRANCHES,
                      rtol=ladder.DEFAULT_RTOL, atol=ladder.DEFAULT_ATOL):
    """Split the state into class branches after designated pulses.

    split_after lists pulse ordinals (0-based, counting pulses only).
    Branch results are ensemble-averaged over the momentum distribution;
    all branches and quadrature nodes propagate in one batch.  Only the
    ladder backend supports branch tracking.
    """
    if backend != "ladder":
        raise ParameterError("path-resolved runs support the ladder backend only")
    n = seq.order_hint
    ports = _expected_ports(seq)
    if keep_classes is None:
        keep_classes = tuple(range(n + 1))
    pulse_ids = _pulse_indices(seq)
    split_after = tuple(sorted(set(split_after)))
    for s in split_after:
        if s not in range(len(pulse_ids)):
            raise ParameterError(f"split_after index {s} out of range for "
                                 f"{len(pulse_ids)} pulses")
    if len(keep_classes) ** len(split_after) > max_branches:
        raise ParameterError(
            f"splitting into {len(keep_classes)}^{len(split_after)} branches exceeds "
            f"max_branches={max_branches}; split after fewer pulses or raise the limit")

    # free-evolution time between consecutive pulses, for the closing test
    gaps = _free_displacement_after(seq, split_after)

    qs, wts = dist.nodes(quadrature)
    j_min, j_max = ladder.default_j_window(n)
    jj = np.arange(j_min, j_max + 1)
    dim, nq = len(jj), len(qs)
    units = cfg.units()

    def displacement(history):
        # drift accumulated in the gaps following each split pulse
        d = 0.0
        for k, cls in enumerate(history):
            d += cls * gaps[split_after[k] + 1] if split_after[k] + 1 < len(gaps) else 0.0
        return d

    ref_lower = displacement(tuple(0 if k % 2 == 0 else n for k in range(len(split_after))))
    ref_upper = displacement(tuple(n if k % 2 == 0 else 0 for k in range(len(split_after))))

    histories = [()]
    C = np.zeros((dim, nq, 1), dtype=complex)
    C[0 - j_min, :, 0] = 1.0
    pruned_per_q = np.zeros(nq)

    pulse_counter = -1
    for item in seq.items:
        if isinstance(item, FreeEvolution):
            T_t = units.to_dimensionless(item.duration, "time")
            K = (qs[None, :] + jj[:, None]) ** 2
            C = C * np.exp(-1j * K * T_t)[:, :, None]
            continue
        pulse_counter += 1
        C = ladder.propagate_batch(qs, C, item, cfg, rtol=rtol, atol=atol,
                                   j_window=(j_min, j_max))
        if pulse_counter in split_after:
            before = np.sum(np.abs(C) ** 2, axis=0)                 # (nq, nb)
            new_histories = []
            Cn = np.zeros((dim, nq, len(histories) * len(keep_classes)), dtype=complex)
            col = 0
            kept = np.zeros_like(before)
            for b, h in enumerate(histories):
                for cls in keep_classes:
                    Cn[cls - j_min, :, col] = C[cls - j_min, :, b]
                    kept[:, b] += np.abs(C[cls - j_min, :, b]) ** 2
                    new_histories.append(h + (cls,))
                    col += 1
            pruned_per_q += np.sum(before - kept, axis=1)
            histories, C = new_histories, Cn

    pops = np.abs(C) ** 2                                            # (dim, nq, nb)
    branch_mass = np.tensordot(wts, pops.sum(axis=0), axes=(0, 0))   # (nb,)
    port_rows = [p - j_min for p in ports]
    port_mass_b = np.tensordot(wts, pops[port_rows].sum(axis=0), axes=(0, 0))
    pruned_total = float(np.dot(wts, pruned_per_q))

    tree = []
    for b, h in enumerate(histories):
        closed = abs(displacement(h) - ref_lower) < 1e-12 * max(1.0, abs(ref_lower)) \
            or abs(displacement(h) - ref_upper) < 1e-12 * max(1.0, abs(ref_upper))
        finals = {int(j): float(np.dot(wts, pops[j - j_min, :, b])) for j in jj}
        tree.append(PathNode(history=h, weight=float(branch_mass[b]),
                             port_class_mass=float(port_mass_b[b]),
                             port_coupled_mass=float(branch_mass[b]) if closed else 0.0,
                             final_populations=finals))

    # coherent recombination of branches (exact by linearity)
    total = C.sum(axis=2)                                            # (dim, nq)
    pops_coh = np.abs(total) ** 2
    coherent_final = {p: float(np.dot(wts, pops_coh[p - j_min])) for p in ports}
    coherent_final["undetected"] = float(np.dot(wts, pops_coh.sum(axis=0))) \
        - sum(coherent_final[p] for p in ports)

    # detector model: only trajectory-closing paths overlap the port spots
    closing_cols = [b for b, nd in enumerate(tree) if nd.port_coupled_mass > 0]
    total_closing = C[:, :, closing_cols].sum(axis=2)
    pops_closing = np.abs(total_closing) ** 2
    ports_closing = {p: float(np.dot(wts, pops_closing[p - j_min])) for p in ports}
    per_branch = {">".join(map(str, nd.history)): {
        "weight": nd.weight,
        "port_class_mass": nd.port_class_mass,
        "port_coupled_mass": nd.port_coupled_mass,
        "port_class_fraction": nd.port_class_mass / nd.weight if nd.weight > 0 else 0.0,
        "port_coupled_fraction": nd.port_coupled_mass / nd.weight if nd.weight > 0 else 0.0,
    } for nd in tree}
    report = PortReport(ports={p: coherent_final[p] for p in ports},
                        undetected=coherent_final["undetected"],
                        pruned=pruned_total, per_branch=per_branch,
                        meta={"split_after": split_after, "ports": ports,
                              "dp": dist.dp, "ports_closing": ports_closing})
    return tree, report


def branch_summary(tree, level=0):
    """Aggregate path-tree leaves by the class taken at one split level.

    Returns {class: {weight, port_class_mass, port_coupled_mass,
    port_class_fraction, port_coupled_fraction}}.
    """
    agg = {}
    for nd in tree:
        if level >= len(nd.history):
            continue
        key = nd.history[level]
        rec = agg.setdefault(key, {"weight": 0.0, "port_class_mass": 0.0,
                                   "port_coupled_mass": 0.0})
        rec["weight"] += nd.weight
        rec["port_class_mass"] += nd.port_class_mass
        rec["port_coupled_mass"] += nd.port_coupled_mass
    for rec in agg.values():
        w = rec["weight"]
        rec["port_class_fraction"] = rec["port_class_mass"] / w if w > 0 else 0.0
        rec["port_coupled_fraction"] = rec["port_coupled_mass"] / w if w > 0 else 0.0
    return agg


def mirror_response(input_classes, mirror, dist, cfg, quadrature=Quadrature(),
                    backend="ladder", **kw):
    """Before/after class populations for each prepared input class."""
    n = mirror.order_hint
    classes = tuple(range(n + 1))
    out = []
    for cls in input_classes:
        if not 0 <= cls <= n:
            raise ParameterError(f"input class {cls} outside 0..{n}")
        before = {c: (1.0 if c == cls else 0.0) for c in classes}
        cp = ensemble_average(mirror, dist, cfg, classes=classes,
                              quadrature=quadrature, backend=backend,
                              input_class=cls, **kw)
        out.append({"input": cls, "before": before, "after": dict(cp.probs)})
    return out


@dataclass(frozen=True)
class FringeFit:
    offset: float
    contrast: float
    phase: float
    harmonic: int
    max_residual: float
    ok: bool


def fit_fringe(phis, values, harmonic):
    """Least-squares single-harmonic fit offset*(1 + contrast*cos(n*phi - phase))."""
    phis = np.asarray(phis, dtype=float)
    y = np.asarray(values, dtype=float)
    A = np.column_stack([np.ones_like(phis), np.cos(harmonic * phis),
                         np.sin(harmonic * phis)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    a0, ac, as_ = coef
    resid = float(np.max(np.abs(A @ coef - y)))
    amp = float(np.hypot(ac, as_))
    if a0 <= 0:
        return FringeFit(float(a0), 0.0, 0.0, harmonic, resid, ok=False)
    return FringeFit(float(a0), amp / a0, float(np.arctan2(as_, ac)), harmonic,
                     resid, ok=True)


def fringe_scan(seq, phi3_grid, dist, cfg, quadrature=Quadrature(),
                backend="ladder", detected="closing", **kw):
    """Port probabilities versus the final pulse's lattice phase.

    The grid must span at least 2*pi (as a periodic sampling).  Returns
    the per-phase table and a single-harmonic fit at the 2n-photon
    harmonic (n = sequence order); the fit's max residual quantifies
    multipath distortion.

    detected="closing" models the far-field detector: only
    trajectory-closing paths overlap the port spots (paths a mirror left
    displaced never reach them).  detected="all" bins the full final
    state by momentum class instead.
    """
    if detected not in ("closing", "all"):
        raise ParameterError(f"unknown detector model {detected!r}")
    phi3_grid = np.asarray(phi3_grid, dtype=float)
    span = phi3_grid.max() - phi3_grid.min()
    step = span / max(1, len(phi3_grid) - 1)
    if span + step < 2 * np.pi - 1e-9:   # periodic sampling covers a full turn
        raise ParameterError("phi3 grid must span at least 2*pi")
    n = seq.order_hint
    ports = _expected_ports(seq)
    last_pulse_idx = max(i for i, it in enumerate(seq.items) if isinstance(it, Pulse))
    rows = []
    for phi3 in phi3_grid:
        items = list(seq.items)
        items[last_pulse_idx] = replace(items[last_pulse_idx], phase=float(phi3))
        new_seq = PulseSequence(tuple(items))
        if detected == "closing":
            _, rep = path_resolved_mzi(new_seq, dist, cfg, quadrature=quadrature,
                                       backend=backend, **kw)
            port_vals = rep.meta["ports_closing"]
        else:
            rep = run_mzi(new_seq, dist, cfg, quadrature=quadrature,
                          backend=backend, **kw)
            port_vals = rep.ports
        rows.append({"phi3": float(phi3),
                     **{f"port_{p}": port_vals[p] for p in ports},
                     "undetected": 1.0 - sum(port_vals[p] for p in ports)})
    fits = {}
    for p in ports:
        fits[p] = fit_fringe([r["phi3"] for r in rows],
                             [r[f"port_{p}"] for r in rows], harmonic=n)
    return rows, fits
