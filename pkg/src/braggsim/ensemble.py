"""Incoherent momentum-spread averaging, class populations and reflectivities.

The atomic cloud is modeled as an incoherent mixture of plane waves drawn
from a momentum distribution; class populations are diagonal in
quasimomentum, so averaging the per-sample populations is exact (a
coherent wavepacket of the same width gives identical class populations,
which the tests verify against the grid backend).

Momenta in this module are in units of hbar*k_eff.  Classes are indexed
on each sample's own comb (class i sits at momentum q + i), matching the
far-field analysis of shifted clouds and keeping the grid and ladder
backends consistent for every quasimomentum.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import gridprop, ladder
from .errors import ParameterError
from .pulses import FreeEvolution, Pulse, PulseSequence

DEFAULT_BIN_HALFWIDTH = 0.5
DEFAULT_GH_NODES = 41


@dataclass(frozen=True)
class Quadrature:
    """Averaging rule over the momentum distribution."""

    kind: str = "gauss-hermite"   # or "monte-carlo"
    n: int = DEFAULT_GH_NODES
    seed: int = 12345

    def __post_init__(self):
        if self.kind not in ("gauss-hermite", "monte-carlo"):
            raise ParameterError(f"unknown quadrature kind {self.kind!r}")
        if self.n < 1:
            raise ParameterError(f"quadrature size must be >= 1, got {self.n}")


@dataclass(frozen=True)
class MomentumDistribution:
    """Initial momentum distribution (units hbar*k_eff).

    dp is the standard deviation of the Gaussian; tabulated
    distributions carry (momentum, weight) rows with nonnegative weights.
    """

    kind: str = "gaussian"        # "gaussian" | "delta" | "tabulated"
    p0: float = 0.0
    dp: float = 0.0
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("gaussian", "delta", "tabulated"):
            raise ParameterError(f"unknown distribution kind {self.kind!r}")
        if self.dp < 0:
            raise ParameterError(f"momentum spread must be nonnegative, got {self.dp}")
        if self.kind == "tabulated":
            w = np.asarray([r[1] for r in self.table], dtype=float)
            if len(w) == 0 or np.any(w < 0) or w.sum() <= 0:
                raise ParameterError("tabulated distribution needs nonnegative weights")

    def shifted(self, delta):
        return replace(self, p0=self.p0 + delta)

    def nodes(self, quadrature: Quadrature):
        """(momenta, weights) with weights summing to 1."""
        if self.kind == "tabulated":
            p = np.asarray([r[0] for r in self.table], dtype=float)
            w = np.asarray([r[1] for r in self.table], dtype=float)
            return p, w / w.sum()
        if self.kind == "delta" or self.dp == 0.0:
            return np.array([self.p0]), np.array([1.0])
        if quadrature.kind == "gauss-hermite":
            x, w = np.polynomial.hermite.hermgauss(quadrature.n)
            return self.p0 + np.sqrt(2.0) * self.dp * x, w / np.sqrt(np.pi)
        rng = np.random.default_rng(quadrature.seed)
        p = rng.normal(self.p0, self.dp, quadrature.n)
        return p, np.full(quadrature.n, 1.0 / quadrature.n)


@dataclass(frozen=True)
class ClassPopulations:
    """Momentum-class probabilities, normalized over a class set.

    raw holds the unnormalized bin masses (including any classes outside
    the normalization set that were requested).
    """

    probs: dict
    raw: dict
    norm_set: tuple
    bin_halfwidth: float = DEFAULT_BIN_HALFWIDTH
    meta: dict = field(default_factory=dict)

    def __getitem__(self, cls):
        return self.probs.get(cls, 0.0)


def class_populations(state, classes, bin_halfwidth=DEFAULT_BIN_HALFWIDTH,
                      norm_set=None):
    """Bin a state's momentum density into classes and normalize.

    Ladder states use |c_j|^2 directly; grid states integrate |psi(p)|^2
    over [q + i - b, q + i + b).  Bins must not overlap (b <= class
    spacing / 2).
    """
    classes = tuple(int(c) for c in classes)
    if bin_halfwidth <= 0 or bin_halfwidth > 0.5:
        raise ParameterError(
            f"bin halfwidth must lie in (0, 0.5] so class bins cannot overlap, "
            f"got {bin_halfwidth}")
    if norm_set is None:
        norm_set = classes
    raw = {}
    if isinstance(state, ladder.LadderState):
        for c in classes:
            raw[c] = state.population(c)  # comb classes are exact points
    else:
        pk = np.abs(np.fft.fft(state.psi)) ** 2
        pk /= pk.sum()
        k = state.grid.k
        for c in classes:
            sel = (k >= c - bin_halfwidth) & (k < c + bin_halfwidth)
            raw[c] = float(pk[sel].sum())
    total = sum(raw[c] for c in norm_set)
    if total <= 0:
        raise ParameterError("no population in the normalization set")
    probs = {c: raw[c] / total for c in norm_set}
    return ClassPopulations(probs=probs, raw=raw, norm_set=tuple(norm_set),
                            bin_halfwidth=bin_halfwidth)


def _sequence_pulses(pulse_or_seq):
    if isinstance(pulse_or_seq, Pulse):
        return PulseSequence((pulse_or_seq,))
    return pulse_or_seq


def _ladder_batch_populations(seq, qs, input_classes, cfg, order, rtol, atol,
                              j_window=None):
    """Class populations (dim, nq, ni) after a sequence, batched over momenta."""
    if j_window is None:
        j_window = ladder.default_j_window(order)
    j_min, j_max = j_window
    dim = j_max - j_min + 1
    nq, ni = len(qs), len(input_classes)
    c = np.zeros((dim, nq, ni), dtype=complex)
    for col, cls in enumerate(input_classes):
        if not j_min <= cls <= j_max:
            raise ParameterError(f"input class {cls} outside window {j_window}")
        c[cls - j_min, :, col] = 1.0
    units = cfg.units()
    j = np.arange(j_min, j_max + 1)
    for item in seq.items:
        if isinstance(item, Pulse):
            c = ladder.propagate_batch(qs, c, item, cfg, rtol=rtol, atol=atol,
                                       j_window=j_window)
        else:
            T_t = units.to_dimensionless(item.duration, "time")
            K = (qs[None, :] + j[:, None]) ** 2
            c = c * np.exp(-1j * K * T_t)[:, :, None]
    return np.abs(c) ** 2, j_min


def grid_opts_scheme(grid_opts):
    from .splitting import get_scheme
    return get_scheme(grid_opts.get("scheme", "pp34a"))


def ensemble_average(pulse_or_seq, dist, cfg, classes=None,
                     quadrature=Quadrature(), backend="ladder",
                     input_class=0, rtol=ladder.DEFAULT_RTOL,
                     atol=ladder.DEFAULT_ATOL, grid_opts=None,
                     return_samples=False):
    """Average class populations over the momentum distribution.

    The distribution's p0 is interpreted relative to class `input_class`
    times hbar*k_eff (so input_class=1 with a zero-mean distribution
    prepares a cloud around p = 1).  Deterministic for gauss-hermite and
    fixed-seed monte-carlo.
    """
    seq = _sequence_pulses(pulse_or_seq)
    order = seq.order_hint
    if classes is None:
        classes = tuple(range(order + 1))
    qs, wts = dist.nodes(quadrature)
    if backend == "ladder":
        pops, j_min = _ladder_batch_populations(seq, qs, (input_class,), cfg,
                                                order, rtol, atol)
        per_sample = pops[:, :, 0]                    # (dim, nq)
        raw = {c: float(np.dot(wts, per_sample[c - j_min])) for c in classes}
        samples = [{c: float(per_sample[c - j_min, i]) for c in classes}
                   for i in range(len(qs))] if return_samples else None
    elif backend == "grid":
        gopts = dict(grid_opts or {})
        tol = gopts.pop("tol", gridprop.DEFAULT_TOL)
        scheme = grid_opts_scheme(gopts)
        gopts.pop("scheme", None)
        grid = gridprop.Grid(**gopts)
        raws = []
        for q in qs:
            st = gridprop.plane_wave(grid, input_class, q)
            for item in seq.items:
                if isinstance(item, Pulse):
                    st = gridprop.propagate_pulse(st, item, cfg, scheme=scheme, tol=tol)
                else:
                    st = gridprop.free_evolve(st, item.duration, cfg)
            cp = class_populations(st, classes)
            raws.append(cp.raw)
        raw = {c: float(np.dot(wts, [r[c] for r in raws])) for c in classes}
        samples = raws if return_samples else None
    else:
        raise ParameterError(f"unknown backend {backend!r}; use 'ladder' or 'grid'")
    total = sum(raw.values())
    probs = {c: raw[c] / total for c in classes}
    cp = ClassPopulations(probs=probs, raw=raw, norm_set=tuple(classes),
                          meta={"backend": backend, "quadrature": quadrature.kind,
                                "n_nodes": len(qs), "dp": dist.dp,
                                "input_class": input_class})
    return (cp, samples) if return_samples else cp


@dataclass(frozen=True)
class ReflectivityRecord:
    """Momentum-class transfer matrix for one mirror pulse and spread.

    matrix[a][b] = normalized probability of ending in class b for a
    cloud prepared in class a; pair reflectivities are reported both
    per-direction and direction-averaged.
    """

    order: int
    tau: float                # s
    rabi_peak: float          # rad/s
    rabi_avg: float           # rad/s
    delta_omega: float        # rad/s
    phase: float
    dp: float                 # hbar*k_eff
    backend: str
    classes: tuple
    matrix: np.ndarray        # normalized, shape (n+1, n+1)
    raw_matrix: np.ndarray

    def pair(self, a, b):
        """Direction-averaged pair reflectivity (P(a->b) + P(b->a)) / 2."""
        return 0.5 * (self.matrix[a, b] + self.matrix[b, a])

    def pair_directional(self, a, b):
        return self.matrix[a, b], self.matrix[b, a]


def reflectivity_matrix(mirror, dist, cfg, order=None, quadrature=Quadrature(),
                        backend="ladder", rtol=ladder.DEFAULT_RTOL,
                        atol=ladder.DEFAULT_ATOL, grid_opts=None):
    """Reflectivity matrix over classes 0..n for one mirror pulse.

    Each input class a is prepared as the distribution shifted by a; the
    same pulse is applied to all inputs.
    """
    n = mirror.order_hint if order is None else order
    classes = tuple(range(n + 1))
    if backend == "ladder":
        qs, wts = dist.nodes(quadrature)
        seq = _sequence_pulses(mirror)
        pops, j_min = _ladder_batch_populations(seq, qs, classes, cfg, n, rtol, atol)
        raw = np.empty((n + 1, n + 1))
        for col, a in enumerate(classes):
            w = np.tensordot(wts, pops[:, :, col].T, axes=(0, 0))   # (dim,)
            for b in classes:
                raw[a, b] = w[b - j_min]
    elif backend == "grid":
        raw = np.empty((n + 1, n + 1))
        for a in classes:
            cp = ensemble_average(mirror, dist, cfg, classes=classes,
                                  quadrature=quadrature, backend="grid",
                                  input_class=a, grid_opts=grid_opts)
            for b in classes:
                raw[a, b] = cp.raw[b]
    else:
        raise ParameterError(f"unknown backend {backend!r}")
    norm = raw.sum(axis=1, keepdims=True)
    if np.any(norm <= 0):
        raise ParameterError("an input class lost all population from the class set")
    return ReflectivityRecord(order=n, tau=mirror.duration, rabi_peak=mirror.rabi_peak,
                              rabi_avg=mirror.rabi_avg, delta_omega=mirror.delta_omega,
                              phase=mirror.phase, dp=dist.dp, backend=backend,
                              classes=classes, matrix=raw / norm, raw_matrix=raw)


def robustness_curve(mirror, dp_grid, cfg, order=None, quadrature=Quadrature(),
                     backend="ladder", base_dist=None, **kw):
    """One ReflectivityRecord per momentum spread in dp_grid (ascending)."""
    dp_grid = list(dp_grid)
    if not dp_grid or any(b < a for a, b in zip(dp_grid, dp_grid[1:])):
        raise ParameterError("dp grid must be nonempty and ascending")
    base = base_dist or MomentumDistribution("gaussian", 0.0, 0.0)
    out = []
    for dp in dp_grid:
        dist = replace(base, dp=float(dp), kind="delta" if dp == 0 else "gaussian")
        out.append(reflectivity_matrix(mirror, dist, cfg, order=order,
                                       quadrature=quadrature, backend=backend, **kw))
    return out
