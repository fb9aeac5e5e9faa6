"""Numerical experiments on nonlinear smoothing and the resonant phase.

All norms use the coefficient convention of :mod:`kdvlab.spectral`.
Experiments that compare against the actual KdV flow default to the
coupling the solver exhibits (:data:`KDV_COUPLING`); the closed-form probes
default to the displayed coupling 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.signal.windows import tukey

from .errors import ConfigError, NumericFailure, PreconditionError
from .normal_form import (DEFAULT_COUPLING, KDV_COUPLING, Scale, j_trilinear,
                          phase_shift, r_evolve, r_star, resonant_rate, t_bilinear)
from .solver import SolverConfig, Trajectory, airy_propagate, evolve
from .spectral import (FourierField, MultiplierSymbol, apply_multiplier, bracket,
                       random_rough_field, rough_norm_bound, sobolev_norm)


# -- tail slopes -------------------------------------------------------------------

def default_band(n):
    return (max(1, n // 8), max(2, n // 4))


def tail_slope(field, band=None, bins_per_octave=8):
    """Decay exponent of ``|a_xi|`` against ``<xi>`` over ``band``.

    Frequencies ``lo <= |xi| <= hi`` are grouped in log-uniform bins
    (``bins_per_octave`` per octave); the slope is the least-squares fit of
    ``log(mean |a| in bin)`` against the mean ``log <xi>`` of the bin.
    """
    n = field.n
    lo, hi = default_band(n) if band is None else (int(band[0]), int(band[1]))
    if lo < 1 or hi <= lo or hi > n:
        raise ConfigError(f"empty or invalid band [{lo}, {hi}] for N = {n}")
    if hi > (2 * n) // 3 + 1:
        raise ConfigError(f"band upper end {hi} lies outside |xi| <= 2N/3")
    if hi < 2 * lo:
        raise ConfigError("band must span at least one octave")
    k = np.arange(lo, hi + 1)
    mag = 0.5 * (np.abs(field.coeffs[n + k]) + np.abs(field.coeffs[n - k]))
    if not np.any(mag > 0):
        raise NumericFailure("all-zero band; slope undefined")
    nbins = max(2, int(round(bins_per_octave * math.log2(hi / lo))))
    edges = np.exp(np.linspace(math.log(lo), math.log(hi + 1), nbins + 1))
    which = np.clip(np.searchsorted(edges, k, side="right") - 1, 0, nbins - 1)
    xs, ys = [], []
    for b in range(nbins):
        sel = which == b
        if not sel.any():
            continue
        m = mag[sel].mean()
        if m > 0:
            xs.append(np.log(bracket(k[sel])).mean())
            ys.append(math.log(m))
    if len(xs) < 2:
        raise NumericFailure("fewer than two non-empty bins in band")
    return float(np.polyfit(xs, ys, 1)[0])


# -- residual reports ----------------------------------------------------------

@dataclass
class SmoothingReport:
    """Residual norms per sample time and sigma, plus final-time tail slopes.

    ``unshifted[i, j]`` is ``||u(t_i) - airy(u0, t_i)||_{H^sigma_j}`` and
    ``shifted[i, j]`` is ``||u(t_i) - R*[u0](t_i)||_{H^sigma_j}``, which equals
    ``||S[u](t_i) - airy(u0, t_i)||`` mode by mode.
    """

    n: int
    times: np.ndarray
    sigmas: list
    unshifted: np.ndarray
    shifted: np.ndarray
    slopes: dict
    coupling: float
    linear: bool = False
    meta: dict = dc_field(default_factory=dict)

    def rows(self, experiment="residual"):
        """Long-format rows ``(experiment, t, sigma, N, value)``."""
        out = []
        for name, arr in (("unshifted", self.unshifted), ("shifted", self.shifted)):
            for i, t in enumerate(self.times):
                for j, sg in enumerate(self.sigmas):
                    out.append((f"{experiment}:{name}", float(t), float(sg), self.n,
                                float(arr[i, j])))
        return out

    def summary(self):
        return {"n": self.n, "sigmas": list(self.sigmas), "slopes": self.slopes,
                "coupling": self.coupling, "linear": self.linear,
                "final_unshifted": self.unshifted[-1].tolist(),
                "final_shifted": self.shifted[-1].tolist(), **self.meta}


def residual_report(u0, params, cfg, sigma_grid, coupling=KDV_COUPLING, traj=None):
    """Evolve ``u0`` and measure both residuals at every sample.

    With ``cfg.nonlinear = False`` the solver runs the Airy flow only, so the
    unshifted residual vanishes and the shifted one is the bare phase gap.
    """
    if traj is None:
        traj = evolve(u0, cfg)
    sigmas = [float(x) for x in sigma_grid]
    k = len(traj.times)
    un = np.zeros((k, len(sigmas)))
    sh = np.zeros((k, len(sigmas)))
    for i, (t, u) in enumerate(zip(traj.times, traj.fields)):
        t = float(t)
        d_un = u - airy_propagate(u0, t)
        d_sh = u - r_star(u0, params.s, t, coupling)
        for j, sg in enumerate(sigmas):
            un[i, j] = sobolev_norm(d_un, sg)
            sh[i, j] = sobolev_norm(d_sh, sg)
    t_end = float(traj.times[-1])
    u_end = traj.fields[-1]
    slopes = {"u0": tail_slope(u0)}
    for name, d in (("unshifted", u_end - airy_propagate(u0, t_end)),
                    ("shifted", u_end - r_star(u0, params.s, t_end, coupling))):
        try:
            slopes[name] = tail_slope(d)
        except NumericFailure:
            slopes[name] = None
    return SmoothingReport(u0.n, np.asarray(traj.times), sigmas, un, sh, slopes,
                           float(coupling), not cfg.nonlinear)


def phase_gap_norm(u0, t, sigma, coupling=KDV_COUPLING):
    """Closed form of ``||S[airy(u0)](t) - airy(u0, t)||_{H^sigma}``.

    ``sqrt(sum <xi>^{2 sigma} |exp(-i rate t) - 1|^2 |a_xi|^2)``.
    """
    rates = resonant_rate(u0, 0.0, Scale.U, coupling).rates
    w = bracket(u0.freqs) ** (2 * sigma)
    gap = np.abs(np.exp(-1j * rates * t) - 1.0) ** 2 * np.abs(u0.coeffs) ** 2
    return float(np.sqrt(np.sum(w * gap)))


def _check_nested(fields):
    big = fields[-1]
    for f in fields[:-1]:
        if not np.array_equal(big.resized(f.n).coeffs, f.coeffs):
            raise PreconditionError("data are not nested across refinements")


def refinement_study(params, seed, ns, cfg, sigma, coupling=KDV_COUPLING, data=None,
                     amplitude=1.0):
    """Both residual norms at ``cfg.t_end`` for each grid size in ``ns``.

    The data come from one master random sequence, so ``u0`` at a smaller
    size is a truncation of ``u0`` at a larger one (checked). ``cfg.dt`` must
    satisfy the CFL bound at the largest size.
    """
    ns = [int(n) for n in ns]
    if sorted(ns) != ns or any(b != 2 * a for a, b in zip(ns[:-1], ns[1:])):
        raise ConfigError("refinement sizes must be ascending and dyadic")
    if data is None:
        u0s = [random_rough_field(n, params, seed, amplitude) for n in ns]
    else:
        u0s = [data(n) for n in ns]
    _check_nested(u0s)
    shifted, unshifted, slopes = [], [], []
    for n, u0 in zip(ns, u0s):
        c = replace(cfg, n=n, sample_stride=cfg.n_steps)
        u = evolve(u0, c).fields[-1]
        t = c.t_end
        unshifted.append(sobolev_norm(u - airy_propagate(u0, t), sigma))
        shifted.append(sobolev_norm(phase_shift(u, u0, t, coupling) - airy_propagate(u0, t), sigma))
        slopes.append(tail_slope(u - r_star(u0, params.s, t, coupling)))
    sh = np.array(shifted)
    un = np.array(unshifted)
    variation = float((sh.max() - sh.min()) / sh.min()) if sh.min() > 0 else math.inf
    growth = (un[1:] / un[:-1]).tolist()
    return {
        "ns": ns, "sigma": float(sigma), "t": float(cfg.t_end), "seed": seed,
        "coupling": float(coupling), "dt": cfg.dt,
        "shifted": shifted, "unshifted": unshifted,
        "shifted_variation": variation, "unshifted_growth": growth,
        "shifted_tail_slopes": slopes,
        "shifted_stable": bool(variation <= 0.2),
        "unshifted_grows": bool(all(g >= 1.5 for g in growth)),
    }


# -- closed-form probes ----------------------------------------------------------

def nonuniform_closed_form(xi, delta, s, t, coupling=DEFAULT_COUPLING):
    """``sqrt(delta^2 + 4 (1-delta) sin^2((c/2) <xi>^{2s} delta (2-delta) t / xi))``."""
    arg = 0.5 * coupling * bracket(xi) ** (2 * s) / xi * delta * (2 - delta) * t
    return math.sqrt(delta ** 2 + 4 * (1 - delta) * math.sin(arg) ** 2)


def nonuniform_demo(xi, delta, s, t_grid, coupling=DEFAULT_COUPLING):
    """Compare ``||R[f](t) - R[g](t)||_{L^2}`` for ``f = e^{i xi x}``, ``g = (1-delta) f``."""
    xi = int(xi)
    if xi == 0:
        raise ConfigError("xi must be nonzero")
    if not 0 < delta < 1:
        raise ConfigError("delta must lie in (0, 1)")
    n = max(abs(xi), 1)
    f = FourierField.from_modes(n, {xi: 1.0}, is_real=False, is_mean_zero=True)
    g = f * (1 - delta)
    rows = []
    for t in t_grid:
        num = sobolev_norm(r_evolve(f, s, t, Scale.V, coupling) - r_evolve(g, s, t, Scale.V, coupling), 0.0)
        ref = nonuniform_closed_form(xi, delta, s, t, coupling)
        rows.append((float(t), num, ref, abs(num - ref)))
    return {"xi": xi, "delta": delta, "s": s, "rows": rows,
            "max_discrepancy": max(r[3] for r in rows)}


def lipschitz_probe(f, g, gamma, t_grid, s=0.0, coupling=DEFAULT_COUPLING):
    """``sup_t ||R[f](t) - R[g](t)||_{H^gamma} / ||f - g||_{H^gamma}``."""
    if f.n != g.n:
        raise PreconditionError("f and g must share N")
    den = sobolev_norm(f - g, gamma)
    nums = [sobolev_norm(r_evolve(f, s, t, Scale.V, coupling) - r_evolve(g, s, t, Scale.V, coupling), gamma)
            for t in t_grid]
    if den == 0:
        return {"identical": True, "max_ratio": None, "max_numerator": max(nums)}
    ratios = [x / den for x in nums]
    return {"identical": False, "max_ratio": max(ratios), "ratios": ratios}


def phase_gain_probe(u0, v, params, t, alpha, coupling=DEFAULT_COUPLING):
    """Both sides of ``||S[v](t) - v||_{H^{alpha+1-2s}} <= 4 |t| ||u0||^2_{H^{-s}} ||v||_{H^alpha}``.

    The constant 4 comes from ``|e^{i theta} - 1| <= |theta|`` and
    ``<xi> / |xi| <= 2``; it covers any ``|coupling| <= 2``.
    """
    s = params.s
    lhs = sobolev_norm(phase_shift(v, u0, t, coupling) - v, alpha + 1 - 2 * s)
    rhs = 4.0 * abs(t) * sobolev_norm(u0, -s) ** 2 * sobolev_norm(v, alpha)
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs)}


# -- operator regularity --------------------------------------------------------------

def unit_rough_f(n, params, seed):
    """``f = <D>^{-s} u0`` for rough ``u0``, scaled by the ``n``-independent
    constant that makes its infinite-``n`` L^2 norm equal to 1 (nested in ``n``)."""
    u0 = random_rough_field(n, params, seed)
    f = apply_multiplier(u0, MultiplierSymbol.bessel(-params.s))
    return f * (1.0 / math.sqrt(rough_norm_bound(params.s, params.eps_tail)))


def operator_regularity(params, seed, ns, sigma=1.0):
    """``||T(f,f)||_{H^sigma}`` and ``||J(f,f,f)||_{H^sigma}`` (full output support) per size."""
    rows = []
    for n in ns:
        f = unit_rough_f(n, params, seed)
        t = t_bilinear(f, f, params.s, "transform", out_n=2 * n)
        j = j_trilinear(f, f, f, params.s, "transform", out_n=3 * n)
        rows.append({"n": n, "f_l2": sobolev_norm(f, 0.0),
                     "T": sobolev_norm(t, sigma), "J": sobolev_norm(j, sigma)})
    out = {"rows": rows}
    for key in ("T", "J"):
        vals = np.array([r[key] for r in rows])
        out[f"{key}_spread"] = float((vals.max() - vals.min()) / vals.min())
    return out


# -- discrete X^{sigma,b} ------------------------------------------------------------

@dataclass(frozen=True)
class XsbConfig:
    """Discrete Bourgain-norm surrogate settings.

    ``window_width`` is the flat fraction of the Tukey window;
    ``window_span`` is its duration (default: the sampled span).
    """

    b: float = 0.5
    window: str = "tukey"
    window_width: float = 0.5
    time_samples: int = 256
    window_span: float | None = None

    def __post_init__(self):
        if self.b < 0:
            raise ConfigError("b must be nonnegative")
        if self.window != "tukey":
            raise ConfigError(f"unknown window {self.window!r}")
        if not 0 <= self.window_width <= 1:
            raise ConfigError("window_width must lie in [0, 1]")
        if self.time_samples < 256:
            raise ConfigError("time_samples must be at least 256")

    def to_dict(self):
        return {"b": self.b, "window": self.window, "window_width": self.window_width,
                "time_samples": self.time_samples, "window_span": self.window_span}


def xsb_norm(traj, cfg, sobolev_sigma=0.0):
    """``(dt/K sum <xi>^{2 sigma} <tau - xi^3>^{2b} |G(tau, xi)|^2)^{1/2}``.

    ``G`` is the discrete Fourier transform in time of the windowed samples
    with the Airy phase removed, so the dual variable is the modulation
    ``tau - xi^3`` directly. With ``b = 0`` this is the windowed
    ``L^2_t H^sigma`` quadrature.
    """
    times = np.asarray(traj.times, dtype=float)
    if times.size < 2:
        raise ConfigError("trajectory needs at least two samples")
    dt = float(times[1] - times[0])
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=0):
        raise PreconditionError("trajectory is not uniformly sampled")
    span = times[-1] - times[0]
    wspan = span if cfg.window_span is None else cfg.window_span
    if wspan > span * (1 + 1e-12):
        raise ConfigError(f"window span {wspan} exceeds sampled span {span}")
    k = int(round(wspan / dt)) + 1
    if k < cfg.time_samples:
        raise ConfigError(f"window covers {k} samples, fewer than {cfg.time_samples}")
    t = times[:k]
    a = traj.coeff_matrix()[:k]
    xi = traj.fields[0].freqs.astype(float)
    g = a * np.exp(-1j * np.outer(t, xi ** 3))
    w = tukey(k, alpha=1.0 - cfg.window_width)
    G = np.fft.fft(w[:, None] * g, axis=0)
    tau = 2 * np.pi * np.fft.fftfreq(k, dt)
    weight = np.outer(bracket(tau) ** (2 * cfg.b), bracket(xi) ** (2 * sobolev_sigma))
    return float(np.sqrt(dt / k * np.sum(weight * np.abs(G) ** 2)))


def windowed_l2(traj, cfg, sobolev_sigma=0.0):
    """Reference quadrature ``(dt sum_k ||w_k u(t_k)||^2_{H^sigma})^{1/2}``."""
    times = np.asarray(traj.times)
    dt = float(times[1] - times[0])
    span = times[-1] - times[0]
    wspan = span if cfg.window_span is None else cfg.window_span
    k = int(round(wspan / dt)) + 1
    w = tukey(k, alpha=1.0 - cfg.window_width)
    tot = sum((w[i] * sobolev_norm(traj.fields[i], sobolev_sigma)) ** 2 for i in range(k))
    return math.sqrt(dt * tot)


def flow_trajectory(f, times, kind="airy", s=0.0, coupling=DEFAULT_COUPLING):
    """Sampled Airy or resonant (``R[f]``) flow on the given uniform times."""
    if kind == "airy":
        fields = tuple(airy_propagate(f, float(t)) for t in times)
    elif kind == "resonant":
        fields = tuple(r_evolve(f, s, float(t), Scale.V, coupling) for t in times)
    else:
        raise ValueError(kind)
    return Trajectory(np.asarray(times, dtype=float), fields, None)
