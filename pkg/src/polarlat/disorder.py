"""Site-to-site disorder: sampling, exact few-excitation energies,
fluctuation statistics, lobe survival and the insulator-accessibility scan.

Disorder model
--------------
Per site, three independent imperfections are drawn:

* cavity frequency: normal, mean ``params.omega_ph``, std ``sigma_omega``;
* couplings: each impurity gets g_k uniform on [g(1 - delta_g), g]
  (``delta_g`` is the dip width in units of g);
* impurity count: Poisson, or a sub-Poisson binomial matched to a target
  standard deviation ``n_sigma`` (see :func:`resolve_count_distribution`;
  integer binomial trials make the achievable std values discrete).

Each sample draws from its own counter-based stream keyed by
(seed, sample index), so single-sample results are reproducible under any
scheduling or parallel layout.  Draw order within a sample: one normal for
the cavity shift, one count draw (skipped when the count is deterministic),
then the coupling uniforms.

Fluctuation widths ``delta_e``/``delta_u`` are central-quantile half-widths
(default q = 0.005, i.e. half the 0.5%..99.5% span), chosen because the
lobe-destruction inequality concerns near-extremal site-to-site spreads;
standard deviations are reported alongside.

The grid scan :func:`iso_surface` reuses one pool of base draws across all
grid points (common random numbers), transformed per point; this keeps the
10^4-samples-per-point scans tractable and makes the surface smooth in the
disorder widths.  It is bit-reproducible for a fixed (seed, axes,
sample_count) but its per-sample values differ from the per-index streams
of :func:`sample_site`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import meanfield, observables
from .errors import DisorderError

#: Cap on the two-excitation subspace dimension 1 + N + N(N-1)/2.
SUBSPACE_BUDGET = 5500


@dataclass(frozen=True)
class DisorderSpec:
    """Widths and sampling controls of the site-disorder model.

    sigma_omega shares units with the parameter set it is applied to;
    delta_g is in units of g (so it must lie in [0, 1]); n_sigma is a
    target standard deviation in counts.
    """

    sigma_omega: float = 0.0
    delta_g: float = 0.0
    n_mean: float = 3.0
    n_sigma: float = 0.0
    n_dist: str = "auto"  # "auto" | "poisson" | "binomial"
    sample_count: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.sigma_omega < 0:
            raise DisorderError(f"sigma_omega must be >= 0, got {self.sigma_omega}")
        if not 0.0 <= self.delta_g <= 1.0:
            raise DisorderError(
                f"delta_g is in units of g and must lie in [0, 1], got {self.delta_g}")
        if not self.n_mean > 0:
            raise DisorderError(f"n_mean must be positive, got {self.n_mean}")
        if self.n_sigma < 0:
            raise DisorderError(f"n_sigma must be >= 0, got {self.n_sigma}")
        if self.n_dist not in ("auto", "poisson", "binomial"):
            raise DisorderError(f"unknown n_dist {self.n_dist!r}")
        if (self.n_dist == "binomial" and self.n_sigma > 0
                and self.n_sigma ** 2 > self.n_mean):
            raise DisorderError(
                "binomial counts are sub-Poisson: need n_sigma^2 <= n_mean")
        if self.sample_count < 1:
            raise DisorderError(f"sample_count must be >= 1, got {self.sample_count}")


@dataclass(frozen=True)
class SiteSample:
    """One disorder realization of a single cavity."""

    omega_ph_site: float
    g_list: np.ndarray = field(repr=False)
    n_site: int


@dataclass(frozen=True)
class DisorderStats:
    """Aggregated site fluctuations; energies in the parameter set's units."""

    delta_e: float
    delta_u: float
    u_mean: float
    sample_count: int
    quantile_q: float
    e_std: float
    u_std: float
    empty_fraction: float  # share of samples with no impurity


def resolve_count_distribution(spec):
    """Resolve the impurity-count law to ("constant", n0), ("poisson", lam)
    or ("binomial", (m, p)).

    The binomial uses m*p = n_mean with p = 1 - n_sigma^2 / n_mean before
    rounding m to an integer; the realized standard deviation is therefore
    the closest achievable value, not n_sigma itself, and degenerates to a
    constant when m rounds to n_mean.  Poisson is used when
    n_sigma^2 >= n_mean (unless forced).
    """
    if spec.n_sigma == 0 and spec.n_dist != "poisson":
        return ("constant", int(round(spec.n_mean)))
    if spec.n_dist == "poisson" or (
            spec.n_dist == "auto" and spec.n_sigma ** 2 >= spec.n_mean):
        return ("poisson", float(spec.n_mean))
    p = 1.0 - spec.n_sigma ** 2 / spec.n_mean
    m = max(1, int(round(spec.n_mean / p)))
    p = min(1.0, spec.n_mean / m)
    if p == 1.0:
        return ("constant", m)
    return ("binomial", (m, p))


def _stream(seed, stream_index):
    # Philox is counter based; offsetting the 256-bit counter by
    # stream_index * 2^128 gives non-overlapping, scheduling-independent
    # substreams
    return np.random.Generator(np.random.Philox(key=seed,
                                                counter=stream_index << 128))


def sample_site(spec, params, stream_index):
    """Draw one site realization from substream (spec.seed, stream_index)."""
    rng = _stream(spec.seed, stream_index)
    omega = params.omega_ph + spec.sigma_omega * rng.standard_normal()
    kind, arg = resolve_count_distribution(spec)
    if kind == "constant":
        n = arg
    elif kind == "poisson":
        n = int(rng.poisson(arg))
    else:
        n = int(rng.binomial(*arg))
    g_list = params.g * (1.0 - spec.delta_g * rng.random(n))
    return SiteSample(omega_ph_site=float(omega), g_list=g_list, n_site=n)


def site_energies_exact(sample, omega_ex, max_dim=SUBSPACE_BUDGET):
    """Exact lowest energies of the one- and two-excitation subspaces.

    Energies are relative to (number of excitations) * omega_ex, i.e. they
    depend only on the site detuning; U_site = E2 - 2 E1 (nan for an empty
    site).  Subspace dimensions are 1 + N and 1 + N + N(N-1)/2.
    """
    n = sample.n_site
    ds = sample.omega_ph_site - omega_ex
    if n == 0:
        return ds, 2.0 * ds, math.nan
    g = np.asarray(sample.g_list, dtype=float)

    h1 = np.zeros((1 + n, 1 + n))
    h1[0, 0] = ds
    h1[0, 1:] = g
    h1[1:, 0] = g
    e1 = float(np.linalg.eigvalsh(h1)[0])

    dim = 1 + n + n * (n - 1) // 2
    if dim > max_dim:
        raise DisorderError(
            f"two-excitation subspace dimension {dim} exceeds budget {max_dim} "
            f"(site has {n} impurities)")
    h2 = np.zeros((dim, dim))
    h2[0, 0] = 2.0 * ds
    root2 = math.sqrt(2.0)
    for k in range(n):
        h2[1 + k, 1 + k] = ds
        h2[0, 1 + k] = root2 * g[k]
        h2[1 + k, 0] = root2 * g[k]
    p = 0
    for k in range(n):
        for l in range(k + 1, n):
            col = 1 + n + p
            h2[1 + k, col] = g[l]
            h2[col, 1 + k] = g[l]
            h2[1 + l, col] = g[k]
            h2[col, 1 + l] = g[k]
            p += 1
    e2 = float(np.linalg.eigvalsh(h2)[0])
    return e1, e2, e2 - 2.0 * e1


def site_energies_collective(sample, omega_ex):
    """Fast route: map the site onto a uniform-coupling model.

    Uses g_eff = sqrt(sum g_k^2 / N).  The one-excitation energy is then
    exact for arbitrary couplings (only the bright combination couples);
    the two-excitation energy is approximate unless the couplings are
    uniform.
    """
    n = sample.n_site
    ds = sample.omega_ph_site - omega_ex
    if n == 0:
        return ds, 2.0 * ds, math.nan
    g2_total = float(np.sum(np.square(sample.g_list)))
    e1 = 0.5 * ds - math.sqrt(0.25 * ds * ds + g2_total)
    if n == 1:
        e2 = 1.5 * ds - math.sqrt(0.25 * ds * ds + 2.0 * g2_total)
    else:
        g_eff = math.sqrt(g2_total / n)
        block = np.array([
            [2.0 * ds, math.sqrt(2.0 * n) * g_eff, 0.0],
            [math.sqrt(2.0 * n) * g_eff, ds, math.sqrt(2.0 * n - 2.0) * g_eff],
            [0.0, math.sqrt(2.0 * n - 2.0) * g_eff, 0.0]])
        e2 = float(np.linalg.eigvalsh(block)[0])
    return e1, e2, e2 - 2.0 * e1


def _quantile_halfwidth(values, q):
    lo, hi = np.quantile(values, [q, 1.0 - q])
    return 0.5 * float(hi - lo)


def disorder_stats(spec, params, method="exact", quantile=0.005):
    """Monte-Carlo fluctuation widths of the injection and interaction energy.

    Per sample, E_site is the exact one-excitation ground energy of the
    site (site frequency shift included) and U_site the two-excitation
    interaction energy; empty sites contribute the bare photon energy to
    E_site and are excluded from the U statistics.  Deterministic given
    spec.seed.
    """
    if method not in ("exact", "collective"):
        raise ValueError(f"unknown site-energy method {method!r}")
    energies = site_energies_exact if method == "exact" else site_energies_collective
    e_vals = np.empty(spec.sample_count)
    u_vals = []
    empty = 0
    for i in range(spec.sample_count):
        sample = sample_site(spec, params, i)
        e1, _, u = energies(sample, params.omega_ex)
        e_vals[i] = e1
        if sample.n_site == 0:
            empty += 1
        else:
            u_vals.append(u)
    if not u_vals:
        raise DisorderError(
            f"all {spec.sample_count} samples have zero impurities; "
            "no interaction statistics available")
    u_vals = np.array(u_vals)
    return DisorderStats(
        delta_e=_quantile_halfwidth(e_vals, quantile),
        delta_u=_quantile_halfwidth(u_vals, quantile),
        u_mean=float(np.mean(u_vals)),
        sample_count=spec.sample_count,
        quantile_q=quantile,
        e_std=float(np.std(e_vals)),
        u_std=float(np.std(u_vals)),
        empty_fraction=empty / spec.sample_count)


def lobe_survival(u, delta_e, delta_u, n):
    """Does Mott lobe n survive the fluctuations?

    The lobe is destroyed once 2*delta_e + (2n - 1)*delta_u >= u (the
    inequality is non-strict: the boundary case does not survive).
    Returns (survives, effective_width) with the width clipped at zero.
    """
    if not u > 0:
        raise ValueError(f"u must be positive, got {u}")
    if n < 1:
        raise ValueError(f"lobe index must be >= 1, got {n}")
    width = u - 2.0 * delta_e - (2.0 * n - 1.0) * delta_u
    return width > 0.0, max(0.0, width)


def clean_lobe_width(params, n):
    """Width of Mott lobe n at t = 0, in the parameter set's units."""
    lo, hi = meanfield.mott_lobe_mu_range(params, n)
    return (hi - lo) * params.g


def bg_mi_tunneling(params, stats, n, settings=meanfield.DEFAULT_SETTINGS):
    """Critical tunneling of the disorder-shrunken lobe, units of g.

    Linear shrinkage model: the clean t_c is scaled by the surviving lobe
    width (from the disorder-mean interaction energy minus the fluctuation
    penalty) over the clean width; zero when the lobe does not survive.
    The mapping from the survival inequality to a tunneling scale is a
    modeling choice; the raw (delta_e, delta_u, u_mean) triple in ``stats``
    lets alternative mappings be applied downstream.
    """
    t_c, _ = meanfield.critical_tunneling(params, n, settings)
    _, width = lobe_survival(stats.u_mean, stats.delta_e, stats.delta_u, n)
    return t_c * width / clean_lobe_width(params, n)


# ---------------------------------------------------------------------------
# vectorized common-random-numbers engine for grid scans


def _counts_from_uniform(v, kind, arg):
    from scipy import stats as sstats

    if kind == "constant":
        return np.full(v.shape, arg, dtype=np.int64)
    if kind == "poisson":
        raw = sstats.poisson.ppf(v, arg)
    else:
        raw = sstats.binom.ppf(v, *arg)
    # discrete ppf maps u = 0 to -1 (empty lower tail); clamp to a count
    return np.maximum(raw, 0.0).astype(np.int64)


def _collective_u_batch(ds, g2, counts):
    """Vectorized collective-model U for one grid point (nan where empty)."""
    u = np.full(ds.shape, np.nan)
    e1 = 0.5 * ds - np.sqrt(0.25 * ds * ds + g2)
    one = counts == 1
    if one.any():
        e2 = 1.5 * ds[one] - np.sqrt(0.25 * ds[one] ** 2 + 2.0 * g2[one])
        u[one] = e2 - 2.0 * e1[one]
    many = counts >= 2
    if many.any():
        dsm = ds[many]
        ge2 = g2[many] / counts[many]
        a = np.sqrt(2.0 * counts[many] * ge2)
        b = np.sqrt((2.0 * counts[many] - 2.0) * ge2)
        blocks = np.zeros((dsm.size, 3, 3))
        blocks[:, 0, 0] = 2.0 * dsm
        blocks[:, 1, 1] = dsm
        blocks[:, 0, 1] = blocks[:, 1, 0] = a
        blocks[:, 1, 2] = blocks[:, 2, 1] = b
        e2 = np.linalg.eigvalsh(blocks)[:, 0]
        u[many] = e2 - 2.0 * e1[many]
    return e1, u


def _exact_u_batch(ds, gk, counts):
    """Vectorized inhomogeneous U for one grid point, grouped by count."""
    u = np.full(ds.shape, np.nan)
    e1 = np.empty_like(ds)
    g2 = np.zeros_like(ds)
    for nv in np.unique(counts):
        rows = np.nonzero(counts == nv)[0]
        if nv == 0:
            e1[rows] = ds[rows]
            continue
        g = gk[rows][:, :nv]
        g2[rows] = np.sum(g * g, axis=1)
        e1[rows] = 0.5 * ds[rows] - np.sqrt(0.25 * ds[rows] ** 2 + g2[rows])
        if nv == 1:
            e2 = 1.5 * ds[rows] - np.sqrt(0.25 * ds[rows] ** 2 + 2.0 * g2[rows])
            u[rows] = e2 - 2.0 * e1[rows]
            continue
        dim = 1 + nv + nv * (nv - 1) // 2
        if dim > SUBSPACE_BUDGET:
            raise DisorderError(
                f"two-excitation subspace dimension {dim} exceeds budget")
        h = np.zeros((rows.size, dim, dim))
        h[:, 0, 0] = 2.0 * ds[rows]
        idx = np.arange(1, 1 + nv)
        h[:, idx, idx] = ds[rows][:, None]
        h[:, 0, 1:1 + nv] = h[:, 1:1 + nv, 0] = math.sqrt(2.0) * g
        p = 0
        for k in range(nv):
            for l in range(k + 1, nv):
                col = 1 + nv + p
                h[:, 1 + k, col] = h[:, col, 1 + k] = g[:, l]
                h[:, 1 + l, col] = h[:, col, 1 + l] = g[:, k]
                p += 1
        e2 = np.linalg.eigvalsh(h)[:, 0]
        u[rows] = e2 - 2.0 * e1[rows]
    return e1, u


@dataclass(frozen=True)
class IsoSurfaceScan:
    """Observability marker f over a 3-D grid of disorder widths.

    f = |c_ph|^2 * t_c_disordered - safety_factor * polariton_loss_rate;
    f >= 0 means the insulator transition remains reachable.  Intercepts
    are the largest single-axis widths (other widths at their grid minima)
    with f >= 0, linearly interpolated between grid nodes; they equal the
    axis end when f never turns negative there (censored).
    """

    sigma_omega_axis: np.ndarray
    delta_g_axis: np.ndarray
    n_sigma_axis: np.ndarray
    f: np.ndarray
    delta_e: np.ndarray
    delta_u: np.ndarray
    u_mean: np.ndarray
    t_c_disordered: np.ndarray  # units of g
    boundary_points: np.ndarray
    intercepts: dict
    t_c_clean: float  # units of g
    u_clean: float
    loss_rate: float
    safety_factor: float
    uniform_sign: bool


def _axis_intercept(axis, f_line):
    if f_line[0] < 0:
        return 0.0, False
    below = np.nonzero(f_line < 0)[0]
    if below.size == 0:
        return float(axis[-1]), True
    j = int(below[0])
    x0, x1 = axis[j - 1], axis[j]
    f0, f1 = f_line[j - 1], f_line[j]
    return float(x0 + (x1 - x0) * f0 / (f0 - f1)), False


def iso_surface(params, loss, sigma_omega_axis, delta_g_axis, n_sigma_axis,
                n_mean=None, sample_count=10_000, seed=0, n_dist="auto",
                method="collective", quantile=0.005, safety_factor=1.0,
                settings=meanfield.DEFAULT_SETTINGS):
    """Scan the disorder-width grid for the insulator-accessibility surface.

    ``params`` is the clean reference system (its big_n should match
    round(n_mean)); ``loss`` supplies the cavity Q and impurity decay.  The
    marker f compares the polariton tunneling rate of the shrunken lobe
    against safety_factor times the loss rate.  Deterministic for fixed
    (seed, axes, sample_count).
    """
    axes = []
    for name, ax in (("sigma_omega_axis", sigma_omega_axis),
                     ("delta_g_axis", delta_g_axis),
                     ("n_sigma_axis", n_sigma_axis)):
        ax = np.asarray(ax, dtype=float)
        if ax.size < 1:
            raise ValueError(f"{name} must be non-empty")
        if ax.size > 1 and not np.all(np.diff(ax) > 0):
            raise ValueError(f"{name} must be strictly ascending")
        axes.append(ax)
    sig_ax, dg_ax, ns_ax = axes
    if np.any(dg_ax < 0) or np.any(dg_ax > 1):
        raise DisorderError("delta_g axis must lie within [0, 1] (units of g)")
    if n_mean is None:
        n_mean = float(params.big_n)
    if int(round(n_mean)) != params.big_n:
        raise DisorderError(
            f"clean reference has big_n={params.big_n} but the count law is "
            f"centred on n_mean={n_mean}; the marker would mix inconsistent "
            "systems")

    t_c_clean, _ = meanfield.critical_tunneling(params, 1, settings)
    u_clean = clean_lobe_width(params, 1)
    comp = observables.polariton_fractions(params)
    gamma = observables.polariton_loss_rate(params, loss)
    t_c_phys = t_c_clean * params.g

    count = int(sample_count)
    rng = np.random.Generator(np.random.Philox(key=seed))
    z = rng.standard_normal(count)
    v = rng.random(count)
    count_laws = [resolve_count_distribution(
        DisorderSpec(n_mean=n_mean, n_sigma=float(ns), n_dist=n_dist,
                     sample_count=count, seed=seed)) for ns in ns_ax]
    n_mats = [_counts_from_uniform(v, kind, arg) for kind, arg in count_laws]
    k_pool = max(1, max(int(n.max()) for n in n_mats))
    w = rng.random((count, k_pool))

    shape = (sig_ax.size, dg_ax.size, ns_ax.size)
    delta_e = np.empty(shape)
    delta_u = np.empty(shape)
    u_mean = np.empty(shape)
    base_detuning = params.detuning
    rows = np.arange(count)
    for c, counts in enumerate(n_mats):
        has = counts > 0
        if not has.any():
            raise DisorderError("impurity-count law produced only empty sites")
        last = np.maximum(counts - 1, 0)
        for b, dg in enumerate(dg_ax):
            fac = 1.0 - dg * w
            if method == "exact":
                gk = params.g * fac
            cumsq = np.cumsum(fac * fac, axis=1)
            g2 = np.where(has, params.g ** 2 * cumsq[rows, last], 0.0)
            for a, sig in enumerate(sig_ax):
                ds = base_detuning + sig * z
                if method == "exact":
                    e1, u = _exact_u_batch(ds, gk, counts)
                else:
                    e1, u = _collective_u_batch(ds, g2, counts)
                    e1 = np.where(has, e1, ds)
                u_ok = u[has]
                delta_e[a, b, c] = _quantile_halfwidth(e1, quantile)
                delta_u[a, b, c] = _quantile_halfwidth(u_ok, quantile)
                u_mean[a, b, c] = float(np.mean(u_ok))

    width = np.maximum(0.0, u_mean - 2.0 * delta_e - delta_u)
    t_dis = t_c_clean * width / u_clean
    f = comp.c_ph_sq * t_dis * params.g - safety_factor * gamma

    boundary = []
    for axis_dim in range(3):
        fm = np.moveaxis(f, axis_dim, 0)
        ax = axes[axis_dim]
        for i in range(ax.size - 1):
            sign_change = (fm[i] >= 0) != (fm[i + 1] >= 0)
            for j, k in zip(*np.nonzero(sign_change)):
                f0, f1 = fm[i, j, k], fm[i + 1, j, k]
                frac = f0 / (f0 - f1)
                coords = [None, None, None]
                other = [d for d in range(3) if d != axis_dim]
                coords[axis_dim] = ax[i] + frac * (ax[i + 1] - ax[i])
                coords[other[0]] = axes[other[0]][j]
                coords[other[1]] = axes[other[1]][k]
                boundary.append(coords)
    boundary = (np.array(boundary) if boundary
                else np.empty((0, 3)))

    intercepts = {}
    for name, axis_dim in (("sigma_omega", 0), ("delta_g", 1), ("n_sigma", 2)):
        sel = tuple(slice(None) if d == axis_dim else 0 for d in range(3))
        value, censored = _axis_intercept(axes[axis_dim], f[sel])
        intercepts[name] = {"value": value, "censored": censored}

    return IsoSurfaceScan(
        sigma_omega_axis=sig_ax, delta_g_axis=dg_ax, n_sigma_axis=ns_ax,
        f=f, delta_e=delta_e, delta_u=delta_u, u_mean=u_mean,
        t_c_disordered=t_dis, boundary_points=boundary, intercepts=intercepts,
        t_c_clean=t_c_clean, u_clean=u_clean, loss_rate=gamma,
        safety_factor=safety_factor,
        uniform_sign=bool((f >= 0).all() or (f < 0).all()))
