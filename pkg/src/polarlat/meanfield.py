"""Mean-field phase analysis: order-parameter minimization, Mott lobes,
phase boundaries and the critical tunneling energy.

Unit convention for this module: tunneling energies ``t`` and chemical
potentials ``mu`` are dimensionless, in units of ``params.g``, and ``mu`` is
measured relative to ``omega_ex``.  Internally everything is scaled to
g = 1, which keeps the eigenproblems well conditioned for any physical
parameter set and makes results reusable across impurity numbers.

The ground-state energy at fixed order parameter is computed in a truncated
basis with a photon cutoff ``n_max`` and an excited-impurity cutoff
``e_max`` (the latter only bites when big_n is large).  Both cutoffs are
raised by 2 until the energy of the reported result moves by less than
``cutoff_rel_tol``; every public result has passed that check.

Two independent routes to the phase boundary are provided:

* ``boundary_tunneling`` bisects on the onset of a nonzero minimizing
  order parameter (the variational route);
* ``landau_boundary_tunneling`` finds where the quadratic coefficient of
  the energy in psi changes sign, from second-order perturbation theory in
  the drive (the perturbative route).

They agree for a second-order transition and are cross-checked in the test
suite; neither calls the other.
"""

from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .errors import (BracketingError, DimensionBudgetError, EigensolverError,
                     GridError, LobeError, MinimizationError, NumericalError)
from .model import DIMENSION_BUDGET, SystemParams, manifold_block, manifold_energy

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0

#: Hard cap on the manifold index scanned when locating the filling.
_MAX_FILLING_SCAN = 512


@dataclass(frozen=True)
class ScanSettings:
    """Numerical knobs of the mean-field scan, with spec-level defaults."""

    psi_zero_tol: float = 1e-4        # order parameter below this is "zero" (MI)
    coarse_points: int = 64           # coarse psi-grid size before refinement
    psi_tol: float = 1e-6             # golden-section bracket width on psi
    psi_max_init: float | None = None  # None: sqrt(n_max)/2
    max_psi_expansions: int = 8       # doublings of psi_max before "runaway"
    cutoff_margin: int = 6            # initial cutoffs = filling + margin
    cutoff_rel_tol: float = 1e-8      # ground-energy stability under cutoff + 2
    max_dim: int = DIMENSION_BUDGET
    boundary_rel_tol: float = 1e-4    # relative bisection tolerance on t
    mu_tol: float = 1e-4              # absolute golden-section tolerance on mu


DEFAULT_SETTINGS = ScanSettings()


class Phase(str, Enum):
    MI = "MI"
    SF = "SF"


@dataclass(frozen=True)
class ScanPoint:
    """Result of one (t, mu) cell: minimizing order parameter and phase."""

    t: float
    mu: float
    psi_star: float
    e_star: float
    phase: Phase
    filling: int
    n_max: int
    e_max: int
    runaway: bool = False


@dataclass(frozen=True)
class MinimizeResult:
    psi_star: float
    e_star: float
    n_max: int
    e_max: int
    expansions: int


@dataclass(frozen=True)
class PhaseGrid:
    """Dense (t, mu) scan with per-cell convergence metadata."""

    t_axis: np.ndarray
    mu_axis: np.ndarray
    points: tuple  # tuple of tuples of ScanPoint, indexed [i_t][i_mu]
    params: SystemParams

    def _matrix(self, attr, dtype=float):
        return np.array([[getattr(p, attr) for p in row] for row in self.points],
                        dtype=dtype)

    @property
    def psi(self):
        return self._matrix("psi_star")

    @property
    def energy(self):
        return self._matrix("e_star")

    @property
    def filling(self):
        return self._matrix("filling", dtype=int)

    @property
    def is_mott(self):
        return np.array([[p.phase is Phase.MI for p in row] for row in self.points])

    @property
    def n_max_final(self):
        return self._matrix("n_max", dtype=int)


def _golden_min(f, a, b, tol):
    """Golden-section search for the minimum of f on [a, b].

    Returns the best evaluated interior point and its value once the
    bracket is narrower than tol.
    """
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    n = int(math.ceil(math.log(tol / h) / math.log(_INV_PHI)))
    c = a + _INV_PHI2 * h
    d = a + _INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(n - 1):
        if yc < yd:
            b, d, yd = d, c, yc
            h *= _INV_PHI
            c = a + _INV_PHI2 * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h *= _INV_PHI
            d = a + _INV_PHI * h
            yd = f(d)
    return (c, yc) if yc < yd else (d, yd)


def _eps(params, n):
    """Manifold ground energy in units of g."""
    return manifold_energy(params, n) / params.g


class _BandedSite:
    """Lowest-eigenvalue engine for the driven site at fixed cutoffs.

    States are ordered excitation-major, index = e*(n_max+1) + n_ph, which
    makes the matrix banded with bandwidth n_max: the photon drive sits on
    the first superdiagonal and the impurity-photon exchange on the
    (n_max)-th.  All energies in units of g.
    """

    def __init__(self, big_n, n_max, e_top, delta, mu, zt):
        m = n_max + 1
        rows = e_top + 1
        dim = m * rows
        n_ph = np.tile(np.arange(m), rows)
        e = np.repeat(np.arange(rows), m)
        u = m - 1 if m > 1 else 0
        base = np.zeros((u + 1, dim))
        base[u] = n_ph * delta - mu * (n_ph + e)
        if m > 1:
            # exchange element between (n_ph + 1, e - 1) and (n_ph, e),
            # stored at the column of the larger index
            cols = e * m + n_ph
            mask = (e >= 1) & (n_ph <= m - 2)
            base[0, cols[mask]] = np.sqrt(
                (n_ph[mask] + 1.0) * (big_n - e[mask] + 1.0) * e[mask])
            # unit-psi drive amplitude at column j is sqrt(j mod m); zero at
            # block boundaries where j mod m == 0
            self._drive = np.sqrt((np.arange(dim) % m).astype(float))
        self._base = base
        self._u = u
        self._m = m
        self.zt = zt
        self.n_max = n_max
        self.e_top = e_top
        self.dim = dim

    def energy(self, psi):
        if self._m == 1 or psi == 0.0 or self.zt == 0.0:
            band = self._base
        else:
            band = self._base.copy()
            band[self._u - 1] += (-self.zt * psi) * self._drive
        try:
            w = sla.eigvals_banded(band, select="i", select_range=(0, 0))
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise EigensolverError(
                f"banded eigensolver failed at dim={self.dim}: {exc}") from exc
        return float(w[0]) + self.zt * psi * psi


def filling_at_zero_psi(params, mu):
    """Manifold index minimizing eps(n) - n*mu (ties resolved downward).

    This equals the expected total excitation number of the undriven ground
    state, which is sharp because excitation number is conserved at psi = 0.
    """
    best_n = 0
    best = 0.0  # eps(0) = 0
    rising = 0
    for n in range(1, _MAX_FILLING_SCAN + 1):
        val = _eps(params, n) - n * mu
        if val < best:
            best, best_n = val, n
            rising = 0
        else:
            rising += 1
            if rising >= 4:
                return best_n
    raise NumericalError(
        f"no finite filling found for mu={mu}: the grand energy keeps "
        f"decreasing up to manifold {_MAX_FILLING_SCAN} (mu above the lobe "
        "accumulation point)")


def zero_psi_energy(params, mu):
    """Ground energy at psi = 0 in units of g: min_n [eps(n) - n*mu]."""
    n = filling_at_zero_psi(params, mu)
    return _eps(params, n) - n * mu


def _initial_cutoffs(params, mu, settings):
    fill = filling_at_zero_psi(params, mu)
    n0 = fill + settings.cutoff_margin
    e0 = min(params.big_n, fill + settings.cutoff_margin)
    return n0, e0


def _check_dim(n_max, e_top, settings):
    dim = (n_max + 1) * (e_top + 1)
    if dim > settings.max_dim:
        raise DimensionBudgetError(
            f"cutoffs n_max={n_max}, e_max={e_top} need dimension {dim} "
            f"> budget {settings.max_dim}")


def _grow(params, n_max, e_top):
    return n_max + 2, min(params.big_n, e_top + 2)


def ground_energy_at_psi(params, t, mu, psi, settings=DEFAULT_SETTINGS):
    """Lowest site eigenvalue at fixed order parameter, converged in cutoffs.

    t, mu and the result are in units of g; mu is relative to omega_ex.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if not math.isfinite(psi):
        raise ValueError(f"psi must be finite, got {psi}")
    if t == 0.0 or psi == 0.0:
        # no drive and no penalty: exact manifold decomposition applies
        return zero_psi_energy(params, mu)
    delta = params.detuning / params.g
    zt = params.z * t
    n_max, e_top = _initial_cutoffs(params, mu, settings)
    prev = None
    while True:
        _check_dim(n_max, e_top, settings)
        val = _BandedSite(params.big_n, n_max, e_top, delta, mu, zt).energy(psi)
        if prev is not None and abs(val - prev) <= settings.cutoff_rel_tol * max(
                1.0, abs(val)):
            return val
        prev = val
        n_max, e_top = _grow(params, n_max, e_top)


def _psi_grid(psi_max, coarse_points):
    # geometric spacing resolves the shallow minima just above the phase
    # boundary without wasting points deep in the superfluid region
    return np.concatenate(
        [[0.0], np.geomspace(1e-5 * psi_max, psi_max, coarse_points - 1)])


def _minimize_fixed(solver, settings):
    """Coarse-grid scan plus golden-section refinement at fixed cutoffs.

    Returns (psi_star, e_star, expansions); raises MinimizationError when
    the minimum keeps sitting on the expanding upper bracket edge.
    """
    psi_max = settings.psi_max_init or math.sqrt(solver.n_max) / 2.0
    for expansion in range(settings.max_psi_expansions + 1):
        grid = _psi_grid(psi_max, settings.coarse_points)
        vals = np.array([solver.energy(p) for p in grid])
        i = int(np.argmin(vals))
        if i == len(grid) - 1:
            psi_max *= 2.0
            continue
        a = grid[i - 1] if i > 0 else 0.0
        b = grid[i + 1]
        psi, e = _golden_min(solver.energy, a, b, settings.psi_tol)
        if vals[i] < e:
            psi, e = float(grid[i]), float(vals[i])
        return float(psi), float(e), expansion
    raise MinimizationError(
        f"order-parameter minimum still on the bracket edge after "
        f"{settings.max_psi_expansions} expansions (psi_max={psi_max:g}); "
        "the mean-field energy is unbounded in this regime",
        psi_max=psi_max, expansions=settings.max_psi_expansions)


def minimize_order_parameter(params, t, mu, settings=DEFAULT_SETTINGS):
    """Minimize the ground energy over psi >= 0 at fixed (t, mu).

    The psi search runs at fixed cutoffs and is repeated with both cutoffs
    raised by 2 until the minimal energy is stable; the returned result
    carries the final cutoffs.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    n_max, e_top = _initial_cutoffs(params, mu, settings)
    if t == 0.0:
        return MinimizeResult(psi_star=0.0, e_star=zero_psi_energy(params, mu),
                              n_max=n_max, e_max=e_top, expansions=0)
    delta = params.detuning / params.g
    zt = params.z * t
    prev = None
    expansions = 0
    rounds = 0
    while True:
        _check_dim(n_max, e_top, settings)
        solver = _BandedSite(params.big_n, n_max, e_top, delta, mu, zt)
        psi, e_star, exp = _minimize_fixed(solver, settings)
        expansions = max(expansions, exp)
        if prev is not None and abs(e_star - prev) <= settings.cutoff_rel_tol * max(
                1.0, abs(e_star)):
            return MinimizeResult(psi_star=psi, e_star=e_star, n_max=n_max,
                                  e_max=e_top, expansions=expansions)
        # unbounded regime: the minimizing displacement keeps consuming the
        # photon cutoff as the basis grows; a bounded superfluid point pins
        # psi* and converges once n_max clears psi*^2
        if rounds >= 6 and psi * psi > 0.5 * n_max:
            raise MinimizationError(
                f"ground energy decreases without bound: psi*={psi:.3g} tracks "
                f"the photon cutoff n_max={n_max} (zt={zt:g}, mu={mu:g})",
                psi_max=psi, expansions=expansions)
        if rounds >= 40:
            raise NumericalError(
                f"ground energy not converged after {rounds} cutoff increases "
                f"at (t={t:g}, mu={mu:g})")
        prev = e_star
        rounds += 1
        n_max, e_top = _grow(params, n_max, e_top)


def classify_phase(params, t, mu, settings=DEFAULT_SETTINGS):
    """Label one (t, mu) point as Mott insulator (with its filling) or SF.

    A runaway order-parameter search (energy unbounded within the psi
    bracket) is classified as superfluid with psi_star = inf: the order
    parameter is certainly nonzero there.
    """
    filling = filling_at_zero_psi(params, mu)
    try:
        res = minimize_order_parameter(params, t, mu, settings)
    except MinimizationError:
        return ScanPoint(t=t, mu=mu, psi_star=math.inf, e_star=math.nan,
                         phase=Phase.SF, filling=filling, n_max=-1, e_max=-1,
                         runaway=True)
    mi = res.psi_star < settings.psi_zero_tol
    return ScanPoint(t=t, mu=mu, psi_star=(0.0 if mi else res.psi_star),
                     e_star=res.e_star, phase=Phase.MI if mi else Phase.SF,
                     filling=filling, n_max=res.n_max, e_max=res.e_max)


def _classify_cell(args):
    params, t, mu, settings = args
    return classify_phase(params, t, mu, settings)


def phase_diagram(params, t_axis, mu_axis, workers=1, settings=DEFAULT_SETTINGS):
    """Scan a dense (t, mu) grid; cells are independent and deterministic.

    Results do not depend on ``workers``; failures are aggregated into one
    GridError carrying the failing cell coordinates.
    """
    t_axis = np.asarray(t_axis, dtype=float)
    mu_axis = np.asarray(mu_axis, dtype=float)
    for name, ax in (("t_axis", t_axis), ("mu_axis", mu_axis)):
        if ax.size == 0:
            raise ValueError(f"{name} must be non-empty")
        if ax.size > 1 and not np.all(np.diff(ax) > 0):
            raise ValueError(f"{name} must be strictly ascending")
    tasks = [(params, float(t), float(mu), settings)
             for t in t_axis for mu in mu_axis]
    failures = []
    results = [None] * len(tasks)
    if workers > 1:
        # spawned workers avoid the fork-after-BLAS-init deadlock; results
        # are collected in task order, so the cell layout is worker-count
        # independent
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            chunk = max(1, len(tasks) // (workers * 8))
            for k, point in enumerate(pool.map(_classify_cell, tasks,
                                               chunksize=chunk)):
                results[k] = point
    else:
        for k, task in enumerate(tasks):
            try:
                results[k] = _classify_cell(task)
            except (NumericalError, DimensionBudgetError) as exc:
                i, j = divmod(k, mu_axis.size)
                failures.append((float(t_axis[i]), float(mu_axis[j]), str(exc)))
    if failures:
        raise GridError(
            f"{len(failures)} grid cell(s) failed, first at "
            f"(t={failures[0][0]:g}, mu={failures[0][1]:g}): {failures[0][2]}",
            failures=failures)
    nmu = mu_axis.size
    points = tuple(tuple(results[i * nmu:(i + 1) * nmu]) for i in range(t_axis.size))
    return PhaseGrid(t_axis=t_axis, mu_axis=mu_axis, points=points, params=params)


def mott_lobe_mu_range(params, n):
    """(mu_lower, mu_upper) of Mott lobe n at t = 0, relative to omega_ex.

    mu_lower is the cost of injecting the n-th excitation, mu_upper that of
    the (n+1)-th; an empty range (lower >= upper) means the lobe does not
    exist.  Units of g.
    """
    if n < 1:
        raise ValueError(f"lobe index must be >= 1, got {n}")
    lower = _eps(params, n) - _eps(params, n - 1)
    upper = _eps(params, n + 1) - _eps(params, n)
    return lower, upper


def boundary_tunneling(params, n, mu, settings=DEFAULT_SETTINGS):
    """Smallest t with a nonzero minimizing order parameter at this mu.

    Bisection on the variational psi-onset; mu must lie strictly inside
    lobe n.  Relative tolerance settings.boundary_rel_tol on t.
    """
    lo_mu, hi_mu = mott_lobe_mu_range(params, n)
    if not (lo_mu < mu < hi_mu):
        raise LobeError(
            f"mu={mu:g} outside lobe {n} = ({lo_mu:g}, {hi_mu:g})")

    def is_sf(t):
        try:
            res = minimize_order_parameter(params, t, mu, settings)
        except MinimizationError:
            return True
        return res.psi_star > settings.psi_zero_tol

    # bracketing pre-check: the drive vanishes at t = 0, so psi* must be 0
    if is_sf(0.0):
        raise BracketingError(
            f"nonzero order parameter already at t=0 for mu={mu:g}")
    t_lo = 0.0
    t_hi = (hi_mu - lo_mu) / 8.0
    for _ in range(60):
        if is_sf(t_hi):
            break
        t_lo = t_hi
        t_hi *= 2.0
    else:
        raise BracketingError(
            f"no superfluid onset found below t={t_hi:g} at mu={mu:g}")
    while (t_hi - t_lo) > settings.boundary_rel_tol * t_hi:
        mid = 0.5 * (t_lo + t_hi)
        if is_sf(mid):
            t_hi = mid
        else:
            t_lo = mid
    return 0.5 * (t_lo + t_hi)


def critical_tunneling(params, n, settings=DEFAULT_SETTINGS):
    """Lobe tip: (t_c, mu_tip) maximizing the boundary over mu inside lobe n."""
    lo_mu, hi_mu = mott_lobe_mu_range(params, n)
    if lo_mu >= hi_mu:
        raise LobeError(f"lobe {n} is empty: ({lo_mu:g}, {hi_mu:g})")
    margin = 1e-6 * (hi_mu - lo_mu)

    def neg_boundary(mu):
        return -boundary_tunneling(params, n, mu, settings)

    mu_tip, neg_tc = _golden_min(neg_boundary, lo_mu + margin, hi_mu - margin,
                                 settings.mu_tol)
    return -neg_tc, mu_tip


def _manifold_eigensystem(params, n):
    block = manifold_block(params, n)
    if block.dimension == 1:
        return np.array([float(block.diagonal[0])]), np.array([[1.0]])
    w, v = sla.eigh_tridiagonal(block.diagonal, block.off_diagonal)
    return w, v


def landau_boundary_tunneling(params, n, mu):
    """Perturbative phase boundary: sign change of the psi^2 coefficient.

    Second-order perturbation theory in the drive around the undriven
    lobe-n ground state |G>:

        E(psi) = E_G + z t psi^2 [1 + z t chi] + O(psi^4),
        chi = sum_s |<s|a + a^dag|G>|^2 / (E_G - E_s),

    with s running over the eigenstates of the two adjacent manifolds.  The
    boundary is t = -1 / (z chi).  Manifold blocks are exact, so this
    route has no basis-cutoff error and is independent of the variational
    psi scan.  mu in units of g, relative to omega_ex.
    """
    lo_mu, hi_mu = mott_lobe_mu_range(params, n)
    if not (lo_mu < mu < hi_mu):
        raise LobeError(f"mu={mu:g} outside lobe {n} = ({lo_mu:g}, {hi_mu:g})")
    scaled = SystemParams.dimensionless(params.big_n, params.detuning / params.g,
                                        params.z)
    w_n, v_n = _manifold_eigensystem(scaled, n)
    ground = v_n[:, 0]
    e_ground = w_n[0] - n * mu
    chi = 0.0
    for m in (n - 1, n + 1):
        if m < 0:
            continue
        w_m, v_m = _manifold_eigensystem(scaled, m)
        dim_m = v_m.shape[0]
        amp = np.zeros(dim_m)
        if m == n + 1:
            k = np.arange(len(ground))
            amp[:len(ground)] = np.sqrt(n + 1.0 - k) * ground
        else:
            k = np.arange(dim_m)
            amp = np.sqrt(n - k.astype(float)) * ground[:dim_m]
        overlaps = v_m.T @ amp
        denom = e_ground - (w_m - m * mu)
        chi += float(np.sum(overlaps ** 2 / denom))
    if chi >= 0:
        raise NumericalError(
            f"non-negative drive susceptibility chi={chi:g} at mu={mu:g}; "
            "the undriven state is not the grand-canonical ground state here")
    return -1.0 / (params.z * chi)


def landau_critical_tunneling(params, n, mu_tol=1e-6):
    """Lobe tip from the perturbative boundary (cheap, cutoff-free)."""
    lo_mu, hi_mu = mott_lobe_mu_range(params, n)
    if lo_mu >= hi_mu:
        raise LobeError(f"lobe {n} is empty: ({lo_mu:g}, {hi_mu:g})")
    margin = 1e-9 * (hi_mu - lo_mu)

    def neg_boundary(mu):
        return -landau_boundary_tunneling(params, n, mu)

    mu_tip, neg_tc = _golden_min(neg_boundary, lo_mu + margin, hi_mu - margin,
                                 mu_tol)
    return -neg_tc, mu_tip


def bhm_boundary_oracle(u, z, n, mu):
    """Analytic mean-field Bose-Hubbard lobe boundary (validation oracle).

    z*t(mu) = (u n - mu)(mu - u (n-1)) / ((n+1)(mu - u(n-1)) + n(u n - mu)),
    valid for u(n-1) < mu < u n.  Returns t.
    """
    if u <= 0:
        raise ValueError(f"u must be positive, got {u}")
    if n < 1:
        raise ValueError(f"lobe index must be >= 1, got {n}")
    lo, hi = u * (n - 1.0), u * n
    if not (lo < mu < hi):
        raise LobeError(f"mu={mu:g} outside the BHM lobe base ({lo:g}, {hi:g})")
    a = hi - mu
    b = mu - lo
    return a * b / (((n + 1.0) * b + n * a) * z)
