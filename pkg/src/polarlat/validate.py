"""Built-in oracle suite: closed forms and independent cross-checks that a
healthy build must reproduce.  Used by the ``validate`` CLI subcommand and
by the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import meanfield, observables
from .fields import ScalarField3D
from .kerr import VACUUM_PERMITTIVITY, effective_bhm
from .model import (SystemParams, build_basis, build_site_hamiltonian,
                    lowest_eigenpair, manifold_energy)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    expected: float
    residual: float  # relative residual compared against tol
    tol: float
    passed: bool


def _check(name, value, expected, tol, scale=None):
    scale = scale if scale is not None else max(1.0, abs(expected))
    residual = abs(value - expected) / scale
    return CheckResult(name=name, value=float(value), expected=float(expected),
                       residual=float(residual), tol=tol, passed=residual <= tol)


def _gaussian_fixture(n=64, box=4.5, sigma=1.0, k_c=12.0, chi3=2.0e-19):
    ax = np.linspace(-box, box, n)
    dx = ax[1] - ax[0]
    x, y, z = np.meshgrid(ax, ax, ax, indexing="ij")
    vals = 3.0 * np.exp(-(x * x + y * y + z * z) / (2.0 * sigma * sigma))
    phi = ScalarField3D(vals, (dx, dx, dx), (-box, -box, -box))
    kc = ScalarField3D(np.full(phi.shape, k_c), phi.spacing, phi.origin)
    c3 = ScalarField3D(np.full(phi.shape, chi3), phi.spacing, phi.origin)
    return phi, kc, c3, sigma, k_c, chi3


def run_checks(inject_failure=False, kerr_grid=64):
    """Run every oracle check; returns a list of CheckResult."""
    checks = []

    # interaction energy against the resonant ladder closed form
    # g (2 sqrt(N) - sqrt(4N - 2))
    for n_imp in (1, 3, 8):
        p = SystemParams.dimensionless(n_imp)
        expected = 2.0 * math.sqrt(n_imp) - math.sqrt(4.0 * n_imp - 2.0)
        if inject_failure and n_imp == 8:
            expected *= 1.0 + 1e-3
        checks.append(_check(f"interaction_energy_n{n_imp}",
                             observables.interaction_energy(p), expected, 1e-9))

    p8 = SystemParams.dimensionless(8)
    checks.append(_check("two_excitation_energy_n8", manifold_energy(p8, 2),
                         -math.sqrt(30.0), 1e-12))

    # undriven dense spectrum decomposes into manifolds
    mu_rel = -2.71
    basis = build_basis(9, 8)
    h = build_site_hamiltonian(p8, basis, t=0.0, mu=p8.omega_ex + mu_rel, psi=0.0)
    dense_e, _ = lowest_eigenpair(h)
    manifold_e = min(manifold_energy(p8, n) - n * mu_rel for n in range(10))
    checks.append(_check("block_consistency", dense_e, manifold_e, 1e-9))

    # drive-parity of the ground energy (gauge a -> -a)
    h_plus = build_site_hamiltonian(p8, basis, t=0.01, mu=p8.omega_ex + mu_rel,
                                    psi=0.37)
    h_minus = build_site_hamiltonian(p8, basis, t=0.01, mu=p8.omega_ex + mu_rel,
                                     psi=-0.37)
    e_plus, _ = lowest_eigenpair(h_plus)
    e_minus, _ = lowest_eigenpair(h_minus)
    checks.append(_check("psi_parity", e_plus, e_minus, 1e-12, scale=abs(e_minus)))

    lo, hi = meanfield.mott_lobe_mu_range(p8, 1)
    checks.append(_check("lobe_lower_n8", lo, -math.sqrt(8.0), 1e-9))
    checks.append(_check("lobe_upper_n8", hi, math.sqrt(8.0) - math.sqrt(30.0), 1e-9))

    # analytic Bose-Hubbard tip: maximizing the oracle recovers the closed form
    def neg(mu):
        return -meanfield.bhm_boundary_oracle(1.0, 4, 1, mu)

    mu_tip, neg_t = meanfield._golden_min(neg, 1e-9, 1.0 - 1e-9, 1e-10)
    checks.append(_check("bhm_tip_tunneling", -neg_t,
                         (3.0 - 2.0 * math.sqrt(2.0)) / 4.0, 1e-6))
    checks.append(_check("bhm_tip_mu", mu_tip, math.sqrt(2.0) - 1.0, 1e-4))

    # variational vs perturbative phase boundary
    worst = 0.0
    for n_imp, det, frac in ((8, 0.0, 0.45), (3, 2.0, 0.3), (1, 0.0, 0.6)):
        p = SystemParams.dimensionless(n_imp, det)
        lo, hi = meanfield.mott_lobe_mu_range(p, 1)
        mu = lo + frac * (hi - lo)
        t_b = meanfield.boundary_tunneling(p, 1, mu)
        t_l = meanfield.landau_boundary_tunneling(p, 1, mu)
        worst = max(worst, abs(t_b - t_l) / t_l)
    checks.append(_check("boundary_vs_curvature", worst, 0.0, 1e-3, scale=1.0))

    checks.append(_check("doping_density_n8",
                         observables.doping_density(8, 817.0, 3.6), 6.8e14,
                         0.01, scale=6.8e14))

    phi, kc, c3, sigma, k_val, chi_val = _gaussian_fixture(n=kerr_grid)
    res = effective_bhm(kc, c3, phi, (2.0 * sigma, 0.0, 0.0))
    eps0 = VACUUM_PERMITTIVITY
    a2 = 1.0 / (2.0 * eps0 * k_val * math.pi ** 1.5 * sigma ** 3)
    t_exact = math.exp(-(2.0 * sigma) ** 2 / (4.0 * sigma ** 2))
    u_exact = -6.0 * eps0 * chi_val * a2 ** 2 * (math.pi / 2.0) ** 1.5 * sigma ** 3
    checks.append(_check("kerr_gaussian_t", res.t, t_exact, 1e-3,
                         scale=abs(t_exact)))
    checks.append(_check("kerr_gaussian_u", res.u, u_exact, 1e-3,
                         scale=abs(u_exact)))

    return checks


def format_report(checks):
    lines = []
    width = max(len(c.name) for c in checks)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        lines.append(f"{status}  {c.name:<{width}}  value={c.value:.12g}  "
                     f"expected={c.expected:.12g}  residual={c.residual:.3e}  "
                     f"tol={c.tol:g}")
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return "\n".join(lines)
