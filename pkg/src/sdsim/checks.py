"""Analytic-oracle self-tests behind ``sdsim check``.

Each check is cheap (well under a second) and compares the code against an
independent closed form or scalar quadrature.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .diagnostics import PhaseAccumulator, ProfileSnapshot
from .dynamics import DebyeParams, StepConfig, SystemState, debye_arrays, evolve
from .spectral import (
    ComplexField,
    RealField,
    free_propagate,
    gaussian,
    h1_norm,
    lp_norm,
    make_grid,
    moment_norm,
    physical_array,
    spectrum_array,
)


@dataclass
class CheckResult:
    name: str
    error: float
    tol: float
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tol)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: error {self.error:.3e} (tol {self.tol:.0e}, {self.seconds:.2f}s)"


def free_gaussian(x: np.ndarray, t: float) -> np.ndarray:
    """Exact free evolution of ``exp(-x^2/2)`` in d = 1."""
    return np.exp(-(x**2) / (2 * (1 + 1j * t))) / np.sqrt(1 + 1j * t)


def check_round_trip(seed: int = 0) -> float:
    g = make_grid(2, 64, 20.0)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    back = physical_array(g, spectrum_array(g, u))
    return float(np.max(np.abs(back - u)) / np.max(np.abs(u)))


def check_gaussian_transform() -> float:
    g = make_grid(1, 1024, 64.0)
    uh = spectrum_array(g, gaussian(g))
    exact = math.sqrt(2 * math.pi) * np.exp(-g.xi_axis**2 / 2)
    return float(np.max(np.abs(uh - exact)))


def check_free_propagator() -> float:
    g = make_grid(1, 1024, 64.0)
    u0 = ComplexField(g, gaussian(g))
    return max(
        float(np.max(np.abs(free_propagate(u0, t).values - free_gaussian(g.x_axis, t))))
        for t in (0.5, 1.0, 2.0, 4.0)
    )


def check_debye_flow(seed: int = 0) -> float:
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for mu in (0.25, 1.0, 4.0):
        for lam in (-1, 1):
            u0 = rng.standard_normal(17) + 1j * rng.standard_normal(17)
            v0 = rng.standard_normal(17)
            h = 0.3
            u1, v1 = debye_arrays(u0, v0, h, mu, lam)
            for k in range(u0.size):
                def rhs(_, y, a2=abs(u0[k]) ** 2):
                    return [(lam * a2 - y[0]) / mu, y[0]]
                sol = integrate.solve_ivp(rhs, (0, h), [v0[k], 0.0], method="DOP853", rtol=1e-13, atol=1e-14)
                v_ref, theta = sol.y[:, -1]
                u_ref = u0[k] * np.exp(-1j * theta)
                worst = max(worst, abs(v1[k] - v_ref), abs(u1[k] - u_ref))
    return worst


def check_norm_closed_forms() -> float:
    g = make_grid(1, 1024, 64.0)
    u = ComplexField(g, gaussian(g))
    errs = (
        abs(lp_norm(u, 2) - math.pi**0.25),
        abs(h1_norm(u) - math.sqrt(1.5 * math.sqrt(math.pi))),
        abs(moment_norm(u) - math.sqrt(math.sqrt(math.pi) / 2)),
    )
    return max(errs)


def check_mass() -> float:
    g = make_grid(1, 512, 64.0)
    st = SystemState(ComplexField(g, gaussian(g, 0.5)), RealField(g, gaussian(g, 0.5).real), 0.0)
    m0 = lp_norm(st.u, 2)
    out = evolve(st, StepConfig(0.01, 2.0, output_stride=10**6), DebyeParams(1.0, 1))
    return abs(lp_norm(out.u, 2) - m0) / m0


def check_phase_quadrature() -> float:
    g = make_grid(1, 16, 16.0)
    mu, t_end, h = 1.0, 3.0, 0.005
    acc = PhaseAccumulator(g, window=40.0, max_spacing=h, mu=mu)
    flat = ComplexField(g, np.ones(g.shape, complex), "spectral")
    for k in range(int(round((t_end - 1) / h)) + 1):
        acc.update(ProfileSnapshot(1 + k * h, flat))

    def inner(s):
        return integrate.quad(lambda r: math.exp(-(s - r) / mu) / (2 * r * mu), 1.0, s, epsabs=1e-14)[0]

    ref = integrate.quad(inner, 1.0, t_end, epsabs=1e-14)[0]
    return abs(float(acc.psi[g.n // 2]) - ref)


CHECKS: list[tuple[str, Callable[[], float], float]] = [
    ("transform round trip", check_round_trip, 1e-12),
    ("gaussian transform", check_gaussian_transform, 1e-12),
    ("free propagator vs closed form", check_free_propagator, 1e-8),
    ("debye sub-flow vs ODE", check_debye_flow, 1e-10),
    ("gaussian norms", check_norm_closed_forms, 1e-10),
    ("mass over 200 Strang steps", check_mass, 1e-13),
    ("phase integral vs quadrature", check_phase_quadrature, 1e-6),
]


SEEDED = {check_round_trip, check_debye_flow}


def run_checks(seed: int = 0) -> list[CheckResult]:
    """Run every check; ``seed`` feeds the ones that draw random fields."""
    out = []
    for name, fn, tol in CHECKS:
        t0 = time.perf_counter()
        err = fn(seed) if fn in SEEDED else fn()
        out.append(CheckResult(name, err, tol, time.perf_counter() - t0))
    return out
