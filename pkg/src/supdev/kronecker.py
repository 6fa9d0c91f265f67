"""Lattice-localized simultaneous approximation and exponential-sum scans.

Given frequencies lambda_1..lambda_N, the obstruction scale Xi is the
smallest distance to the nearest integer of h * sum(lambda_l nu_l) over
nonzero integer vectors with sup-norm at most floor(6 omega log(N omega /
C_o)).  When Xi > 0 and the scan interval is long enough, every target
vector is approximated to 1/omega by some lattice point t in I intersected
with h*N, and the number of such points admits explicit lower bounds.  The
same machinery drives the running-maximum law for |sum alpha_k e^{i c nu
lambda_k}| along arithmetic progressions and the divergence of the
normalized absolute-covariance series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .bounds import BoundReport
from .errors import BudgetError, CheckError, DomainError
from .spectrum import PolynomialSpec, power_sum

__all__ = [
    "LatticeCorrelation",
    "LatticeProblem",
    "LatticeSearch",
    "SolutionCount",
    "XiReport",
    "bound_cos_lattice",
    "divergence_partial_sums",
    "lattice_correlation",
    "lattice_search",
    "limsup_exponential_sum",
    "nearest_int_dist",
    "solution_count",
    "xi",
]

ENUM_BUDGET = 10**8  # hard cap on enumeration sizes (desk scale)


def nearest_int_dist(u) -> np.ndarray:
    """Distance to the nearest integer, |u - round(u)| (round-half-to-even;
    exact ties are measure zero)."""
    u = np.asarray(u, dtype=float)
    return np.abs(u - np.round(u))


@dataclass(frozen=True)
class LatticeProblem:
    """Approximation targets: frequencies, targets, precision 1/omega,
    lattice step h, scan interval, and the free constant C_o < 1/4."""

    lambdas: tuple
    betas: tuple
    omega: int
    h: float
    interval: tuple
    c_o: float = 0.125

    def __post_init__(self):
        if len(self.lambdas) < 1:
            raise DomainError("need at least one frequency")
        if len(self.betas) != len(self.lambdas):
            raise DomainError(f"{len(self.betas)} targets for {len(self.lambdas)} frequencies")
        if self.omega < 1:
            raise DomainError(f"omega={self.omega} must be a positive integer")
        if self.h <= 0.0:
            raise DomainError(f"h={self.h} must be positive")
        lo, hi = self.interval
        if hi - lo <= self.h:
            raise DomainError(f"interval length {hi - lo} must exceed h={self.h}")
        if not 0.0 < self.c_o < 0.25:
            raise DomainError(f"c_o={self.c_o} outside (0, 1/4)")

    @property
    def n_freq(self) -> int:
        return len(self.lambdas)

    def radius(self) -> int:
        """Enumeration radius floor(6 omega log(N omega / C_o))."""
        return int(math.floor(6.0 * self.omega * math.log(self.n_freq * self.omega / self.c_o)))

    def length_threshold(self, xi_value: float) -> float:
        """Interval length above which the 1/omega approximation is guaranteed."""
        if xi_value <= 0.0:
            return math.inf
        base = (4.0 * self.omega / self.c_o) * math.sqrt(math.log(self.n_freq * self.omega / self.c_o))
        return base**self.n_freq / xi_value


@dataclass
class XiReport:
    xi: float
    argmin: tuple
    radius: int
    degenerate: bool  # xi == 0: the approximation hypothesis fails

    def __post_init__(self):
        if self.xi < 0.0:
            raise DomainError("xi must be nonnegative")
        if self.radius >= 1 and not self.degenerate:
            sup = max(abs(v) for v in self.argmin)
            if not 0 < sup <= self.radius:
                raise DomainError("argmin sup-norm escaped (0, radius]")


def xi(problem: LatticeProblem, radius: Optional[int] = None) -> XiReport:
    """Brute-force minimum of ||h sum(lambda_l nu_l)|| over nonzero integer
    vectors with sup norm at most the enumeration radius.

    Ties break to the lexicographically smallest vector (scan order).  A
    zero minimum is reported with the degenerate flag rather than raised.
    """
    m = problem.radius() if radius is None else int(radius)
    if m < 1:
        raise DomainError(f"enumeration radius {m} < 1 (raise omega or lower c_o)")
    n = problem.n_freq
    total = (2 * m + 1) ** n
    if total > ENUM_BUDGET:
        raise BudgetError(f"enumeration size (2*{m}+1)^{n} = {total} exceeds {ENUM_BUDGET}")
    lam = np.asarray(problem.lambdas, dtype=float)
    side = np.arange(-m, m + 1)

    if n == 1:
        inner = np.zeros(1)
        combos = np.zeros((1, 0), dtype=np.int64)
    else:
        grids = np.meshgrid(*([side] * (n - 1)), indexing="ij")
        combos = np.stack([g.ravel() for g in grids], axis=1)
        inner = combos @ lam[1:]

    best = math.inf
    best_vec = None
    for nu1 in side:
        sums = problem.h * (nu1 * lam[0] + inner)
        dists = nearest_int_dist(sums)
        if nu1 == 0:
            nonzero = np.any(combos != 0, axis=1) if n > 1 else np.zeros(1, dtype=bool)
            dists = np.where(nonzero, dists, math.inf)
        i = int(np.argmin(dists))
        if dists[i] < best:
            best = float(dists[i])
            best_vec = (int(nu1), *map(int, combos[i])) if n > 1 else (int(nu1),)
    return XiReport(xi=best, argmin=best_vec, radius=m, degenerate=(best == 0.0))


@dataclass
class LatticeSearch:
    t_best: float
    achieved: float
    hits: np.ndarray  # all t in I with max_j ||t lambda_j - beta_j|| <= 1/omega
    m_best: int
    lattice_size: int


def _lattice_range(problem: LatticeProblem) -> tuple:
    lo, hi = problem.interval
    m_lo = max(0, int(math.ceil(lo / problem.h - 1e-12)))
    m_hi = int(math.floor(hi / problem.h + 1e-12))
    if m_hi < m_lo:
        raise DomainError(f"no lattice points h*m inside [{lo}, {hi}]")
    return m_lo, m_hi


def lattice_search(problem: LatticeProblem, arm_threshold: bool = True) -> LatticeSearch:
    """Scan t = h*m over the interval and minimize max_j ||t lambda_j - beta_j||.

    Returns the smallest minimizing t, the achieved distance, and the full
    list of t meeting the 1/omega target.  When the achieved distance
    misses 1/omega and the interval is longer than the guarantee threshold
    (which requires computing Xi), a CheckError is raised; below the
    threshold the miss is legitimate.
    """
    m_lo, m_hi = _lattice_range(problem)
    count = m_hi - m_lo + 1
    if count > ENUM_BUDGET:
        raise BudgetError(f"lattice scan size {count} exceeds {ENUM_BUDGET}")
    lam = np.asarray(problem.lambdas, dtype=float)
    bet = np.asarray(problem.betas, dtype=float)
    target = 1.0 / problem.omega

    best = math.inf
    best_m = m_lo
    hit_chunks = []
    chunk = max(1, min(count, (1 << 22) // max(problem.n_freq, 1)))
    for start in range(m_lo, m_hi + 1, chunk):
        ms = np.arange(start, min(start + chunk, m_hi + 1))
        ts = problem.h * ms
        dist = nearest_int_dist(np.outer(ts, lam) - bet).max(axis=1)
        i = int(np.argmin(dist))
        if dist[i] < best:
            best = float(dist[i])
            best_m = int(ms[i])
        hit_chunks.append(ts[dist <= target])
    hits = np.concatenate(hit_chunks)

    if arm_threshold and best > target:
        xi_rep = xi(problem)
        lo, hi = problem.interval
        if hi - lo > problem.length_threshold(xi_rep.xi):
            raise CheckError(
                f"approximation guarantee violated: achieved {best:.6g} > 1/omega={target:.6g} "
                f"on an interval of length {hi - lo:.6g} above the threshold "
                f"{problem.length_threshold(xi_rep.xi):.6g}"
            )
    return LatticeSearch(
        t_best=problem.h * best_m,
        achieved=best,
        hits=hits,
        m_best=best_m,
        lattice_size=count,
    )


class SolutionCount(NamedTuple):
    count: int
    lower_ii: float  # (C / (omega sqrt(k)))^N * |I cap hN|
    lower_iii: float  # C^{N/2} / (h Xi)
    k: int


def solution_k(ratio: float) -> int:
    """Smallest j >= 1 with ratio <= 4^{2j-1} / sqrt(j)."""
    if ratio <= 0.0:
        raise DomainError(f"ratio={ratio} must be positive")
    j = 1
    while 4.0 ** (2 * j - 1) / math.sqrt(j) < ratio:
        j += 1
        if j > 64:
            raise DomainError(f"no admissible k below 64 for ratio={ratio}")
    return j


def solution_count(
    problem: LatticeProblem,
    C: float = 1.0,
    search: Optional[LatticeSearch] = None,
    assert_lower_bounds: bool = False,
) -> SolutionCount:
    """Count the 1/omega approximants on the lattice and evaluate the two
    lower bounds with the supplied free constant.

    The bounds are reported for comparison; they are asserted only in
    calibration mode (assert_lower_bounds=True) because their constant is
    not pinned by the statement.
    """
    if search is None:
        search = lattice_search(problem, arm_threshold=False)
    n = problem.n_freq
    ratio = n * problem.omega / problem.c_o
    k = solution_k(ratio)
    lower_ii = (C / (problem.omega * math.sqrt(k))) ** n * search.lattice_size
    xi_rep = xi(problem)
    lower_iii = C ** (n / 2.0) / (problem.h * xi_rep.xi) if xi_rep.xi > 0.0 else math.inf
    count = int(search.hits.size)
    if assert_lower_bounds:
        if count < lower_ii:
            raise CheckError(f"count {count} below lower bound (ii) {lower_ii:.6g} at C={C}")
        if count < lower_iii:
            raise CheckError(f"count {count} below lower bound (iii) {lower_iii:.6g} at C={C}")
    return SolutionCount(count, lower_ii, lower_iii, k)


def limsup_exponential_sum(
    alphas: Sequence[float],
    lambdas: Sequence[float],
    start: int,
    step: int,
    M: int,
    convention: str = "2pi",
) -> tuple:
    """Running maximum of |sum_k alpha_k e^{i c nu lambda_k}| over the
    arithmetic progression nu = start + step*m, m = 0..M-1.

    ``convention`` picks the phase scaling c: "2pi" (c = 2 pi) or "2"
    (c = 2); both are exposed because the two scalings appear side by side
    and only differ by a relabeling of the frequencies.  Returns
    (running_max, final_max); the running maximum is non-decreasing and
    bounded by sum(alpha_k).
    """
    a = np.asarray(alphas, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if a.size != lam.size:
        raise DomainError(f"{a.size} amplitudes for {lam.size} frequencies")
    if np.any(a < 0.0):
        raise DomainError("amplitudes must be nonnegative")
    if M < 1 or step < 1:
        raise DomainError(f"need M >= 1 and step >= 1, got M={M}, step={step}")
    if convention == "2pi":
        c = 2.0 * math.pi
    elif convention == "2":
        c = 2.0
    else:
        raise DomainError(f"unknown phase convention {convention!r}")
    if M * a.size > ENUM_BUDGET:
        raise BudgetError(f"progression scan size {M * a.size} exceeds {ENUM_BUDGET}")

    running = np.empty(M)
    best = 0.0
    chunk = max(1, (1 << 21) // max(a.size, 1))
    for s in range(0, M, chunk):
        nu = (start + step * np.arange(s, min(s + chunk, M))).astype(float)
        vals = np.abs(np.exp(1j * c * np.outer(nu, lam)) @ a)
        seg = np.maximum.accumulate(vals)
        running[s : s + nu.size] = np.maximum(seg, best)
        best = float(running[s + nu.size - 1])
    return running, best


def divergence_partial_sums(spec: PolynomialSpec, a: float, js: Sequence[int]) -> list:
    """Partial sums S_J = (1/A) sum_{j=0}^{J} |sum_k a_k^2 cos(lambda_k j a)|
    for each requested J (ascending).

    Coefficients must be non-vanishing on the range (the sequence flag is
    required); linear independence of the frequencies is the caller's
    assertion.  S_J is non-decreasing in J and scale-invariant in the
    coefficients.
    """
    if a <= 0.0:
        raise DomainError(f"step a={a} must be positive")
    ladder = [int(j) for j in js]
    if not ladder or any(j < 0 for j in ladder) or sorted(ladder) != ladder:
        raise DomainError("J ladder must be a nondecreasing list of nonnegative integers")
    if not spec.coeffs.nonvanishing:
        raise DomainError("divergence sums require a non-vanishing coefficient sequence flag")
    a2 = power_sum(spec, 2)
    if a2 <= 0.0:
        raise DomainError("A(x) must be positive")
    aa = spec.coeff_values() ** 2
    lam = spec.angular_freqs()
    sums = []
    running = 0.0
    chunk = max(1, (1 << 22) // max(lam.size, 1))
    cursor = 0
    for j_stop in ladder:
        while cursor <= j_stop:
            hi = min(cursor + chunk - 1, j_stop)
            jj = np.arange(cursor, hi + 1, dtype=float)
            running += float(np.sum(np.abs(np.cos(np.outer(jj * a, lam)) @ aa)))
            cursor = hi + 1
        sums.append(running / a2)
    return sums


class LatticeCorrelation(NamedTuple):
    max_offdiag_corr: float
    eta: float
    var_ratio_min: float
    accepted_ts: tuple
    cap_ok: bool
    floor_ok: bool


def lattice_correlation(
    spec: PolynomialSpec,
    a: float,
    omega: int,
    beta: float,
    c: float,
    sample_ts: Sequence[float],
    check: bool = True,
) -> LatticeCorrelation:
    """Exact correlations of the cosine half-process across lattice sample
    points, against the cap eta = 1 - 2/omega and the variance floor eta*A.

    Admissibility: c in (0, 2/pi), (c/2) beta^2 < 1, omega > 12 pi /
    (c (pi beta)^2).  Sample points must pass the sine-form 1/omega filter
    max_k |sin(lambda_k t - beta)| <= 1/omega (points produced by a lattice
    search on frequencies a*lambda_k/pi with target beta/pi and precision
    omega' >= pi*omega pass it); failing points are rejected.

    With check=True a violated cap or floor raises CheckError.  Note the
    floor is structurally tight: the admissibility constraints force
    beta^2 > 6/omega while the floor needs sin(beta)^2 <= 2/omega, so for
    admissible inputs the computed variance ratio sits near cos(beta)^2
    below eta; the check reports exactly that.
    """
    if not 0.0 < c < 2.0 / math.pi:
        raise DomainError(f"c={c} outside (0, 2/pi)")
    if not (c / 2.0) * beta * beta < 1.0:
        raise DomainError(f"(c/2) beta^2 = {(c / 2.0) * beta * beta} must be below 1")
    omega_floor = 12.0 * math.pi / (c * (math.pi * beta) ** 2)
    if not omega > omega_floor:
        raise DomainError(f"omega={omega} must exceed 12 pi / (c (pi beta)^2) = {omega_floor:.4g}")
    lam = spec.angular_freqs()
    aa = spec.coeff_values() ** 2
    a2 = float(np.sum(aa))
    if a2 <= 0.0:
        raise DomainError("A(x) must be positive")

    accepted = []
    for t in sample_ts:
        dev = np.abs(np.sin(lam * t - beta))
        if float(dev.max()) <= 1.0 / omega:
            accepted.append(float(t))
    if not accepted:
        raise DomainError("no sample point passes the 1/omega approximation filter")

    cosines = np.cos(np.outer(np.asarray(accepted), lam))  # (m, x)
    gram = (cosines * aa) @ cosines.T
    variances = np.diag(gram)
    denom = np.sqrt(np.outer(variances, variances))
    corr = gram / denom
    eta = 1.0 - 2.0 / omega
    m = len(accepted)
    if m > 1:
        off = corr[~np.eye(m, dtype=bool)]
        max_off = float(off.max())
    else:
        max_off = -math.inf
    var_ratio_min = float(variances.min() / a2)
    cap_ok = (m <= 1) or (max_off <= eta)
    floor_ok = var_ratio_min >= eta
    if check:
        if not cap_ok:
            raise CheckError(f"correlation cap violated: max offdiagonal {max_off:.6g} > eta={eta:.6g}")
        if not floor_ok:
            raise CheckError(
                f"variance floor violated: min ratio {var_ratio_min:.6g} < eta={eta:.6g} "
                f"(expected near cos(beta)^2 = {math.cos(beta) ** 2:.6g})"
            )
    return LatticeCorrelation(max_off, eta, var_ratio_min, tuple(accepted), cap_ok, floor_ok)


def bound_cos_lattice(m: int, eta: float, kappa_arg: float, total_a2: Optional[float] = None) -> BoundReport:
    """Equicorrelated-comparison bound for the cosine half-process on lattice
    points: (1 - eta)^{-(m-1)/2} Phi(kappa / sqrt(1 + eta (m-1)))^m.

    When the coefficient mass sum(a_k^2) is supplied, the threshold the
    bound applies to, eta * sqrt(sum a_k^2) * kappa, is reported too.
    """
    if m < 2:
        raise DomainError(f"m={m} < 2")
    if not 0.0 < eta < 1.0:
        raise DomainError(f"eta={eta} outside (0, 1)")
    value = (1.0 - eta) ** (-(m - 1) / 2.0) * float(ndtr(kappa_arg / math.sqrt(1.0 + eta * (m - 1)))) ** m
    threshold = eta * math.sqrt(total_a2) * kappa_arg if total_a2 is not None else None
    return BoundReport(
        value=value,
        threshold=threshold,
        intermediates={"eta": eta, "m": m},
    )
