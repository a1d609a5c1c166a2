"""Cyclic k-cluster solutions and their linear stability.

For k equally weighted clusters the section map has a fixed point with
equal return spacing d; when k = M+1 (one more cluster than can sit
pairwise isolated) the advance window contains at most one signaling
cluster while the responsive region is occupied, and only beta = f(1/k)
enters.  Three event patterns partition the (r, s) band:

  Case I    leader enters R, then the trailing cluster leaves S, then the
            leader finishes:   d = (1 + beta (r - s)) / (k + beta (k - 1))
  Case II   the leader starts inside R:            d = (1 - s beta) / k
  Case III  the second cluster starts inside S:    d = (1 + r beta) / (k (1 + beta))

Every classification is certified by replaying the event sequence with the
exact engine and checking that the configuration returns to itself.  The
linearization of the section map at the fixed point is a (k-1)x(k-1)
matrix with ones on the subdiagonal and a constant last column, -(1+beta)
in Case I and -1 otherwise; its spectrum is computed twice (polynomial
companion roots with Newton polish, and a dense eigendecomposition) and
the two answers must agree.
"""

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .model import (
    CertificateError,
    FeedbackSpec,
    RegionParams,
    ValidationError,
)
from .model import max_isolated_clusters
from .returnmap import advance_to_section

_CLOSURE_TOL = 1e-9
_DUAL_TOL = 1e-8


class Case(Enum):
    I = "I"
    II = "II"
    III = "III"


@dataclass(frozen=True)
class CyclicSolution:
    k: int
    beta: float
    case: Case
    d: float
    residual: float


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    spectral_radius: float
    min_modulus: float
    residuals: np.ndarray


def saturating_feedback(k: int, beta: float) -> FeedbackSpec:
    """A profile with f(1/k) = beta that stays inside the admissible speed
    window for any beta in (-0.95, 19): beta * min(k I, 1).

    Along a cyclic k-cluster solution the signaling fraction only takes the
    values 0 and 1/k, so any profile through (1/k, beta) gives the same
    dynamics; this one saturates so H3 holds even when a linear profile
    through the same point would not.
    """
    if beta == 0.0:
        return FeedbackSpec.linear(0.0)
    return FeedbackSpec.tabulated([(0.0, 0.0), (1.0 / k, beta), (1.0, beta)])


def cyclic_spacing(case: Case, rp: RegionParams, k: int, beta: float) -> float:
    """Return spacing d of the cyclic solution under the given case."""
    if k < 2:
        raise ValidationError("need k >= 2")
    if abs(beta) >= 1.0:
        raise ValidationError("|beta| must be below 1")
    r, s = rp.r, rp.s
    if case is Case.I:
        d = (1.0 + beta * (r - s)) / (k + beta * (k - 1))
    elif case is Case.II:
        d = (1.0 - s * beta) / k
    else:
        d = (1.0 + r * beta) / (k * (1.0 + beta))
    if not (0.0 < d < 1.0) or (k - 1) * d >= 1.0:
        raise ValidationError(f"spacing d={d:.6g} leaves the unit interval for k={k}")
    return d


def _expected_hits(case: Case, k: int) -> List[Tuple[int, str]]:
    """Boundary-hit sequence that certifies each case, leader = k-1.

    Cases II and III include the crossings forced by the band geometry on
    top of the defining milestones: in Case II cluster k-2 enters R after
    cluster 0 leaves S; in Case III cluster 0 never leaves S before the
    return completes.
    """
    if case is Case.I:
        return [(k - 1, "r"), (0, "s"), (k - 1, "1")]
    if case is Case.II:
        return [(0, "s"), (k - 2, "r"), (k - 1, "1")]
    return [(1, "s"), (k - 1, "r"), (k - 1, "1")]


def _verify_case(case: Case, rp: RegionParams, k: int, beta: float):
    """Replay the candidate cyclic solution; return (d, residual) or None."""
    try:
        d = cyclic_spacing(case, rp, k, beta)
    except ValidationError:
        return None
    fs = saturating_feedback(k, beta)
    start = np.arange(k, dtype=float) * d
    t1, final, hits = advance_to_section(start, np.full(k, 1.0 / k), rp, fs)
    expect = np.concatenate([start[1:], [1.0]])
    residual = float(np.max(np.abs(final - expect)))
    residual = max(residual, abs(t1 - d))
    if residual >= _CLOSURE_TOL:
        return None
    if hits != _expected_hits(case, k):
        return None
    return d, residual


def classify_case(rp: RegionParams, k: int, beta: float) -> Case:
    """Which event pattern the cyclic k-cluster solution follows.

    Selection uses the two closed-form inequalities
        s < (1/k) (1 + beta r) / (1 + beta)      (trailing cluster clears S)
        r > ((k-1)/k) (1 - s beta)               (leader starts below R)
    both holding means Case I, a failing s-inequality means Case III, a
    failing r-inequality means Case II.  The selected case is certified by
    replaying its event sequence; on a fp-degenerate boundary the remaining
    cases are tried, and ambiguity or exhaustion is an error.
    """
    if k < 2:
        raise ValidationError("need k >= 2")
    if abs(beta) >= 1.0:
        raise ValidationError("|beta| must be below 1")
    M = max_isolated_clusters(rp)
    if k != M + 1:
        warnings.warn(
            f"k={k} is not M+1={M + 1} for these regions; case analysis may not apply",
            stacklevel=2,
        )
    s_ok = rp.s < (1.0 + beta * rp.r) / (k * (1.0 + beta))
    r_ok = rp.r > (k - 1) / k * (1.0 - rp.s * beta)

    if s_ok and r_ok:
        ordered = [Case.I, Case.II, Case.III]
    elif not s_ok and r_ok:
        ordered = [Case.III, Case.I, Case.II]
    elif s_ok and not r_ok:
        ordered = [Case.II, Case.I, Case.III]
    else:
        # inequalities cannot pick a side; let the certificates decide
        good = [c for c in (Case.II, Case.III) if _verify_case(c, rp, k, beta)]
        if len(good) == 1:
            return good[0]
        if len(good) == 2:
            raise CertificateError(
                f"both Case II and Case III verify at r={rp.r}, s={rp.s}, "
                f"k={k}, beta={beta}; degenerate parameter point"
            )
        raise CertificateError(
            f"no case verifies at r={rp.r}, s={rp.s}, k={k}, beta={beta}"
        )

    primary = ordered[0]
    if _verify_case(primary, rp, k, beta):
        return primary
    for fallback in ordered[1:]:
        if _verify_case(fallback, rp, k, beta):
            return fallback
    raise CertificateError(
        f"no case's event sequence verifies at r={rp.r}, s={rp.s}, k={k}, "
        f"beta={beta} (M={M}); spacing formulas do not close"
    )


def cyclic_solution(rp: RegionParams, k: int, beta: float) -> CyclicSolution:
    """Classified, certified cyclic solution (case, spacing, residual)."""
    case = classify_case(rp, k, beta)
    got = _verify_case(case, rp, k, beta)
    if got is None:
        raise CertificateError("classification and verification disagree")
    d, residual = got
    return CyclicSolution(k=k, beta=beta, case=case, d=d, residual=residual)


def build_A(k: int, beta: float, case: Case) -> np.ndarray:
    """Linearization of the section map at the cyclic fixed point.

    Ones on the subdiagonal, a constant last column: -(1+beta) in Case I,
    -1 in Cases II and III.  For k = 2 this is the 1x1 matrix [c].
    """
    if k < 2:
        raise ValidationError("need k >= 2")
    c = -(1.0 + beta) if case is Case.I else -1.0
    A = np.zeros((k - 1, k - 1))
    for i in range(1, k - 1):
        A[i, i - 1] = 1.0
    A[:, -1] = c
    return A


def verify_root_requirement(lam: complex, k: int, beta: float) -> float:
    """Residual of the eigenvalue identity ((lam+beta)/(1+beta)) lam^(k-1) = 1.

    lam = 1 always satisfies it and carries no information, so it is
    rejected.
    """
    lam = complex(lam)
    if abs(lam - 1.0) < 1e-12:
        raise ValidationError("lambda = 1 is the trivial root; not admissible")
    return float(abs((lam + beta) / (1.0 + beta) * lam ** (k - 1) - 1.0))


def _char_roots(k: int, b: float) -> np.ndarray:
    """Roots of lam^(k-1) + (1+b)(lam^(k-2) + ... + 1), Newton-polished."""
    coeffs = np.concatenate(([1.0], np.full(k - 1, 1.0 + b)))
    roots = np.roots(coeffs)
    dcoeffs = np.polyder(coeffs)
    for _ in range(3):
        val = np.polyval(coeffs, roots)
        der = np.polyval(dcoeffs, roots)
        step = np.where(np.abs(der) > 0, val / np.where(der == 0, 1.0, der), 0.0)
        roots = roots - step
    return roots


def spectrum(k: int, beta: float, case: Case) -> SpectrumReport:
    """Eigenvalues of the linearization, computed twice.

    Polynomial companion roots (polished) are the primary answer; they must
    agree with a dense eigendecomposition of the assembled matrix within
    1e-8 or the report is refused.  residuals holds the root-requirement
    residual of each eigenvalue (with beta = 0 for Cases II/III, whose
    matrix is the Case-I matrix at zero feedback).
    """
    if k < 2:
        raise ValidationError("need k >= 2")
    if case is Case.I:
        if beta == 0.0 or abs(beta) >= 1.0:
            raise ValidationError("Case I needs 0 < |beta| < 1")
        b_eff = beta
    else:
        b_eff = 0.0
    roots = _char_roots(k, b_eff)
    eig = np.linalg.eigvals(build_A(k, beta, case))

    # greedy pairing; k-1 is small
    pool = list(range(eig.size))
    worst = 0.0
    for z in roots:
        dists = [abs(z - eig[j]) for j in pool]
        j = int(np.argmin(dists))
        worst = max(worst, dists[j])
        pool.pop(j)
    if worst > _DUAL_TOL:
        raise CertificateError(
            f"companion roots and eigendecomposition disagree by {worst:.3e} "
            f"for k={k}, beta={beta}, case {case.value}"
        )

    order = np.argsort(np.angle(roots), kind="stable")
    roots = roots[order]
    residuals = np.array([verify_root_requirement(z, k, b_eff) for z in roots])
    mods = np.abs(roots)
    return SpectrumReport(
        eigenvalues=roots,
        spectral_radius=float(mods.max()),
        min_modulus=float(mods.min()),
        residuals=residuals,
    )


def write_spectrum_csv(rows, path) -> None:
    """Spectrum sweep export: k,beta,case,d,spectral_radius,min_modulus."""
    with open(path, "w") as fh:
        fh.write("k,beta,case,d,spectral_radius,min_modulus\n")
        for k, beta, case, d, rad, mmin in rows:
            fh.write(f"{k},{beta:.17g},{case},{d:.17g},{rad:.17g},{mmin:.17g}\n")


def write_region_csv(rows, path) -> None:
    """Case-region export on an (r, s) grid: r,s,k,case."""
    with open(path, "w") as fh:
        fh.write("r,s,k,case\n")
        for r, s, k, case in rows:
            fh.write(f"{r:.17g},{s:.17g},{k},{case}\n")
