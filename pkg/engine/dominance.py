"""
Stochastic-dominance checks on degree distributions

A census whose weighted degree distribution first-order stochastically
dominates another's sees lower risk exposure at both the NE and the social
optimum, and every population invests less.
"""

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from logzero import logger

from .equilibrium import FixedPointSettings, solve_ne
from .errors import DimensionMismatch, InvalidParameter
from .models import (
    IdsGame,
    PopulationVector,
    degree_fraction,
    normalize,
    weighted_fraction,
)
from .social import solve_social_optimum

DOMINANCE_SLACK = 1e-12
MONOTONICITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DominanceVerdict:
    holds: bool
    first_violation_degree: Optional[int] = None
    strict_somewhere: bool = False

    def __post_init__(self):
        if self.holds and self.first_violation_degree is not None:
            raise InvalidParameter("a holding verdict cannot name a violating degree")

    def to_dict(self) -> Dict:
        return {
            "holds": self.holds,
            "first_violation_degree": self.first_violation_degree,
            "strict_somewhere": self.strict_somewhere,
        }


@dataclass
class PairCheck:
    """Outcome of the monotonicity claims for one consecutive census pair."""

    index: int
    verdict: DominanceVerdict
    e_ne: Tuple[float, float] = (np.nan, np.nan)
    e_so: Tuple[float, float] = (np.nan, np.nan)
    ne_exposure_ok: Optional[bool] = None
    so_exposure_ok: Optional[bool] = None
    investments_ok: Optional[bool] = None
    strict_expected: bool = False
    strict_observed: Optional[bool] = None

    @property
    def flagged(self) -> bool:
        """Pair skipped because the dominance precondition failed."""
        return not self.verdict.holds

    @property
    def claims_hold(self) -> bool:
        if self.flagged:
            return True
        return bool(self.ne_exposure_ok and self.so_exposure_ok and self.investments_ok)


@dataclass
class MonotonicityReport:
    pairs: List[PairCheck] = field(default_factory=list)

    @property
    def flagged_pairs(self) -> List[int]:
        return [pair.index for pair in self.pairs if pair.flagged]

    @property
    def all_hold(self) -> bool:
        return all(pair.claims_hold for pair in self.pairs)


def _check_same_length(s1: PopulationVector, s2: PopulationVector) -> None:
    if s1.d_max != s2.d_max:
        raise DimensionMismatch(f"censuses have different D_max: {s1.d_max} vs {s2.d_max}")


def _prefix_dominance(x1: np.ndarray, x2: np.ndarray) -> DominanceVerdict:
    # x1 dominates x2 iff every prefix sum of x1 is <= that of x2
    c1, c2 = np.cumsum(x1), np.cumsum(x2)
    violations = np.nonzero(c1 > c2 + DOMINANCE_SLACK)[0]
    if violations.size:
        return DominanceVerdict(holds=False, first_violation_degree=int(violations[0]) + 1,
                                strict_somewhere=bool(np.any(c1 < c2 - DOMINANCE_SLACK)))
    return DominanceVerdict(holds=True, strict_somewhere=bool(np.any(c1 < c2 - DOMINANCE_SLACK)))


def fosd_weighted(s1: PopulationVector, s2: PopulationVector) -> DominanceVerdict:
    """
    Does w(s1) first-order stochastically dominate w(s2)?

    Holds iff sum_{l<=d} w_l(s1) <= sum_{l<=d} w_l(s2) for all d.

    Raises:
        DimensionMismatch: different D_max
    """
    _check_same_length(s1, s2)
    return _prefix_dominance(weighted_fraction(s1), weighted_fraction(s2))


def fosd_unweighted(s1: PopulationVector, s2: PopulationVector) -> DominanceVerdict:
    """Same prefix-sum test on the plain degree distributions f."""
    _check_same_length(s1, s2)
    return _prefix_dominance(degree_fraction(s1), degree_fraction(s2))


def _mass_ratios(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    # s2_d / s1_d; x/0 -> +inf for x > 0, 0/0 -> nan (skipped)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = s2 / s1
    ratios[(s1 == 0) & (s2 > 0)] = np.inf
    ratios[(s1 == 0) & (s2 == 0)] = np.nan
    return ratios


def _nonincreasing(values: np.ndarray) -> Tuple[Optional[int], bool]:
    """First index (into values) where the sequence increases, and whether it ever strictly decreases."""
    defined = [(i, v) for i, v in enumerate(values) if not np.isnan(v)]
    strict = False
    for (i, prev), (_, cur) in zip(defined, defined[1:]):
        if np.isinf(prev) and np.isinf(cur):
            continue
        slack = DOMINANCE_SLACK * max(1.0, abs(prev)) if np.isfinite(prev) else 0.0
        if cur > prev + slack:
            return i, strict
        if cur < prev - slack:
            strict = True
    return None, strict


def likelihood_ratio_condition(s1: PopulationVector, s2: PopulationVector) -> DominanceVerdict:
    """
    Sufficient condition for fosd_weighted: s2_d / s1_d nonincreasing in d.

    Zero masses: s1_d = 0 < s2_d gives an infinite ratio, 0/0 is skipped.

    Raises:
        DimensionMismatch: different D_max
    """
    _check_same_length(s1, s2)
    ratios = _mass_ratios(degree_fraction(s1), degree_fraction(s2))
    violation, strict = _nonincreasing(ratios)
    if violation is not None:
        return DominanceVerdict(holds=False, first_violation_degree=violation + 1, strict_somewhere=strict)
    return DominanceVerdict(holds=True, strict_somewhere=strict)


def nonincreasing_ratio(a_seq: Sequence[float], b_seq: Sequence[float]) -> bool:
    """Hypothesis of prefix_ratio_check: b_k / a_k nonincreasing in k (a_k > 0)."""
    a_seq, b_seq = np.asarray(a_seq, dtype=float), np.asarray(b_seq, dtype=float)
    if a_seq.shape != b_seq.shape:
        raise DimensionMismatch("sequences must have equal length")
    if np.any(a_seq <= 0):
        raise InvalidParameter("ratio hypothesis needs positive a_k")
    violation, _ = _nonincreasing(b_seq / a_seq)
    return violation is None


def prefix_ratio_check(a_seq: Sequence[float], b_seq: Sequence[float]) -> bool:
    """
    Verify sum_{l<=k} b_l / sum_{l<=k} a_l >= sum b / sum a for every k.

    This is the conclusion that follows when b_k / a_k is nonincreasing;
    the caller is responsible for the hypothesis.

    Raises:
        InvalidParameter: negative entries, length < 2, or a zero prefix of a
        DimensionMismatch: different lengths
    """
    a_seq, b_seq = np.asarray(a_seq, dtype=float), np.asarray(b_seq, dtype=float)
    if a_seq.shape != b_seq.shape:
        raise DimensionMismatch("sequences must have equal length")
    if a_seq.size < 2:
        raise InvalidParameter("sequences need at least two terms")
    if np.any(a_seq < 0) or np.any(b_seq < 0):
        raise InvalidParameter("sequences must be nonnegative")
    prefix_a, prefix_b = np.cumsum(a_seq), np.cumsum(b_seq)
    if np.any(prefix_a == 0):
        raise InvalidParameter("prefix sum of a is zero")
    prefix_ratio = prefix_b / prefix_a
    full_ratio = prefix_ratio[-1]
    return bool(np.all(prefix_ratio >= full_ratio - DOMINANCE_SLACK * max(1.0, abs(full_ratio))))


def monotonicity_sweep(
    census_family: Sequence[PopulationVector],
    game: IdsGame,
    settings: Optional[FixedPointSettings] = None,
) -> MonotonicityReport:
    """
    Check the exposure / investment ordering along an ordered census family.

    For each consecutive pair (s1, s2) where w(s1) dominates w(s2):
    e_NE(s1) <= e_NE(s2), e_SO(s1) <= e_SO(s2) and a_NE(s1) <= a_NE(s2)
    elementwise. Pairs failing the precondition are flagged, not asserted.
    """
    family = [normalize(s) for s in census_family]
    ne_results = [solve_ne(s, game, settings) for s in family]
    so_results = [solve_social_optimum(s, game, settings) for s in family]

    report = MonotonicityReport()
    for i, (s1, s2) in enumerate(zip(family, family[1:])):
        verdict = fosd_weighted(s1, s2)
        if not verdict.holds:
            logger.warning(f"Pair {i} fails the weighted dominance precondition at degree "
                           f"{verdict.first_violation_degree}; skipped")
            report.pairs.append(PairCheck(index=i, verdict=verdict))
            continue

        ne1, ne2 = ne_results[i], ne_results[i + 1]
        so1, so2 = so_results[i], so_results[i + 1]
        strict_expected = verdict.strict_somewhere and ne2.profile.is_interior(game.params)
        check = PairCheck(
            index=i,
            verdict=verdict,
            e_ne=(ne1.exposure, ne2.exposure),
            e_so=(so1.exposure, so2.exposure),
            ne_exposure_ok=ne1.exposure <= ne2.exposure + MONOTONICITY_TOLERANCE,
            so_exposure_ok=so1.exposure <= so2.exposure + MONOTONICITY_TOLERANCE,
            investments_ok=bool(np.all(
                ne1.profile.investments <= ne2.profile.investments + MONOTONICITY_TOLERANCE
            )),
            strict_expected=strict_expected,
            strict_observed=ne1.exposure < ne2.exposure if strict_expected else None,
        )
        if not check.claims_hold:
            logger.warning(f"Monotonicity fails on pair {i}: e_NE={check.e_ne}, e_SO={check.e_so}")
        report.pairs.append(check)
    return report


def _compositions(total: int, parts: int):
    # all nonnegative integer vectors of length `parts` summing to `total`
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        bounds = (-1,) + cuts + (total + parts - 1,)
        yield tuple(bounds[k + 1] - bounds[k] - 1 for k in range(parts))


def find_unweighted_counterexample(
    game: IdsGame,
    d_max: int = 3,
    step: float = 0.1,
    settings: Optional[FixedPointSettings] = None,
) -> Optional[Tuple[PopulationVector, PopulationVector]]:
    """
    Search a census grid for (s1, s2) with f(s1) dominating f(s2) while the
    NE exposure ordering fails, e_NE(s1) > e_NE(s2).

    Shows that the exposure ordering needs the weighted distributions; the
    returned pair necessarily fails fosd_weighted. Returns None if the grid
    holds no such pair.
    """
    units = int(round(1.0 / step))
    if units < 1 or abs(units * step - 1.0) > 1e-9:
        raise InvalidParameter(f"step must divide 1, got {step}")
    censuses = [PopulationVector(np.array(c, dtype=float)) for c in _compositions(units, d_max)]
    exposures = [solve_ne(s, game, settings).exposure for s in censuses]

    for (s1, e1), (s2, e2) in itertools.product(zip(censuses, exposures), repeat=2):
        if e1 > e2 + MONOTONICITY_TOLERANCE and fosd_unweighted(s1, s2).holds:
            logger.info(f"Unweighted counterexample: f1={degree_fraction(s1)}, f2={degree_fraction(s2)}, "
                        f"e1={e1:.6g} > e2={e2:.6g}")
            return s1, s2
    return None
