"""
Commutator-norm inequality for families of symmetric matrices:

    sum_{a,b} N(A_a A_b - A_b A_a) + sum_{a,b} S_ab^2 <= 3/2 (sum_a S_a)^2

with N(A) = trace(A^t A), S_ab = trace(A_a^t A_b) and S_a = S_aa. Both
double sums run over ordered pairs.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List

import numpy as np

from app.config import current_config
from app.middleware.error_handler import ConfigurationError, EvaluationError, InvalidInputError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-14
NEGATIVE_GAP_LIMIT = 1e-10


@dataclass
class MatrixFamily:
    """p symmetric dim x dim matrices stacked as an array of shape (p, dim, dim)"""
    matrices: np.ndarray

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=float)
        if self.matrices.ndim != 3 or self.matrices.shape[1] != self.matrices.shape[2]:
            raise InvalidInputError(f"Expected an array of square matrices, got shape {self.matrices.shape}")
        if not np.all(np.isfinite(self.matrices)):
            raise InvalidInputError("Non-finite matrix entries")

    @property
    def p(self):
        return self.matrices.shape[0]

    @property
    def dim(self):
        return self.matrices.shape[1]

    def asymmetry(self):
        return float(np.max(np.abs(self.matrices - np.swapaxes(self.matrices, 1, 2)), initial=0.0))

    def to_dict(self):
        return {'p': self.p, 'dim': self.dim, 'matrices': self.matrices.tolist()}


@dataclass
class LiLiGap:
    commutator_sum: float
    s2_sum: float
    rhs: float
    gap: float

    @property
    def ratio(self):
        return self.gap / self.rhs if self.rhs > 0 else 0.0

    def to_dict(self):
        return {'commutator_sum': self.commutator_sum, 's2_sum': self.s2_sum, 'rhs': self.rhs,
                'gap': self.gap, 'ratio': self.ratio}


def li_li_gap(fam: MatrixFamily) -> LiLiGap:
    """Both sides of the inequality and their difference"""
    A = fam.matrices
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if fam.asymmetry() > SYMMETRY_TOLERANCE * scale:
        raise InvalidInputError(f"Family is not symmetric (defect {fam.asymmetry():.3e})")
    A = 0.5 * (A + np.swapaxes(A, 1, 2))

    products = np.einsum('aij,bjk->abik', A, A)
    commutators = products - np.swapaxes(products, 0, 1)
    commutator_sum = float(np.sum(commutators ** 2))
    S = np.einsum('aij,bij->ab', A, A)
    s2_sum = float(np.sum(S ** 2))
    rhs = 1.5 * float(np.trace(S)) ** 2
    return LiLiGap(commutator_sum, s2_sum, rhs, rhs - commutator_sum - s2_sum)


def random_family(p, dim, seed, scale=1.0) -> MatrixFamily:
    """Seeded symmetric family with Frobenius norms at most ``scale``"""
    if p < 2 or dim < 1:
        raise ConfigurationError(f"Need p >= 2 and dim >= 1, got p={p}, dim={dim}")
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(p, dim, dim))
    A = 0.5 * (raw + np.swapaxes(raw, 1, 2))
    norms = np.linalg.norm(A, axis=(1, 2))
    norms[norms == 0] = 1.0
    sizes = scale * rng.uniform(0.0, 1.0, size=p)
    return MatrixFamily(A * (sizes / norms)[:, None, None])


@dataclass
class TrialSummary:
    trials: int
    min_ratio: float
    worst_trial: int
    violations: int

    def to_dict(self):
        return {'trials': self.trials, 'min_ratio': self.min_ratio, 'worst_trial': self.worst_trial,
                'violations': self.violations}


def run_trials(p, dim, trials, seed, tolerance=None) -> TrialSummary:
    """Evaluate seeded random families concurrently; aggregation follows trial order"""
    cfg = current_config()
    tolerance = cfg.TOLERANCES['lili_gap'] if tolerance is None else tolerance
    children = np.random.SeedSequence(seed).spawn(trials)

    def ratio(child):
        result = li_li_gap(random_family(p, dim, child))
        return result.ratio

    with ThreadPoolExecutor(max_workers=cfg.WORKERS) as pool:
        ratios = np.fromiter(pool.map(ratio, children, chunksize=256), dtype=float, count=trials)
    worst = int(np.argmin(ratios))
    violations = int(np.sum(ratios < -tolerance))
    logger.info(f"Finished {trials} trials (p={p}, dim={dim}): min gap/rhs {ratios[worst]:.3e}")
    return TrialSummary(trials, float(ratios[worst]), worst, violations)


@dataclass
class SearchResult:
    family: MatrixFamily
    gap: float
    ratio: float
    history: List[float] = field(default_factory=list)  # best-so-far ratio after each restart

    def to_dict(self):
        return {'gap': self.gap, 'ratio': self.ratio, 'history': self.history, 'family': self.family.to_dict()}


def _objective(A):
    result = li_li_gap(MatrixFamily(A))
    return result.ratio if result.rhs > 0 else np.inf


def _hill_climb(start, budget, rng, step=0.3, decay=0.995):
    current = start / max(np.linalg.norm(start), 1e-300)
    value = _objective(current)
    for _ in range(budget - 1):
        noise = rng.normal(size=current.shape)
        candidate = current + step * 0.5 * (noise + np.swapaxes(noise, 1, 2))
        candidate /= np.linalg.norm(candidate)
        candidate_value = _objective(candidate)
        if candidate_value < value:
            current, value = candidate, candidate_value
        else:
            step *= decay
    return current, value


def minimize_gap(p, dim, seed, iterations, restarts=4) -> SearchResult:
    """Random-restart hill climb on gap/rhs; the first restart starts at random_family(seed)"""
    if iterations < 1:
        raise ConfigurationError("iterations must be at least 1")
    start = random_family(p, dim, seed).matrices
    restarts = max(1, min(restarts, iterations))
    if iterations == 1:
        result = li_li_gap(MatrixFamily(start))
        return SearchResult(MatrixFamily(start), result.gap, result.ratio, [result.ratio])

    budgets = [iterations // restarts + (1 if k < iterations % restarts else 0) for k in range(restarts)]
    children = np.random.SeedSequence(seed).spawn(restarts)
    starts = [start] + [random_family(p, dim, child).matrices for child in children[1:]]

    def climb(k):
        return _hill_climb(starts[k], budgets[k], np.random.default_rng(children[k]))

    with ThreadPoolExecutor(max_workers=current_config().WORKERS) as pool:
        outcomes = list(pool.map(climb, range(restarts)))

    history, best = [], None
    for matrices, value in outcomes:
        if best is None or value < best[1]:
            best = (matrices, value)
        history.append(float(best[1]))
    family = MatrixFamily(best[0])
    result = li_li_gap(family)
    if result.gap < -NEGATIVE_GAP_LIMIT * result.rhs:
        raise EvaluationError(f"Search produced a negative gap {result.gap:.3e}; the inequality evaluation is broken")
    logger.info(f"Gap search (p={p}, dim={dim}, {iterations} iterations): best gap/rhs {result.ratio:.3e}")
    return SearchResult(family, result.gap, result.ratio, history)


@dataclass
class SliceStats:
    family: MatrixFamily
    S_star: np.ndarray
    lam: np.ndarray
    S_H: float

    def to_dict(self):
        return {'S_star': self.S_star.tolist(), 'lambda': self.lam.tolist(), 'S_H': self.S_H}


def alignment_rotation(Hstar) -> np.ndarray:
    """Proper rotation Q with Q H = |H| e_1 (identity when H vanishes)"""
    Hstar = np.asarray(Hstar, dtype=float)
    n = Hstar.shape[-1]
    Q = np.eye(n)
    norm = np.linalg.norm(Hstar)
    if norm > 0:
        v = Hstar / norm - np.eye(n)[0]
        if np.linalg.norm(v) > 1e-15:
            Q = np.eye(n) - 2.0 * np.outer(v, v) / (v @ v)
            # the reflection has det -1; the last row is orthogonal to H, so flipping it keeps Q H fixed
            Q[-1] = -Q[-1]
    return Q


def slices_from_b(b, Hstar) -> SliceStats:
    """Slices of b in a frame whose first normal direction is parallel to H"""
    b = np.asarray(getattr(b, 'b', b), dtype=float)
    Q = alignment_rotation(Hstar)
    rotated = np.einsum('ma,ib,jc,abc->mij', Q, Q, Q, b, optimize=True)
    rotated = 0.5 * (rotated + np.swapaxes(rotated, 1, 2))
    S_star = np.sum(rotated ** 2, axis=(1, 2))
    lam = np.linalg.eigvalsh(rotated[0])
    return SliceStats(MatrixFamily(rotated), S_star, lam, float(np.sum(lam ** 2)))
