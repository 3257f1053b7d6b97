"""Query-efficient black-box attack in wavelet-packet coefficient space.

One run walks orthogonal coefficient directions inside a chosen set of
frequency bands: sample a band from an adaptive probability table, draw n
unused coordinates, try a +epsilon then a -epsilon step (short-circuit on
the first strict confidence drop), accumulate accepted steps, and stop
when the predicted label flips or the query budget runs out.  Because the
transform is orthonormal, no two proposed directions can cancel.

A "pixel-baseline" mode runs the identical loop over the identity pixel
basis for SimBA-style comparisons.
"""

from dataclasses import dataclass

import numpy as np

from .core import clip01
from .metrics import compute_pair_metrics
from .oracle import OracleError, predicted_label
from .wavelet import (
    BandTree,
    decompose_image,
    get_filter,
    reconstruct_image,
    validate_band_path,
)

PIXEL_BAND = "pixels"
MODES = ("frequency", "pixel-baseline")

DEFAULT_BANDS = ("aaa", "daa", "dad")


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 1.5  # coefficient-space step
    n_coords: int = 4  # coordinates per direction
    bands: tuple = DEFAULT_BANDS
    depth: int = 3
    filter_name: str = "haar"
    max_queries: int = 5000
    gamma: float = 10.0  # weight reward per unit confidence drop
    beta: float = 0.9  # weight decay on discarded steps
    w_min: float = 0.05  # exploration floor
    mode: str = "frequency"

    def __post_init__(self):
        if self.epsilon <= 0 or self.n_coords < 1 or self.max_queries < 1:
            raise ValueError("epsilon, n_coords and max_queries must be positive")
        if not self.bands or len(set(self.bands)) != len(self.bands):
            raise ValueError("bands must be nonempty and pairwise distinct")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.gamma <= 0 or not 0 < self.beta < 1 or self.w_min <= 0:
            raise ValueError("invalid probability-update parameters")


class AllBandsExhausted(Exception):
    """Every selected band has run out of unused coordinates."""


class AttackInterrupted(Exception):
    """An oracle failure aborted the run; partial state is attached."""

    def __init__(self, partial_result):
        super().__init__("attack interrupted by oracle failure")
        self.partial_result = partial_result


@dataclass
class Direction:
    """One candidate perturbation: n distinct coefficient coordinates in a
    band, stepped by alpha in {+eps, -eps, 0}."""

    band: str
    coords: np.ndarray  # flat row-major indices into the band array
    alpha: float = 0.0


@dataclass
class AcceptedStep:
    band: str
    coords: tuple
    alpha: float


@dataclass
class AttackResult:
    success: bool
    x_adv: np.ndarray
    queries: int
    status: str  # success | budget-exhausted | coordinates-exhausted | transport-error
    accepted: list
    final_confidence: float
    initial_confidence: float
    delta: dict  # band -> accumulated coefficient perturbation
    trace: list
    initially_misclassified: bool = False
    metrics: object = None


class BandSampler:
    """Adaptive band weights plus the used-coordinate bookkeeping that
    guarantees no (band, coordinate) pair is proposed twice."""

    def __init__(self, band_sizes, gamma, beta, w_min):
        self.gamma = gamma
        self.beta = beta
        self.w_min = w_min
        self.band_order = tuple(band_sizes)
        self.weights = {b: 1.0 for b in band_sizes}
        self._unused = {b: np.arange(size, dtype=np.int64) for b, size in band_sizes.items()}

    def available_bands(self):
        return [b for b in self.band_order if self._unused[b].size > 0]

    def exhausted(self):
        return not self.available_bands()

    def unused(self, band):
        return self._unused[band]

    def mark_used(self, band, coords):
        self._unused[band] = np.setdiff1d(self._unused[band], coords, assume_unique=True)

    def sampling_probs(self):
        bands = self.available_bands()
        w = np.array([self.weights[b] for b in bands])
        return bands, w / w.sum()


def propose_direction(sampler, cfg, rng):
    """Draw a band proportionally to its weight among non-exhausted bands,
    then min(n, remaining) distinct unused coordinates uniformly.  The
    coordinates are only retired later, when the step resolves."""
    bands, probs = sampler.sampling_probs()
    if not bands:
        raise AllBandsExhausted()
    band = bands[int(rng.choice(len(bands), p=probs))]
    unused = sampler.unused(band)
    m = min(cfg.n_coords, unused.size)
    coords = np.sort(rng.choice(unused, size=m, replace=False))
    return Direction(band=band, coords=coords)


def update_probabilities(sampler, band, confidence_drop):
    """Accepted step (drop > 0): additive reward gamma * drop.  Discarded
    step: multiplicative decay with a floor at w_min."""
    if confidence_drop > 0.0:
        sampler.weights[band] += sampler.gamma * confidence_drop
    else:
        sampler.weights[band] = max(sampler.beta * sampler.weights[band], sampler.w_min)


def apply_step(layout, base_tree, delta, direction, filt):
    """Candidate image clip01(reconstruct(base + delta + alpha * q)).

    base_tree is never mutated; bands untouched by delta/direction are
    shared by reference.
    """
    bands = dict(base_tree.bands)
    for path, d in delta.items():
        bands[path] = base_tree.bands[path] + d
    if direction is not None and direction.alpha != 0.0:
        path = direction.band
        size = int(np.prod(layout.band_shapes[path]))
        if np.any(direction.coords < 0) or np.any(direction.coords >= size):
            raise ValueError(f"direction coordinates out of range for band {path!r}")
        if path not in delta:
            bands[path] = bands[path].copy()
        bands[path].flat[direction.coords] += direction.alpha
    tree = BandTree(base_tree.depth, base_tree.filter_name, base_tree.image_shape, bands)
    return clip01(reconstruct_image(tree, filt))


class _FrequencySpace:
    def __init__(self, x, cfg):
        self.filt = get_filter(cfg.filter_name)
        for b in cfg.bands:
            validate_band_path(b, cfg.depth)
        self.base = decompose_image(x, self.filt, cfg.depth)
        self.layout = self.base.layout
        self.band_shapes = {b: self.layout.band_shapes[b] for b in cfg.bands}

    def render(self, delta, direction=None):
        return apply_step(self.layout, self.base, delta, direction, self.filt)


class _PixelSpace:
    def __init__(self, x, cfg):
        self.x = np.asarray(x, dtype=np.float64)
        self.band_shapes = {PIXEL_BAND: self.x.shape}

    def render(self, delta, direction=None):
        img = self.x + delta[PIXEL_BAND]
        if direction is not None and direction.alpha != 0.0:
            img = img.copy()
            img.flat[direction.coords] += direction.alpha
        return clip01(img)


def _make_space(x, cfg):
    if cfg.mode == "frequency":
        return _FrequencySpace(x, cfg)
    return _PixelSpace(x, cfg)


def _result(**kw):
    x, x_adv = kw.pop("x"), kw["x_adv"]
    res = AttackResult(**kw)
    h, w = x.shape[0], x.shape[1]
    if res.queries > 0 and h >= 11 and w >= 11:
        res.metrics = compute_pair_metrics(x, x_adv)
    return res


def run_attack(x, y, oracle, cfg, rng):
    """Attack one image (Algorithm-1 loop).  The caller is expected to
    feed initially correctly classified inputs; if the very first query
    already mispredicts, the run returns immediately with the input flagged
    ``initially_misclassified``.

    Every oracle call costs one query, including the initial confidence
    check; the budget covers them all.
    """
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= y < oracle.classes:
        raise ValueError(f"label {y} outside [0, {oracle.classes})")
    trace = []

    def partial(status, queries, x_adv, accepted, delta, p0, p):
        return _result(
            success=False,
            x=x,
            x_adv=x_adv,
            queries=queries,
            status=status,
            accepted=accepted,
            final_confidence=p,
            initial_confidence=p0,
            delta=delta,
            trace=trace,
        )

    try:
        probs = oracle.query(x)
    except OracleError as exc:
        raise AttackInterrupted(partial("transport-error", 0, x.copy(), [], {}, float("nan"), float("nan"))) from exc
    queries = 1
    p = float(probs[y])
    p0 = p
    if predicted_label(probs) != y:
        res = _result(
            success=True,
            x=x,
            x_adv=x.copy(),
            queries=queries,
            status="success",
            accepted=[],
            final_confidence=p,
            initial_confidence=p0,
            delta={},
            trace=trace,
            initially_misclassified=True,
        )
        return res

    space = _make_space(x, cfg)
    sampler = BandSampler(
        {b: int(np.prod(s)) for b, s in space.band_shapes.items()},
        cfg.gamma,
        cfg.beta,
        cfg.w_min,
    )
    delta = {b: np.zeros(s) for b, s in space.band_shapes.items()}
    accepted = []
    x_adv = x.copy()
    success = False
    status = "budget-exhausted"
    iteration = 0

    while queries < cfg.max_queries:
        if sampler.exhausted():
            status = "coordinates-exhausted"
            break
        iteration += 1
        direction = propose_direction(sampler, cfg, rng)
        accepted_this = False
        budget_hit = False
        for alpha in (cfg.epsilon, -cfg.epsilon):
            if queries >= cfg.max_queries:
                budget_hit = True
                break
            direction.alpha = alpha
            candidate = space.render(delta, direction)
            try:
                probs_t = oracle.query(candidate)
            except OracleError as exc:
                raise AttackInterrupted(
                    partial("transport-error", queries, x_adv, accepted, delta, p0, p)
                ) from exc
            queries += 1
            p_new = float(probs_t[y])
            is_accept = p_new < p
            trace.append(
                {
                    "iteration": iteration,
                    "band": direction.band,
                    "coords": [int(c) for c in direction.coords],
                    "alpha": float(alpha),
                    "confidence": p_new,
                    "accepted": bool(is_accept),
                    "queries": queries,
                }
            )
            if is_accept:
                delta[direction.band].flat[direction.coords] += alpha
                accepted.append(
                    AcceptedStep(direction.band, tuple(int(c) for c in direction.coords), float(alpha))
                )
                drop = p - p_new
                p = p_new
                x_adv = candidate
                update_probabilities(sampler, direction.band, drop)
                accepted_this = True
                if predicted_label(probs_t) != y:
                    success = True
                break
        if accepted_this or not budget_hit:
            sampler.mark_used(direction.band, direction.coords)
            if not accepted_this:
                update_probabilities(sampler, direction.band, 0.0)
        if success:
            status = "success"
            break

    return _result(
        success=success,
        x=x,
        x_adv=x_adv,
        queries=queries,
        status=status,
        accepted=accepted,
        final_confidence=p,
        initial_confidence=p0,
        delta=delta,
        trace=trace,
    )


def write_trace(path, result):
    """Per-run trace as JSON lines; replayable for the accumulation
    invariant (delta equals the sum of accepted alpha * q)."""
    import json

    with open(path, "w") as fh:
        for entry in result.trace:
            fh.write(json.dumps(entry) + "\n")


def read_trace(path):
    import json

    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
