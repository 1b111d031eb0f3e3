"""Simulation of discretely sampled Levy processes and their true Levy densities.

The observation model is a Levy process X sampled on a regular grid with
spacing delta over a horizon t_n = n*delta; the data are the n increments
Y_i = X_{i*delta} - X_{(i-1)*delta}.  Two process families are provided:

* variance gamma: Brownian motion with drift mu and volatility sigma run at
  an independent gamma clock with variance rate nu.  Increments are drawn
  exactly from the subordinated representation
  U_i ~ Gamma(shape=delta/nu, scale=nu),  Y_i | U_i ~ N(mu*U_i, sigma^2*U_i).
* compound Poisson: Poisson(rate*delta) jump counts per increment with iid
  jump sizes from a configurable distribution.

Generation is counter based: increment block b (a fixed span of 2**20
indices) is produced by a Philox generator keyed on (seed, b).  The stream
is therefore reproducible increment-by-increment, independent of how many
blocks are materialized at once, and safe to generate in parallel.
"""

from __future__ import annotations

import math
import os
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    InputParseError,
    ParameterError,
    RangeError,
    ResourceGuardError,
)

# Fixed RNG block span.  Block b covers increment indices [b*BLOCK, (b+1)*BLOCK).
BLOCK = 1 << 20

# Refuse to materialize series larger than this; stream instead.
MATERIALIZE_LIMIT = 1 << 27


def worker_count() -> int:
    """Worker cap for block-parallel generation, from LEVY_GIBBS_THREADS (default 1)."""
    raw = os.environ.get("LEVY_GIBBS_THREADS", "1")
    try:
        w = int(raw)
    except ValueError as exc:
        raise ParameterError(f"LEVY_GIBBS_THREADS must be an integer, got {raw!r}") from exc
    if w < 1:
        raise ParameterError(f"LEVY_GIBBS_THREADS must be >= 1, got {w}")
    return w


@dataclass(frozen=True)
class SamplingScheme:
    """Regular sampling grid: n increments with spacing delta, horizon t_n = n*delta.

    t_n may be passed explicitly for round-trip fidelity; it must then agree
    with n*delta to within one floating-point rounding.
    """

    delta: float
    n: int
    t_n: float = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        if not (math.isfinite(self.delta) and self.delta > 0.0):
            raise ParameterError(f"delta must be positive and finite, got {self.delta!r}")
        horizon = self.n * self.delta
        if not math.isfinite(horizon):
            raise RangeError(f"horizon n*delta overflows: n={self.n}, delta={self.delta}")
        if self.t_n is None:
            object.__setattr__(self, "t_n", horizon)
        elif abs(self.t_n - horizon) > math.ulp(horizon):
            raise ParameterError(
                f"t_n={self.t_n!r} disagrees with n*delta={horizon!r} beyond one ulp"
            )

    @property
    def num_blocks(self) -> int:
        return (self.n + BLOCK - 1) // BLOCK


@dataclass(frozen=True)
class VarianceGammaParams:
    """Variance gamma parameters: drift mu, volatility sigma >= 0, gamma variance rate nu > 0."""

    mu: float
    sigma: float
    nu: float

    def __post_init__(self) -> None:
        for name in ("mu", "sigma", "nu"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.sigma < 0.0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma!r}")
        if self.nu <= 0.0:
            raise ParameterError(f"nu must be > 0, got {self.nu!r}")


@dataclass(frozen=True)
class JumpDistribution:
    """Jump-size distribution handle for the compound Poisson family.

    Supported kinds: "point" (all jumps equal to c), "normal" (mean, sd),
    "uniform" (lo, hi), "exponential" (mean).  The string form used by the
    CLI is "kind:p1[,p2]", e.g. "normal:0,1".
    """

    kind: str
    params: tuple[float, ...]

    _ARITY = {"point": 1, "normal": 2, "uniform": 2, "exponential": 1}

    def __post_init__(self) -> None:
        if self.kind not in self._ARITY:
            raise ParameterError(
                f"unknown jump distribution {self.kind!r}; expected one of {sorted(self._ARITY)}"
            )
        if len(self.params) != self._ARITY[self.kind]:
            raise ParameterError(
                f"jump distribution {self.kind!r} takes {self._ARITY[self.kind]} "
                f"parameter(s), got {self.params!r}"
            )
        if any(not math.isfinite(p) for p in self.params):
            raise ParameterError(f"jump parameters must be finite, got {self.params!r}")
        if self.kind == "normal" and self.params[1] < 0.0:
            raise ParameterError(f"normal jump sd must be >= 0, got {self.params[1]!r}")
        if self.kind == "uniform" and self.params[0] >= self.params[1]:
            raise ParameterError(f"uniform jump bounds must satisfy lo < hi, got {self.params!r}")
        if self.kind == "exponential" and self.params[0] <= 0.0:
            raise ParameterError(f"exponential jump mean must be > 0, got {self.params[0]!r}")

    @classmethod
    def point(cls, c: float) -> "JumpDistribution":
        return cls("point", (float(c),))

    @classmethod
    def normal(cls, mean: float, sd: float) -> "JumpDistribution":
        return cls("normal", (float(mean), float(sd)))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "JumpDistribution":
        return cls("uniform", (float(lo), float(hi)))

    @classmethod
    def exponential(cls, mean: float) -> "JumpDistribution":
        return cls("exponential", (float(mean),))

    @classmethod
    def parse(cls, text: str) -> "JumpDistribution":
        kind, _, rest = text.partition(":")
        kind = kind.strip()
        if kind not in cls._ARITY:
            raise InputParseError(
                f"unknown jump distribution {kind!r}; expected one of {sorted(cls._ARITY)}"
            )
        try:
            params = tuple(float(tok) for tok in rest.split(",")) if rest else ()
        except ValueError as exc:
            raise InputParseError(f"could not parse jump parameters from {text!r}") from exc
        try:
            return cls(kind, params)
        except ParameterError as exc:
            raise InputParseError(str(exc)) from exc

    def spec(self) -> str:
        return self.kind + ":" + ",".join(repr(p) for p in self.params)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "point":
            return np.full(size, self.params[0])
        if self.kind == "normal":
            return self.params[0] + self.params[1] * rng.standard_normal(size)
        if self.kind == "uniform":
            return rng.uniform(self.params[0], self.params[1], size)
        return rng.exponential(self.params[0], size)


@dataclass(frozen=True)
class CompoundPoissonParams:
    """Compound Poisson parameters: jump rate > 0 and a jump-size distribution."""

    rate: float
    jumps: JumpDistribution

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rate) and self.rate > 0.0):
            raise ParameterError(f"rate must be positive and finite, got {self.rate!r}")


class IncrementSeries:
    """Increment data Y_1..Y_n together with the sampling scheme that produced them.

    The series is either materialized (one ndarray of length n) or streamed
    (blocks generated on demand from a block function).  Both forms yield the
    same BLOCK-sized chunks in the same order, so any chunk-folding consumer
    produces bit-identical results on either representation.
    """

    def __init__(
        self,
        scheme: SamplingScheme,
        seed: int | None,
        values: np.ndarray | None = None,
        block_fn: Callable[[int], np.ndarray] | None = None,
    ) -> None:
        if (values is None) == (block_fn is None):
            raise ParameterError("exactly one of values/block_fn must be given")
        if values is not None:
            values = np.ascontiguousarray(values, dtype=float)
            if values.ndim != 1 or values.shape[0] != scheme.n:
                raise ParameterError(
                    f"values must be a 1-d array of length n={scheme.n}, got shape {values.shape}"
                )
        self.scheme = scheme
        self.seed = seed
        self._values = values
        self._block_fn = block_fn

    @property
    def materialized(self) -> bool:
        return self._values is not None

    @property
    def values(self) -> np.ndarray:
        """Full increment array; materializes (and caches) a streamed series."""
        if self._values is None:
            n = self.scheme.n
            if n > MATERIALIZE_LIMIT:
                raise ResourceGuardError(
                    f"refusing to materialize {n} increments "
                    f"(limit {MATERIALIZE_LIMIT}); iterate chunks instead"
                )
            self._values = np.concatenate(list(self.iter_chunks()))
        return self._values

    def __len__(self) -> int:
        return self.scheme.n

    def iter_chunks(self) -> Iterator[np.ndarray]:
        """Yield the series as BLOCK-sized chunks (last one shorter) in index order."""
        if self._values is not None:
            for start in range(0, self.scheme.n, BLOCK):
                yield self._values[start : start + BLOCK]
        else:
            for b in range(self.scheme.num_blocks):
                yield self._block_fn(b)

    def map_blocks(
        self, fn: Callable[[np.ndarray], object], max_workers: int | None = None
    ) -> list:
        """Apply fn to every chunk, in index order, optionally in parallel.

        Results are returned in block order regardless of worker scheduling,
        so reductions over the list are deterministic.
        """
        workers = worker_count() if max_workers is None else max_workers
        if workers <= 1:
            return [fn(chunk) for chunk in self.iter_chunks()]
        if self._values is not None:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(fn, self.iter_chunks()))

        def job(b: int):
            return fn(self._block_fn(b))

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, range(self.scheme.num_blocks)))


def _block_rng(seed: int, block: int) -> np.random.Generator:
    """Philox generator for one block, keyed on (seed, block index)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _block_bounds(scheme: SamplingScheme, block: int) -> tuple[int, int]:
    lo = block * BLOCK
    return lo, min(scheme.n, lo + BLOCK)


def _vg_block(params: VarianceGammaParams, scheme: SamplingScheme, seed: int, block: int) -> np.ndarray:
    lo, hi = _block_bounds(scheme, block)
    rng = _block_rng(seed, block)
    # Exact subordinated draw; numpy's gamma sampler is valid for shape < 1,
    # which is the relevant regime (shape = delta/nu is tiny at high frequency).
    u = rng.gamma(scheme.delta / params.nu, params.nu, size=hi - lo)
    z = rng.standard_normal(hi - lo)
    return params.mu * u + params.sigma * np.sqrt(u) * z


def _cp_block(params: CompoundPoissonParams, scheme: SamplingScheme, seed: int, block: int) -> np.ndarray:
    lo, hi = _block_bounds(scheme, block)
    m = hi - lo
    rng = _block_rng(seed, block)
    counts = rng.poisson(params.rate * scheme.delta, size=m)
    if params.jumps.kind == "point":
        # Summing k copies of c is exactly k*c here; keeps increments exact multiples.
        return counts * params.jumps.params[0]
    total = int(counts.sum())
    if total == 0:
        return np.zeros(m)
    sizes = params.jumps.sample(rng, total)
    owners = np.repeat(np.arange(m), counts)
    return np.bincount(owners, weights=sizes, minlength=m)


def _simulate(
    scheme: SamplingScheme,
    seed: int,
    block_fn: Callable[[int], np.ndarray],
    materialize: bool,
) -> IncrementSeries:
    if not materialize:
        return IncrementSeries(scheme, seed, block_fn=block_fn)
    if scheme.n > MATERIALIZE_LIMIT:
        raise ResourceGuardError(
            f"n={scheme.n} exceeds the materialization limit {MATERIALIZE_LIMIT}; "
            "pass materialize=False and consume the series in chunks"
        )
    streamed = IncrementSeries(scheme, seed, block_fn=block_fn)
    chunks = streamed.map_blocks(lambda c: c)
    return IncrementSeries(scheme, seed, values=np.concatenate(chunks))


def simulate_vg(
    params: VarianceGammaParams,
    scheme: SamplingScheme,
    seed: int,
    materialize: bool = True,
) -> IncrementSeries:
    """Simulate variance gamma increments under the given scheme.

    With materialize=False the returned series generates blocks lazily and
    can be iterated repeatedly; the values are identical either way.
    """
    return _simulate(scheme, seed, lambda b: _vg_block(params, scheme, seed, b), materialize)


def simulate_compound_poisson(
    params: CompoundPoissonParams,
    scheme: SamplingScheme,
    seed: int,
    materialize: bool = True,
) -> IncrementSeries:
    """Simulate compound Poisson increments under the given scheme."""
    return _simulate(scheme, seed, lambda b: _cp_block(params, scheme, seed, b), materialize)


@dataclass(frozen=True)
class TrueLevyDensity:
    """Evaluatable true Levy density psi(x), defined for x != 0.

    Instances are callable and vectorized.  `family` tags the construction
    ("variance-gamma", "custom"); `params` echoes the generating parameters.
    """

    family: str
    params: dict
    _eval: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, x) -> np.ndarray | float:
        arr = np.asarray(x, dtype=float)
        if np.any(arr == 0.0):
            raise DomainError("Levy density is not defined at x = 0")
        out = self._eval(arr)
        if arr.ndim == 0:
            return float(out)
        return out

    @classmethod
    def custom(cls, fn: Callable[[np.ndarray], np.ndarray], params: dict | None = None) -> "TrueLevyDensity":
        return cls("custom", dict(params or {}), fn)


def true_density_vg(params: VarianceGammaParams, decaying: bool = False) -> TrueLevyDensity:
    """Variance gamma Levy density with exponent scales eta+/- from (mu, sigma, nu).

    The two-sided form is nu^{-1} |x|^{-1} exp(x/eta+) for x > 0 and
    nu^{-1} |x|^{-1} exp(x/eta-) for x < 0, with
    eta+- = sqrt(mu^2 nu^2 / 4 + sigma^2 nu / 2) +- mu nu / 2.  As written the
    positive branch grows in x; decaying=True flips that branch's exponent so
    both tails decay away from the origin (the convention under which the
    density of the simulated process is integrable on windows to the right
    of 0).  The default evaluates the form exactly as written.
    """
    root = math.sqrt(params.mu**2 * params.nu**2 / 4.0 + params.sigma**2 * params.nu / 2.0)
    eta_pos = root + params.mu * params.nu / 2.0
    eta_neg = root - params.mu * params.nu / 2.0
    if eta_pos <= 0.0 or eta_neg <= 0.0:
        raise ParameterError(
            f"exponent scales must be positive, got eta+={eta_pos!r}, eta-={eta_neg!r}"
        )
    inv_nu = 1.0 / params.nu
    pos_sign = -1.0 if decaying else 1.0

    def evaluate(x: np.ndarray) -> np.ndarray:
        expo = np.where(x > 0.0, pos_sign * x / eta_pos, x / eta_neg)
        return inv_nu / np.abs(x) * np.exp(expo)

    meta = {
        "mu": params.mu,
        "sigma": params.sigma,
        "nu": params.nu,
        "eta_pos": eta_pos,
        "eta_neg": eta_neg,
        "decaying": decaying,
    }
    return TrueLevyDensity("variance-gamma", meta, evaluate)


# ---------------------------------------------------------------------------
# Increment file format: optional header "# delta=<r> n=<d> seed=<d>", then one
# increment per line printed with 17 significant digits (lossless round trip).
# ---------------------------------------------------------------------------


def write_increments(path, series: IncrementSeries, header: bool = True) -> None:
    """Write a series to a text file, one increment per line."""
    with open(path, "w", encoding="ascii") as fh:
        if header:
            seed = series.seed if series.seed is not None else ""
            fh.write(f"# delta={series.scheme.delta:.17g} n={series.scheme.n} seed={seed}\n")
        for chunk in series.iter_chunks():
            fh.write("\n".join(f"{v:.17g}" for v in chunk))
            fh.write("\n")


def read_increments(path, delta: float | None = None) -> IncrementSeries:
    """Read increments written by :func:`write_increments` (or any one-float-per-line file).

    The header, when present, supplies delta/n/seed; otherwise delta must be
    passed and n is the line count.  Malformed content raises
    :class:`InputParseError` naming the offending line.
    """
    header_delta = header_n = header_seed = None
    values: list[float] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                if lineno == 1:
                    header_delta, header_n, header_seed = _parse_header(text, lineno)
                continue
            try:
                values.append(float(text))
            except ValueError as exc:
                raise InputParseError(f"{path}: line {lineno}: not a number: {text!r}") from exc
    if header_delta is not None:
        delta = header_delta
    if delta is None:
        raise InputParseError(f"{path}: no header and no delta supplied; sampling spacing unknown")
    if header_n is not None and header_n != len(values):
        raise InputParseError(
            f"{path}: header declares n={header_n} but file has {len(values)} increments"
        )
    if not values:
        raise InputParseError(f"{path}: no increments found")
    scheme = SamplingScheme(delta, len(values))
    return IncrementSeries(scheme, header_seed, values=np.asarray(values))


def _parse_header(text: str, lineno: int) -> tuple[float, int, int | None]:
    fields = {}
    for tok in text.lstrip("#").split():
        key, _, val = tok.partition("=")
        fields[key] = val
    try:
        delta = float(fields["delta"])
        n = int(fields["n"])
        seed = int(fields["seed"]) if fields.get("seed") else None
    except (KeyError, ValueError) as exc:
        raise InputParseError(f"line {lineno}: malformed header: {text!r}") from exc
    return delta, n, seed
