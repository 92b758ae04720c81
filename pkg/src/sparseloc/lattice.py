"""Lattice geometry: cubes in Z^nu, site enumeration, sparse site sets.

Distances are always max-norm, so cubes are the metric balls.  Sparse
sets are built so that the cube-counting cap

    |S intersect Lambda| <= ceil(|Lambda|^alpha)

holds on every sub-cube centered at the generation center, not just in
expectation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import site_uniforms

Site = tuple[int, ...]

# streams for counter-based draws (disorder sampling uses its own tags)
_TAG_SHELL_COUNT = 101
_TAG_SHELL_PLACE = 102
_TAG_SITE_BERNOULLI = 103

_ENUMERATION_GUARD = 2_000_000


def max_norm(site: Site, center: Site | None = None) -> int:
    if center is None:
        return max(abs(c) for c in site) if site else 0
    return max(abs(a - b) for a, b in zip(site, center))


@dataclass(frozen=True)
class Cube:
    """Cube of sites ``center +/- half_side`` along every axis."""

    center: Site
    half_side: int

    def __post_init__(self):
        if len(self.center) < 1:
            raise ValueError("dimension must be >= 1")
        if self.half_side < 0:
            raise ValueError("half_side must be >= 0")
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def side(self) -> int:
        return 2 * self.half_side + 1

    @property
    def volume(self) -> int:
        return self.side ** self.dim

    def contains(self, site: Site) -> bool:
        return len(site) == self.dim and max_norm(site, self.center) <= self.half_side


def cube_sites(cube: Cube) -> list[Site]:
    """All sites of the cube in lexicographic coordinate order."""
    if cube.volume > _ENUMERATION_GUARD:
        raise ValueError(
            f"refusing to enumerate {cube.volume} sites "
            f"(guard {_ENUMERATION_GUARD}); use arithmetic indexing instead"
        )
    ranges = [range(c - cube.half_side, c + cube.half_side + 1) for c in cube.center]
    return list(itertools.product(*ranges))


def cap_for(volume: int, alpha: float) -> int:
    """ceil(volume^alpha) with a snap against float misrounding."""
    v = math.pow(float(volume), alpha)
    r = round(v)
    if abs(v - r) <= 1e-9 * max(1.0, abs(v)):
        return int(r)
    return int(math.ceil(v))


@dataclass(frozen=True)
class SparseSet:
    """Explicit sparse site set with its claimed cap exponent.

    ``alpha`` is the claimed exponent; generated sets certify the cap on
    all centered sub-cubes by construction, explicit lists may violate
    it (sparseness_profile reports the failures).
    """

    sites: tuple[Site, ...]
    alpha: float
    generator: str
    seed: int
    dim: int
    cube: Cube | None = field(default=None, compare=False)

    def __post_init__(self):
        ordered = tuple(sorted(set(tuple(int(c) for c in s) for s in self.sites)))
        object.__setattr__(self, "sites", ordered)
        for s in ordered:
            if len(s) != self.dim:
                raise ValueError(f"site {s} has dimension {len(s)}, expected {self.dim}")
        object.__setattr__(self, "_member", frozenset(ordered))

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, site) -> bool:
        return tuple(site) in self._member

    def coords_array(self) -> np.ndarray:
        if not self.sites:
            return np.zeros((0, self.dim), dtype=np.int64)
        return np.asarray(self.sites, dtype=np.int64)


def sparse_set_from_sites(sites, alpha: float, dim: int, seed: int = 0) -> SparseSet:
    """Wrap an explicit site list; no cap is enforced here."""
    _check_alpha(alpha)
    return SparseSet(tuple(tuple(s) for s in sites), alpha, "explicit_list", seed, dim)


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def _shell_size(r: int, dim: int) -> int:
    if r == 0:
        return 1
    return (2 * r + 1) ** dim - (2 * r - 1) ** dim


def _shell_radii(alpha: float, dim: int, half_side: int) -> list[int]:
    """Geometrically spaced shell radii floor(rho^j), rho = 2^(1/(nu*alpha))."""
    rho = 2.0 ** (1.0 / (dim * alpha))
    radii: set[int] = set()
    j = 0
    while True:
        r = int(math.floor(rho ** j))
        if r > half_side:
            break
        if r >= 1:
            radii.add(r)
        j += 1
        if j > 4096:
            break
    return sorted(radii)


def _axis_shell_sites(center: Site, r: int, budget: int) -> list[Site]:
    """Up to ``budget`` sites on the shell, one per axis direction."""
    out = []
    dim = len(center)
    for i in range(dim):
        for sign in (1, -1):
            if len(out) >= budget:
                return out
            site = list(center)
            site[i] += sign * r
            out.append(tuple(site))
    return out


def _binomial_icdf(u: float, n: int, p: float) -> int:
    """Inverse CDF of Binomial(n, p); exact pmf recurrence, no RNG state."""
    if p <= 0.0 or n == 0:
        return 0
    if p >= 1.0:
        return n
    log_q = math.log1p(-p)
    pmf = math.exp(n * log_q)
    cdf = pmf
    k = 0
    ratio = p / (1.0 - p)
    kmax = min(n, int(n * p + 12.0 * math.sqrt(n * p * (1 - p)) + 25))
    while cdf < u and k < kmax:
        pmf *= (n - k) / (k + 1) * ratio
        k += 1
        cdf += pmf
    return k


def _enumerate_shell(center: Site, r: int) -> list[Site]:
    if r == 0:
        return [center]
    inner = r - 1
    out = []
    for site in cube_sites(Cube(center, r)):
        if max_norm(site, center) > inner:
            out.append(site)
    return out


def _bernoulli_small_shell(center, r, p, seed) -> list[Site]:
    shell = _enumerate_shell(center, r)
    coords = np.asarray(shell, dtype=np.int64)
    u = site_uniforms(seed, _TAG_SITE_BERNOULLI, r, coords)
    return [s for s, ui in zip(shell, u) if ui < p]


def _bernoulli_large_shell(center, r, p, seed, dim, budget: int) -> list[Site]:
    n_shell = _shell_size(r, dim)
    u_count = site_uniforms(seed, _TAG_SHELL_COUNT, r, np.array([[0]], dtype=np.int64))
    k = min(_binomial_icdf(float(u_count[0]), n_shell, p), budget)
    if k <= 0:
        return []
    # uniform placement on the shell by rejection from the enclosing cube
    chosen: set[Site] = set()
    attempt = 0
    max_attempts = 512 * (k + 4)
    side = 2 * r + 1
    while len(chosen) < k and attempt < max_attempts:
        batch = 256
        keys = np.array(
            [[attempt + i, j] for i in range(batch) for j in range(dim)],
            dtype=np.int64,
        )
        u = site_uniforms(seed, _TAG_SHELL_PLACE, r, keys).reshape(batch, dim)
        offs = np.floor(u * side).astype(np.int64) - r
        for row in offs:
            if len(chosen) >= k:
                break
            if np.max(np.abs(row)) == r:
                site = tuple(int(c) + cc for c, cc in zip(row, center))
                chosen.add(site)
        attempt += batch
    return sorted(chosen)


def generate_sparse_set(alpha: float, cube: Cube, generator: str, seed: int) -> SparseSet:
    """Generate a sparse set satisfying the cap on all centered sub-cubes.

    deterministic_powers ignores the seed: sites sit on geometrically
    spaced shells, spread over axis directions, never exceeding the
    running cap.  bernoulli_thinned includes shell sites independently
    with probability min(1, (2r)^(nu*(alpha-1))) and is then hard-capped
    in radius order.
    """
    _check_alpha(alpha)
    dim = cube.dim

    def cap_at(r: int) -> int:
        return cap_for((2 * r + 1) ** dim, alpha)

    sites: list[Site] = []
    count = 0
    if cap_at(0) >= 1:
        sites.append(cube.center)
        count = 1

    if generator == "deterministic_powers":
        for r in _shell_radii(alpha, dim, cube.half_side):
            budget = min(2 * dim, cap_at(r) - count)
            if budget <= 0:
                continue
            new = _axis_shell_sites(cube.center, r, budget)
            sites.extend(new)
            count += len(new)
    elif generator == "bernoulli_thinned":
        for r in range(1, cube.half_side + 1):
            allowed = cap_at(r) - count
            if allowed <= 0:
                continue
            p = min(1.0, (2.0 * r) ** (dim * (alpha - 1.0)))
            if _shell_size(r, dim) <= 1024:
                cand = sorted(_bernoulli_small_shell(cube.center, r, p, seed))
            else:
                cand = _bernoulli_large_shell(cube.center, r, p, seed, dim, allowed)
            kept = cand[:allowed]
            sites.extend(kept)
            count += len(kept)
    else:
        raise ValueError(
            f"unknown generator {generator!r}; expected deterministic_powers or bernoulli_thinned"
        )
    return SparseSet(tuple(sites), alpha, generator, seed, dim, cube=cube)


@dataclass(frozen=True)
class ProfileRow:
    volume: int
    count: int
    cap: int
    passed: bool


def sparseness_profile(sparse: SparseSet, cubes: list[Cube]) -> list[ProfileRow]:
    """Cap check |S intersect Lambda| <= ceil(|Lambda|^alpha) per cube."""
    if not cubes:
        raise ValueError("cubes must be nonempty")
    rows = []
    for cube in cubes:
        count = sum(1 for s in sparse.sites if cube.contains(s))
        cap = cap_for(cube.volume, sparse.alpha)
        rows.append(ProfileRow(cube.volume, count, cap, count <= cap))
    return rows


def centered_subcubes(cube: Cube, dyadic_only: bool = False) -> list[Cube]:
    """Sub-cubes centered at cube.center, all radii or dyadic radii only."""
    if dyadic_only:
        radii = [0]
        r = 1
        while r <= cube.half_side:
            radii.append(r)
            r *= 2
        if radii[-1] != cube.half_side:
            radii.append(cube.half_side)
    else:
        radii = list(range(cube.half_side + 1))
    return [Cube(cube.center, r) for r in radii]


def sparse_set_to_text(sparse: SparseSet) -> str:
    lines = [
        f"# alpha={sparse.alpha:.17g} generator={sparse.generator} "
        f"seed={sparse.seed} nu={sparse.dim}"
    ]
    for site in sparse.sites:
        lines.append(" ".join(str(c) for c in site))
    return "\n".join(lines) + "\n"


def sparse_set_from_text(text: str) -> SparseSet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing sparse-set header line")
    fields = dict(item.split("=", 1) for item in lines[0][1:].split())
    alpha = float(fields["alpha"])
    generator = fields["generator"]
    seed = int(fields["seed"])
    dim = int(fields["nu"])
    sites = []
    for ln in lines[1:]:
        coords = tuple(int(tok) for tok in ln.split())
        if len(coords) != dim:
            raise ValueError(f"site line {ln!r} does not match nu={dim}")
        sites.append(coords)
    return SparseSet(tuple(sites), alpha, generator, seed, dim)
