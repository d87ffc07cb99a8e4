from __future__ import annotations

import math
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from scipy import fft as sfft

from rimflow.common.errors import SymmetryError
from rimflow.spectral.models import (
    REALITY_TOL,
    GridField,
    Lattice,
    SpectralField,
    conjugacy_defect,
    get_lattice,
)

# relative l-asymmetry above which a transform result is treated as corrupted
EVENNESS_TOL = 1e-10


# ---------------------------------------------------------------------------
# array kernels: coefficient stacks of shape (..., 2K+1, L+1)
# ---------------------------------------------------------------------------


def unfold(c: np.ndarray) -> np.ndarray:
    """Half lattice -> full signed-l lattice (..., 2K+1, 2L+1)."""
    return np.concatenate([c[..., :, :0:-1], c], axis=-1)


def fold(full: np.ndarray, L: int, check: bool = True) -> np.ndarray:
    half = full[..., L:]
    mirror = full[..., L::-1]
    if check:
        scale = float(np.max(np.abs(full))) if full.size else 0.0
        if scale > 0.0:
            defect = float(np.max(np.abs(half - mirror))) / scale
            if defect > EVENNESS_TOL:
                raise SymmetryError(f"field is not even in zeta: relative asymmetry {defect:.3e}")
    return 0.5 * (half + mirror)


def symmetrize_real(c: np.ndarray, check: bool = True, what: str = "field", scale: float = 0.0) -> np.ndarray:
    """
    Project onto c(-k, l) = conj c(k, l).

    The defect is measured against max(max |c|, scale); derived quantities
    that cancel to rounding level pass the scale of their inputs.
    """
    if check:
        defect = conjugacy_defect(c, scale)
        if defect > REALITY_TOL:
            raise SymmetryError(f"{what}: relative conjugacy defect {defect:.3e}")
    return 0.5 * (c + np.conj(c[..., ::-1, :]))


def _mode_indices(K: int, L: int, n1: int, n2: int) -> Tuple[np.ndarray, np.ndarray]:
    ki = (np.arange(-K, K + 1) % n1)[:, None]
    li = (np.arange(-L, L + 1) % n2)[None, :]
    return ki, li


def full_to_grid(full: np.ndarray, K: int, L: int, n1: int, n2: int) -> np.ndarray:
    ki, li = _mode_indices(K, L, n1, n2)
    arr = np.zeros(full.shape[:-2] + (n1, n2), dtype=complex)
    arr[..., ki, li] = full
    return sfft.ifft2(arr, axes=(-2, -1)) * (n1 * n2)


def grid_to_full(values: np.ndarray, K: int, L: int) -> np.ndarray:
    n1, n2 = values.shape[-2:]
    ki, li = _mode_indices(K, L, n1, n2)
    spec = sfft.fft2(values, axes=(-2, -1)) / (n1 * n2)
    return spec[..., ki, li]


def to_grid(c: np.ndarray, lat: Lattice) -> np.ndarray:
    return full_to_grid(unfold(c), lat.K, lat.L, lat.n_theta, lat.n_zeta)


def from_grid(values: np.ndarray, lat: Lattice) -> np.ndarray:
    return fold(grid_to_full(values, lat.K, lat.L), lat.L)


def gradient_full(c: np.ndarray, lat: Lattice) -> Tuple[np.ndarray, np.ndarray]:
    full = unfold(c)
    return 1j * lat.k * full, 1j * lat.scale * lat.l_full * full


def divergence_full(g_theta: np.ndarray, g_zeta: np.ndarray, lat: Lattice) -> np.ndarray:
    return fold(1j * lat.k * g_theta + 1j * lat.scale * lat.l_full * g_zeta, lat.L)


def mobility_kernel(u: np.ndarray, v: np.ndarray, lat: Lattice) -> np.ndarray:
    """
    div_l(u grad_l(lap_l v + v)) on coefficient stacks.

    u and v broadcast against each other, so a single mobility can be
    applied to a whole batch of basis modes at once.
    """
    gt, gz = gradient_full((1.0 - lat.q2) * v, lat)
    ug = to_grid(u, lat)
    n1, n2 = lat.n_theta, lat.n_zeta
    ft = grid_to_full(ug * full_to_grid(gt, lat.K, lat.L, n1, n2), lat.K, lat.L)
    fz = grid_to_full(ug * full_to_grid(gz, lat.K, lat.L, n1, n2), lat.K, lat.L)
    out = divergence_full(ft, fz, lat)
    out[..., lat.K, 0] = 0.0
    return out


def product_kernel(*factors: np.ndarray, lat: Lattice) -> np.ndarray:
    values = to_grid(factors[0], lat)
    for f in factors[1:]:
        values = values * to_grid(f, lat)
    return from_grid(values, lat)


def shift_kernel(c: np.ndarray, n: int) -> np.ndarray:
    """Multiply by e^{i n theta}: c(k) -> c(k - n), truncated."""
    out = np.zeros_like(c)
    size = c.shape[-2]
    if n >= 0:
        out[..., n:, :] = c[..., : size - n, :]
    else:
        out[..., : size + n, :] = c[..., -n:, :]
    return out


def conj_kernel(c: np.ndarray) -> np.ndarray:
    return np.conj(c[..., ::-1, :])


def _product_scale(*arrays: np.ndarray) -> float:
    return float(np.prod([np.max(np.abs(a)) for a in arrays]))


def _finish(c: np.ndarray, lat: Lattice, real: bool, what: str, scale: float = 0.0) -> SpectralField:
    if real:
        c = symmetrize_real(c, what=what, scale=scale)
    return SpectralField.wrap(c, lat, real=real)


def _pair(u: SpectralField, v: SpectralField) -> Lattice:
    lat = u.lattice
    if not lat.same_as(v.lattice):
        raise ValueError(f"lattice mismatch: {u!r} vs {v!r}")
    return lat


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def make_field(coeffs: np.ndarray, K: int, L: int, ell: float, real: bool = True) -> SpectralField:
    return SpectralField.wrap(coeffs, get_lattice(K, L, ell), real=real)


def zeros(K: int, L: int, ell: float, real: bool = True) -> SpectralField:
    lat = get_lattice(K, L, ell)
    return SpectralField.wrap(np.zeros(lat.shape, dtype=complex), lat, real=real)


def constant(m: float, K: int, L: int, ell: float) -> SpectralField:
    lat = get_lattice(K, L, ell)
    c = np.zeros(lat.shape, dtype=complex)
    c[lat.K, 0] = m
    return SpectralField.wrap(c, lat)


def from_modes(
    modes: Dict[Tuple[int, int], complex], K: int, L: int, ell: float, real: bool = True
) -> SpectralField:
    """
    Build a field from full-lattice coefficients {(k, l): c}.

    Negative l is folded onto |l|. For real fields the conjugate partner
    (-k, l) is filled in unless it is given explicitly.
    """
    lat = get_lattice(K, L, ell)
    c = np.zeros(lat.shape, dtype=complex)
    given = set()
    for (k, l), value in modes.items():
        c[lat.index(k, l)] = value
        given.add((k, abs(l)))
    if real:
        for (k, l) in list(given):
            if (-k, l) not in given:
                c[lat.index(-k, l)] = np.conj(c[lat.index(k, l)])
    return SpectralField.wrap(c, lat, real=real)


def random_field(
    K: int,
    L: int,
    ell: float,
    rng: np.random.Generator,
    decay: float = 2.0,
    amplitude: float = 1.0,
    exclude: Iterable[Tuple[int, int]] = (),
    real: bool = True,
) -> SpectralField:
    lat = get_lattice(K, L, ell)
    c = rng.normal(size=lat.shape) + 1j * rng.normal(size=lat.shape)
    c *= amplitude / (1.0 + lat.k**2 + lat.l**2) ** (decay / 2.0)
    for k, l in exclude:
        c[lat.index(k, l)] = 0.0
        c[lat.index(-k, l)] = 0.0
    if real:
        c = 0.5 * (c + conj_kernel(c))
    return SpectralField.wrap(c, lat, real=real)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def analyze(g: GridField, K: int, L: int, ell: float) -> SpectralField:
    if g.n_theta < 2 * (2 * K + 1) or g.n_zeta < 2 * (2 * L + 1):
        raise ValueError(f"grid {g.n_theta}x{g.n_zeta} too small to dealias K={K}, L={L}")
    lat = get_lattice(K, L, ell)
    c = fold(grid_to_full(g.values.astype(complex), K, L), L)
    return _finish(c, lat, real=True, what="analyze")


def synthesize(f: SpectralField, n_theta: Optional[int] = None, n_zeta: Optional[int] = None) -> GridField:
    lat = f.lattice
    n1 = n_theta or lat.n_theta
    n2 = n_zeta or lat.n_zeta
    if n1 < 2 * lat.K + 2 or n2 < 2 * lat.L + 2:
        raise ValueError(f"grid {n1}x{n2} too small for K={lat.K}, L={lat.L}")
    if not f.real:
        raise ValueError("synthesize expects a real field; use grid_values for complex fields")
    values = full_to_grid(unfold(f.coeffs), lat.K, lat.L, n1, n2)
    return GridField(values=values.real.copy())


def grid_values(f: SpectralField) -> np.ndarray:
    """Values on the product grid; real array for real fields."""
    values = to_grid(f.coeffs, f.lattice)
    return values.real if f.real else values


def min_on_grid(f: SpectralField) -> float:
    return float(np.min(grid_values(f)))


# ---------------------------------------------------------------------------
# linear operators
# ---------------------------------------------------------------------------


def laplacian_ell(f: SpectralField) -> SpectralField:
    return f.like(-f.lattice.q2 * f.coeffs)


def gradient_ell(f: SpectralField) -> Tuple[np.ndarray, np.ndarray]:
    return gradient_full(f.coeffs, f.lattice)


def divergence_ell(g_theta: np.ndarray, g_zeta: np.ndarray, lat: Lattice, real: bool = True) -> SpectralField:
    return _finish(divergence_full(g_theta, g_zeta, lat), lat, real, "divergence_ell")


def d_theta(f: SpectralField) -> SpectralField:
    return f.like(1j * f.lattice.k * f.coeffs)


def shift_theta(f: SpectralField, n: int) -> SpectralField:
    return f.like(shift_kernel(f.coeffs, n), real=False if n else f.real)


def conj_field(f: SpectralField) -> SpectralField:
    return f.like(conj_kernel(f.coeffs))


def real_part_violation(f: SpectralField) -> float:
    return conjugacy_defect(f.coeffs)


# ---------------------------------------------------------------------------
# nonlinear operators
# ---------------------------------------------------------------------------


def mobility_apply(u: SpectralField, v: SpectralField) -> SpectralField:
    lat = _pair(u, v)
    return _finish(
        mobility_kernel(u.coeffs, v.coeffs, lat),
        lat,
        u.real and v.real,
        "mobility_apply",
        scale=_product_scale(u.coeffs, v.coeffs),
    )


def multiply(*fields: SpectralField) -> SpectralField:
    lat = fields[0].lattice
    for f in fields[1:]:
        _pair(fields[0], f)
    real = all(f.real for f in fields)
    coeffs = [f.coeffs for f in fields]
    return _finish(product_kernel(*coeffs, lat=lat), lat, real, "multiply", scale=_product_scale(*coeffs))


def cube(f: SpectralField) -> SpectralField:
    return multiply(f, f, f)


# ---------------------------------------------------------------------------
# projections, norms, energy
# ---------------------------------------------------------------------------


def p1_mask(lat: Lattice) -> np.ndarray:
    mask = np.zeros(lat.shape, dtype=bool)
    mask[lat.index(1, 0)] = True
    mask[lat.index(-1, 0)] = True
    if lat.is_critical_length():
        mask[lat.index(0, 1)] = True
    return mask


def pgeq2_mask(lat: Lattice) -> np.ndarray:
    mask = ~p1_mask(lat)
    mask[lat.index(0, 0)] = False
    return mask


def project_P1(f: SpectralField) -> SpectralField:
    return f.like(np.where(p1_mask(f.lattice), f.coeffs, 0.0))


def project_Pgeq2(f: SpectralField) -> SpectralField:
    return f.like(np.where(pgeq2_mask(f.lattice), f.coeffs, 0.0))


def p1_coordinates(f: SpectralField) -> Tuple[complex, float]:
    a1 = f.coeff(1, 0)
    b = 2.0 * f.coeff(0, 1).real if f.lattice.is_critical_length() else 0.0
    return a1, b


def _weighted_sum(c: np.ndarray, weight: np.ndarray, lat: Lattice) -> float:
    return float(np.sum(lat.multiplicity * weight * np.abs(c) ** 2))


def sobolev_norm(f: SpectralField, s: float) -> float:
    if s < 0:
        raise ValueError("s must be nonnegative")
    lat = f.lattice
    return math.sqrt(_weighted_sum(f.coeffs, (1.0 + lat.k**2 + lat.l**2) ** s, lat))


def homogeneous_norm(f: SpectralField, s: float) -> float:
    if s < 0:
        raise ValueError("s must be nonnegative")
    lat = f.lattice
    weight = (lat.k**2 + lat.l**2) ** s
    weight[lat.index(0, 0)] = 0.0
    return math.sqrt(_weighted_sum(f.coeffs, weight, lat))


def l2_norm(f: SpectralField) -> float:
    return sobolev_norm(f, 0.0)


def energy(f: SpectralField) -> float:
    lat = f.lattice
    weight = 0.5 * (lat.q2 - 1.0)
    weight[lat.index(0, 0)] = 0.0
    return _weighted_sum(f.coeffs, weight, lat)


def manifold_distance(f: SpectralField) -> float:
    return sobolev_norm(project_Pgeq2(f), 1.0)


def norm_equivalence_ratio(f: SpectralField) -> float:
    """||grad_l(lap_l f + f)||_{H^1} / ||f||_{H^4}."""
    lat = f.lattice
    gt, gz = gradient_full((1.0 - lat.q2) * f.coeffs, lat)
    weight = 1.0 + lat.k**2 + lat.l_full**2
    top = math.sqrt(float(np.sum(weight * (np.abs(gt) ** 2 + np.abs(gz) ** 2))))
    bottom = sobolev_norm(f, 4.0)
    return top / bottom if bottom > 0 else 0.0


# ---------------------------------------------------------------------------
# dense operators by basis application
# ---------------------------------------------------------------------------


def mode_mask(lat: Lattice, exclude: Iterable[Tuple[int, int]] = ()) -> np.ndarray:
    mask = np.ones(lat.shape, dtype=bool)
    for k, l in exclude:
        mask[lat.index(k, l)] = False
    return mask


def assemble_matrix(apply, lat: Lattice, mask: np.ndarray, chunk: int = 128) -> np.ndarray:
    """
    Dense matrix of a linear coefficient map restricted to the modes in mask.

    apply takes a batch (B, 2K+1, L+1) of complex coefficient arrays and
    returns a batch of the same shape. Columns are unit coefficients on the
    half lattice, ordered like coeffs[mask].
    """
    idx = np.flatnonzero(mask.ravel())
    n = idx.size
    out = np.empty((n, n), dtype=complex)
    for start in range(0, n, chunk):
        cols = idx[start : start + chunk]
        basis = np.zeros((cols.size, lat.size), dtype=complex)
        basis[np.arange(cols.size), cols] = 1.0
        image = apply(basis.reshape((cols.size,) + lat.shape))
        out[:, start : start + cols.size] = image.reshape(cols.size, lat.size)[:, idx].T
    return out


def scatter(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    c = np.zeros(mask.shape, dtype=complex)
    c[mask] = values
    return c
