"""
Gaussian scale space: sampled Gaussian derivative kernels, reflective
convolution and the second-order N-jet of a patch.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError, UnsupportedOrderError
from .models import DEFAULT_DERIVATIVES, DERIVATIVE_ORDERS, Kernel2D, NJetResponse

DEFAULT_SIGMAS: tuple[float, ...] = (1.0, 2.0, math.sqrt(7.0))
DEFAULT_TRUNCATION = 4.0
BOUNDARY_MODES = ("mirror", "reflect", "wrap")


def _gaussian_profile(sigma: float, order: int, radius: int) -> np.ndarray:
    q = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (q / sigma) ** 2) / (math.sqrt(2.0 * math.pi) * sigma)
    if order == 0:
        return g / g.sum()
    if order == 1:
        h = -q / sigma**2 * g
        return h / -np.sum(q * h)
    # order 2: Hermite form plus the Gaussian multiple that zeroes the sum
    h = (q**2 / sigma**4 - 1.0 / sigma**2) * g
    h = h - g * (h.sum() / g.sum())
    return h / (0.5 * np.sum(q**2 * h))


def gaussian_derivative_kernel(
    sigma: float,
    order_x: int,
    order_y: int,
    truncation: float = DEFAULT_TRUNCATION,
) -> Kernel2D:
    """
    Separable sampled Gaussian derivative kernel of order (order_x, order_y).

    The 1D profiles are moment-normalized: order 0 sums to one, order 1
    returns slope 1 on a unit ramp, order 2 sums to zero and returns 1 on
    x**2 / 2. The support radius is ceil(truncation * sigma), at least 1.
    """
    if not sigma > 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    if not truncation > 0:
        raise InvalidArgumentError(f"truncation must be positive, got {truncation}")
    if order_x < 0 or order_y < 0:
        raise InvalidArgumentError("derivative orders must be nonnegative")
    if order_x + order_y > 2:
        raise UnsupportedOrderError(
            f"combined order {order_x + order_y} > 2 is not supported"
        )

    radius = max(1, math.ceil(truncation * sigma))
    profile_x = _gaussian_profile(sigma, order_x, radius)
    profile_y = _gaussian_profile(sigma, order_y, radius)
    return Kernel2D(
        values=np.outer(profile_y, profile_x),
        sigma=float(sigma),
        order_x=order_x,
        order_y=order_y,
        profile_x=profile_x,
        profile_y=profile_y,
    )


def convolve_reflective(
    patch: np.ndarray,
    kernel: Kernel2D,
    boundary: str = "mirror",
) -> np.ndarray:
    """
    Convolve a patch (or a stack of patches along axis 0) with `kernel`.

    Out-of-range indices are mirrored about the edge pixel without
    repeating it (``d c b | a b c d``); folding repeats when the kernel is
    wider than the patch. Runs as two 1D passes over the separable factors.
    """
    data = np.asarray(patch, dtype=np.float64)
    if data.ndim < 2 or data.size == 0:
        raise InvalidArgumentError("patch must be a nonempty 2D array")
    if boundary not in BOUNDARY_MODES:
        raise InvalidArgumentError(f"unknown boundary mode {boundary!r}")

    row_axis, col_axis = data.ndim - 2, data.ndim - 1
    out = ndimage.convolve1d(data, kernel.profile_x, axis=col_axis, mode=boundary)
    return ndimage.convolve1d(out, kernel.profile_y, axis=row_axis, mode=boundary)


def kernel_bank(
    sigmas: Sequence[float],
    derivatives: Iterable[str] = DEFAULT_DERIVATIVES,
    truncation: float = DEFAULT_TRUNCATION,
) -> dict[tuple[str, int], Kernel2D]:
    bank: dict[tuple[str, int], Kernel2D] = {}
    for derivative_id in derivatives:
        if derivative_id not in DERIVATIVE_ORDERS:
            raise InvalidArgumentError(f"unknown derivative {derivative_id!r}")
        order_x, order_y = DERIVATIVE_ORDERS[derivative_id]
        for scale_index, sigma in enumerate(sigmas):
            bank[(derivative_id, scale_index)] = gaussian_derivative_kernel(
                sigma, order_x, order_y, truncation
            )
    return bank


def _check_sigmas(sigmas: Sequence[float]) -> None:
    if len(sigmas) == 0:
        raise InvalidArgumentError("at least one scale is required")
    if any(not s > 0 for s in sigmas):
        raise InvalidArgumentError("sigmas must be positive")
    if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise InvalidArgumentError("sigmas must be strictly increasing")


def compute_njet(
    patch: np.ndarray,
    sigmas: Sequence[float] = DEFAULT_SIGMAS,
    max_order: int = 2,
    derivatives: Sequence[str] = DEFAULT_DERIVATIVES,
    truncation: float = DEFAULT_TRUNCATION,
    boundary: str = "mirror",
) -> NJetResponse:
    """
    N-jet up to second order at every scale.

    `patch` may also be a stack (n, H, W); each response then keeps the
    stack shape and every slice is the N-jet of the matching patch.
    """
    if max_order != 2:
        raise UnsupportedOrderError(f"only max_order=2 is supported, got {max_order}")
    _check_sigmas(sigmas)

    bank = kernel_bank(sigmas, derivatives, truncation)
    responses = {
        key: convolve_reflective(patch, kernel, boundary) for key, kernel in bank.items()
    }
    return NJetResponse(
        responses=responses,
        sigmas=tuple(float(s) for s in sigmas),
        derivatives=tuple(derivatives),
    )


def steer_first_order(Lx: np.ndarray, Ly: np.ndarray, theta: float) -> np.ndarray:
    """Directional first derivative cos(theta) * Lx + sin(theta) * Ly."""
    Lx = np.asarray(Lx, dtype=np.float64)
    Ly = np.asarray(Ly, dtype=np.float64)
    if Lx.shape != Ly.shape:
        raise InvalidArgumentError(f"Lx {Lx.shape} and Ly {Ly.shape} differ in shape")
    return math.cos(theta) * Lx + math.sin(theta) * Ly
