"""
Finite-difference gradient verification

Both checks compare reverse-mode gradients with central differences
(f(x + eps) - f(x - eps)) / (2 eps) and report the largest relative error
|a - n| / max(1e-8, |a| + |n|) over the checked coordinates.
"""

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from camoflow.autograd.module import Parameter
from camoflow.autograd.tensor import Tensor, no_grad, precision
from camoflow.exceptions import NumericError, StateError

RELATIVE_FLOOR = 1e-8


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(RELATIVE_FLOOR, abs(analytic) + abs(numeric))


def _scalar(value: Tensor, where: str) -> float:
    if value.size != 1:
        raise StateError(f"{where}: function must return a scalar, got shape {value.shape}")
    result = float(value.data.reshape(-1)[0])
    if not np.isfinite(result):
        raise NumericError(f"{where}: function value is not finite ({result})")
    return result


def _sample(size: int, max_elements: Optional[int], rng: Optional[np.random.Generator]) -> np.ndarray:
    if max_elements is None or max_elements >= size:
        return np.arange(size)
    rng = rng if rng is not None else np.random.default_rng(0)
    return np.sort(rng.choice(size, size=max_elements, replace=False))


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    eps: float = 1e-4,
    max_elements: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Maximum relative error between backward() and central differences

    The check runs in double precision regardless of x's dtype.

    Args:
        f: Deterministic scalar-valued function of one tensor
        x: Point to check at
        eps: Finite-difference step
        max_elements: Check only this many randomly chosen coordinates
        rng: Generator used for coordinate sampling

    Returns:
        Max relative error over the checked elements

    Raises:
        NumericError: If f evaluates to a non-finite value

    Example:
        >>> grad_check(lambda t: (t * t).sum(), Tensor([1.0, 2.0]))
    """
    base = np.array(x.data, dtype=np.float64)
    with precision(np.float64):
        point = Tensor(base.copy(), requires_grad=True)
        value = f(point)
        _scalar(value, 'grad_check')
        value.backward()
        analytic = point.grad if point.grad is not None else np.zeros_like(base)

        worst = 0.0
        flat = base.reshape(-1)
        for index in _sample(flat.size, max_elements, rng):
            plus = flat.copy()
            minus = flat.copy()
            plus[index] += eps
            minus[index] -= eps
            with no_grad():
                f_plus = _scalar(f(Tensor(plus.reshape(base.shape))), 'grad_check')
                f_minus = _scalar(f(Tensor(minus.reshape(base.shape))), 'grad_check')
            numeric = (f_plus - f_minus) / (2.0 * eps)
            worst = max(worst, relative_error(float(analytic.reshape(-1)[index]), numeric))
    return worst


def check_parameters(
    f: Callable[[], Tensor],
    params: Sequence[Parameter],
    eps: float = 1e-4,
    samples: int = 6,
    rng: Optional[np.random.Generator] = None,
    min_gradient: float = 0.0,
) -> Tuple[float, int]:
    """
    Central-difference check of model parameters, perturbed in place

    Parameters should already be float64. Coordinates are drawn uniformly
    from the concatenation of all parameters; when min_gradient is set,
    coordinates whose analytic gradient is smaller are skipped unless no
    coordinate clears the bar.

    Args:
        f: Closure evaluating the scalar objective from the current parameters
        params: Parameters to check
        eps: Finite-difference step
        samples: Number of coordinates to check
        rng: Generator used for sampling
        min_gradient: Magnitude below which coordinates are not preferred

    Returns:
        (max relative error, number of coordinates checked)
    """
    if not params:
        raise StateError("check_parameters: no parameters to check")
    rng = rng if rng is not None else np.random.default_rng(0)

    for param in params:
        param.data = np.ascontiguousarray(param.data)
        param.grad = None
    value = f()
    _scalar(value, 'check_parameters')
    value.backward()

    coordinates: List[Tuple[Parameter, int, float]] = []
    for param in params:
        grad = param.grad if param.grad is not None else np.zeros(param.shape)
        for index, g in enumerate(grad.reshape(-1)):
            coordinates.append((param, index, float(g)))

    preferred = [c for c in coordinates if abs(c[2]) >= min_gradient] if min_gradient > 0 else coordinates
    pool = preferred or coordinates
    chosen = rng.choice(len(pool), size=min(samples, len(pool)), replace=False)

    worst = 0.0
    with no_grad():
        for position in sorted(chosen):
            param, index, analytic = pool[position]
            flat = param.data.reshape(-1)
            original = flat[index]
            flat[index] = original + eps
            f_plus = _scalar(f(), 'check_parameters')
            flat[index] = original - eps
            f_minus = _scalar(f(), 'check_parameters')
            flat[index] = original
            numeric = (f_plus - f_minus) / (2.0 * eps)
            worst = max(worst, relative_error(analytic, numeric))
    for param in params:
        param.grad = None
    return worst, len(chosen)
