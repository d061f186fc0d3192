"""Adaptive tensor Gauss-Legendre quadrature over rectangles.

Every panel is integrated with an ``order``-point tensor rule and compared
with the sum over its four quadrants; the panel with the largest discrepancy
is split next. The reported value sums the quadrant estimates of the active
panels in creation order, so results do not depend on heap ordering.
"""

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from plapbranch.models.errors import QuadratureBudgetError, ValidationError
from plapbranch.models.results import QuadResult

logger = logging.getLogger("plapbranch.quadrature")

Integrand = Callable[[np.ndarray, np.ndarray], np.ndarray]

DEFAULT_ORDER = 8
DEFAULT_BUDGET = 20_000_000


@lru_cache(maxsize=16)
def _rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _tensor(fn: Integrand, boxes: np.ndarray, order: int) -> np.ndarray:
    """Tensor-rule integrals over a stack of boxes (k, 4) = (x0, x1, y0, y1)."""
    z, w = _rule(order)
    x0, x1, y0, y1 = boxes.T
    hx = 0.5 * (x1 - x0)
    hy = 0.5 * (y1 - y0)
    # change from [-1,1] x [-1,1] to each box
    xs = (x0 + hx)[:, None, None] + hx[:, None, None] * z[None, :, None]
    ys = (y0 + hy)[:, None, None] + hy[:, None, None] * z[None, None, :]
    xs, ys = np.broadcast_arrays(xs, ys)
    values = np.asarray(fn(xs, ys), dtype=float)
    weight = w[:, None] * w[None, :]
    return np.einsum("kij,ij->k", values, weight) * hx * hy


def _quadrants(box: np.ndarray) -> np.ndarray:
    x0, x1, y0, y1 = box
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return np.array(
        [
            (x0, xm, y0, ym),
            (xm, x1, y0, ym),
            (x0, xm, ym, y1),
            (xm, x1, ym, y1),
        ]
    )


@dataclass(order=True)
class _Panel:
    priority: float
    index: int
    box: np.ndarray = field(compare=False)
    coarse: float = field(compare=False)
    fine: float = field(compare=False)

    @property
    def error(self) -> float:
        return abs(self.fine - self.coarse)


def adaptive_gauss_legendre(
    fn: Integrand,
    x_range: Tuple[float, float],
    y_range: Tuple[float, float],
    target_err: float,
    order: int = DEFAULT_ORDER,
    initial: int = 4,
    max_evaluations: int = DEFAULT_BUDGET,
) -> QuadResult:
    """Integrate fn over a rectangle until the summed panel error is below target_err.

    ``fn`` must accept broadcastable coordinate arrays. Raises
    QuadratureBudgetError when max_evaluations integrand values are used up
    first.
    """
    if not target_err > 0:
        raise ValidationError("target_err must be positive", field="target_err")
    if order < 2 or initial < 1:
        raise ValidationError("order must be >= 2 and initial >= 1", field="order")
    (xa, xb), (ya, yb) = x_range, y_range
    if not (xb > xa and yb > ya):
        raise ValidationError("integration ranges must be increasing", field="x_range")

    per_panel = 5 * order * order
    counter = itertools.count()
    evaluations = 0

    def make(boxes: np.ndarray) -> List[_Panel]:
        nonlocal evaluations
        children = np.concatenate([_quadrants(b) for b in boxes])
        coarse = _tensor(fn, boxes, order)
        fine = _tensor(fn, children, order).reshape(-1, 4).sum(axis=1)
        evaluations += per_panel * len(boxes)
        panels = []
        for box, c, f in zip(boxes, coarse, fine):
            err = abs(float(f) - float(c))
            panels.append(_Panel(-err, next(counter), box, float(c), float(f)))
        return panels

    xs = np.linspace(xa, xb, initial + 1)
    ys = np.linspace(ya, yb, initial + 1)
    start = np.array(
        [(xs[i], xs[i + 1], ys[j], ys[j + 1]) for i in range(initial) for j in range(initial)]
    )
    heap = make(start)
    heapq.heapify(heap)
    total_err = math.fsum(p.error for p in heap)

    while total_err > target_err:
        if evaluations + 4 * per_panel > max_evaluations:
            raise QuadratureBudgetError(target_err, total_err, evaluations)
        worst = heapq.heappop(heap)
        total_err -= worst.error
        for panel in make(_quadrants(worst.box)):
            heapq.heappush(heap, panel)
            total_err += panel.error
        if total_err <= target_err:
            # running sum drifts; confirm before stopping
            total_err = math.fsum(p.error for p in heap)

    panels = sorted(heap, key=lambda p: p.index)
    value = math.fsum(p.fine for p in panels)
    logger.debug(
        "Quadrature converged: %d panels, %d evaluations, error %.3e",
        len(panels),
        evaluations,
        total_err,
    )
    return QuadResult(
        value=value,
        err_estimate=total_err,
        evaluations=evaluations,
        panels=len(panels),
    )
