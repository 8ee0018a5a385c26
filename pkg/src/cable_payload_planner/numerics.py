# Copyright (c) 2024 cable-payload-planner authors
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

"""
Small numerical helpers shared by the collision checker and the optimizer.
"""
from __future__ import annotations
from typing import Callable, Tuple
import math

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = 1.0 - _INV_PHI


def golden_section(
    func: Callable[[float], float], lower: float, upper: float, evals: int
) -> Tuple[float, float]:
    """
    Golden-section search for the minimum of a unimodal function.

    :param func: Function to minimize
    :param lower: Lower end of the bracket
    :param upper: Upper end of the bracket
    :param evals: Total number of function evaluations, at least 2
    :return: Best argument evaluated and its function value
    """
    assert evals >= 2, 'Golden-section search needs at least two evaluations'
    assert upper >= lower, 'Empty bracket'

    width = upper - lower
    x_c = lower + _INV_PHI2 * width
    x_d = lower + _INV_PHI * width
    f_c = func(x_c)
    f_d = func(x_d)
    best = (x_c, f_c) if f_c <= f_d else (x_d, f_d)

    for _ in range(evals - 2):
        if f_c <= f_d:
            upper = x_d
            x_d, f_d = x_c, f_c
            width = upper - lower
            x_c = lower + _INV_PHI2 * width
            f_c = func(x_c)
            candidate = (x_c, f_c)
        else:
            lower = x_c
            x_c, f_c = x_d, f_d
            width = upper - lower
            x_d = lower + _INV_PHI * width
            f_d = func(x_d)
            candidate = (x_d, f_d)
        # Non-finite values never win
        if candidate[1] < best[1] or not math.isfinite(best[1]):
            best = candidate

    return best
