"""Point interaction on the real line.

The domain condition is ``phi'(0+) - phi'(0-) = alpha phi(0)`` with
continuity at 0.  Two constructions of the generalised eigenfunctions are
provided: the closed formula as printed (``psi_k_paper``) and a
scattering solution built from the matching conditions (``psi_k_oracle``),
which is the reference for the jump condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .exceptions import InvalidArgumentError

_NORM = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class PointInteractionModel:
    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise InvalidArgumentError("alpha must be finite")


def _check_k(k: float) -> None:
    if k == 0 or not np.isfinite(k):
        raise InvalidArgumentError(f"k must be finite and nonzero, got {k}")


def printed_prefactor(model: PointInteractionModel, k: float) -> float:
    _check_k(k)
    return float(np.sqrt(4 * k * k / (2 * np.pi * (model.alpha ** 2 + 4 * k * k))))


def psi_k_paper(model: PointInteractionModel, k: float, x):
    """Printed closed formula, taken literally with ``sign(0) = 0``."""
    n = printed_prefactor(model, k)
    x = np.asarray(x, dtype=float)
    jump = (np.sign(x) + np.sign(k)) / 2
    return n * (np.exp(1j * k * x) + jump * np.sin(k * x) / k)


def psi_k_paper_derivative(model: PointInteractionModel, k: float, x, side: int = 0):
    """Analytic derivative; ``side = +-1`` selects the one-sided branch at 0."""
    n = printed_prefactor(model, k)
    x = np.asarray(x, dtype=float)
    sx = np.where(x == 0, side, np.sign(x))
    jump = (sx + np.sign(k)) / 2
    return n * (1j * k * np.exp(1j * k * x) + jump * np.cos(k * x))


def scattering_amplitude(model: PointInteractionModel, k: float) -> complex:
    """``c`` in ``e^{ikx} + c e^{ik|x|}``, fixed by the jump ``2ikc = alpha (1 + c)``."""
    _check_k(k)
    return model.alpha / (2j * k - model.alpha)


def psi_k_oracle(model: PointInteractionModel, k: float, x):
    c = scattering_amplitude(model, k)
    x = np.asarray(x, dtype=float)
    return _NORM * (np.exp(1j * k * x) + c * np.exp(1j * k * np.abs(x)))


def psi_k_oracle_derivative(model: PointInteractionModel, k: float, x, side: int = 0):
    c = scattering_amplitude(model, k)
    x = np.asarray(x, dtype=float)
    sx = np.where(x == 0, side, np.sign(x))
    return _NORM * 1j * k * (np.exp(1j * k * x) + c * sx * np.exp(1j * k * np.abs(x)))


def psi_k_oracle_second_derivative(model: PointInteractionModel, k: float, x):
    """Term-by-term derivative of :func:`psi_k_oracle_derivative`; valid for ``x != 0``."""
    c = scattering_amplitude(model, k)
    x = np.asarray(x, dtype=float)
    sx = np.sign(x)
    ik = 1j * k
    return _NORM * (ik * ik * np.exp(ik * x) + c * (ik * sx) ** 2 * np.exp(ik * np.abs(x)))


def jump_defect(model: PointInteractionModel, k: float, which: str = "oracle") -> float:
    """``|Psi'(0+) - Psi'(0-) - alpha Psi(0)|`` for either construction."""
    if which == "oracle":
        f, df = psi_k_oracle, psi_k_oracle_derivative
    elif which == "paper":
        f, df = psi_k_paper, psi_k_paper_derivative
    else:
        raise InvalidArgumentError(f"unknown construction {which!r}")
    d = df(model, k, 0.0, side=1) - df(model, k, 0.0, side=-1)
    return float(abs(d - model.alpha * f(model, k, 0.0)))


def _branch(model: PointInteractionModel, k: float, which: str, side: int):
    """The smooth expression used on ``side * x > 0``, as a function of x."""
    if which == "oracle":
        c = scattering_amplitude(model, k)
        return lambda x: _NORM * (np.exp(1j * k * x) + c * np.exp(1j * side * k * x))
    if which == "paper":
        n = printed_prefactor(model, k)
        jump = (side + np.sign(k)) / 2
        return lambda x: n * (np.exp(1j * k * x) + jump * np.sin(k * x) / k)
    raise InvalidArgumentError(f"unknown construction {which!r}")


def continuity_defect(model: PointInteractionModel, k: float, which: str = "oracle") -> float:
    """``|Psi(0+) - Psi(0-)|`` from the two branch expressions."""
    return float(abs(_branch(model, k, which, 1)(0.0) - _branch(model, k, which, -1)(0.0)))


def eigen_equation_defect(model: PointInteractionModel, k: float, x) -> float:
    """``max |Psi'' + k^2 Psi|`` over nonzero sample points."""
    x = np.asarray(x, dtype=float)
    x = x[x != 0]
    r = psi_k_oracle_second_derivative(model, k, x) + k * k * psi_k_oracle(model, k, x)
    return float(np.max(np.abs(r))) if len(x) else 0.0


@dataclass(frozen=True)
class ComparisonReport:
    alpha: float
    k: float
    continuity_defect: float
    jump_defect: float
    max_deviation: float
    phase: float


def compare_formula_to_oracle(model: PointInteractionModel, k: float, sample_points) -> ComparisonReport:
    """How far the printed formula is from the matching solution.

    The deviation is ``max |printed - e^{i gamma} oracle|`` minimised over the
    global phase ``gamma``.  Nothing here is asserted; it is a report.
    """
    x = np.asarray(sample_points, dtype=float)
    p = psi_k_paper(model, k, x)
    o = psi_k_oracle(model, k, x)

    def dev(g):
        return float(np.max(np.abs(p - np.exp(1j * g) * o))) if len(x) else 0.0

    grid = np.linspace(-np.pi, np.pi, 721)
    g0 = grid[int(np.argmin([dev(g) for g in grid]))]
    step = grid[1] - grid[0]
    res = scipy.optimize.minimize_scalar(dev, bounds=(g0 - step, g0 + step), method="bounded")
    g = float(res.x) if res.fun <= dev(g0) else float(g0)
    return ComparisonReport(
        float(model.alpha), float(k),
        continuity_defect(model, k, "paper"),
        jump_defect(model, k, "paper"),
        dev(g),
        float(np.angle(np.exp(1j * g))),
    )


def bound_state_report(model: PointInteractionModel) -> dict[str, object]:
    """Where ``c(k)`` has its pole and whether the profile there decays.

    The pole sits at ``k = -i alpha / 2``; ``e^{ik|x|}`` then behaves like
    ``e^{alpha |x| / 2}``, which decays only for ``alpha < 0``.
    """
    a = float(model.alpha)
    return {
        "pole_k": complex(0.0, -a / 2),
        "normalizable": a < 0,
        "energy": -a * a / 4 if a < 0 else None,
    }


__all__ = [
    "PointInteractionModel",
    "ComparisonReport",
    "printed_prefactor",
    "psi_k_paper",
    "psi_k_paper_derivative",
    "psi_k_oracle",
    "psi_k_oracle_derivative",
    "psi_k_oracle_second_derivative",
    "scattering_amplitude",
    "jump_defect",
    "continuity_defect",
    "eigen_equation_defect",
    "compare_formula_to_oracle",
    "bound_state_report",
]
