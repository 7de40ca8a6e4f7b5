"""Saturated log-linear decomposition via Möbius inversion on the subset lattice.

For a strictly positive probability table p over variables 0..n-1, the
log cells decompose as

    ln p(i) = sum over subsets A of tau_A(i_A),

where the interaction array tau_A is the Möbius inverse of the averaged
log-margins:

    ltilde_A(i_A) = mean over the complement coordinates of ln p(i),
    tau_A(i_A)    = sum over Z subset of A of (-1)^(|A|-|Z|) ltilde_Z(i_Z).

Internally every subset-indexed array keeps full rank with singleton axes on
the averaged-out variables, so the alternating sums are plain broadcasts.
Public accessors return squeezed arrays shaped over the subset's variables
in scheme order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import SchemeError, TableError
from .subsets import axes_of, mask_of, masks_by_size, popcount, submasks
from .tables import CategoricalScheme, ContingencyTable, SubsetSpec

DEFAULT_TAU_TOL = 1e-8
MAX_VARS = 20


def _require_probability(table: ContingencyTable) -> np.ndarray:
    if table.form != "probability":
        raise TableError("log-linear operations need a probability table")
    return np.log(table.cells)


def log_subset_means(logp: np.ndarray) -> dict[int, np.ndarray]:
    """ltilde for every subset mask, as keepdims arrays over the full shape."""
    n = logp.ndim
    if n > MAX_VARS:
        raise SchemeError(f"subset lattice over {n} variables exceeds the {MAX_VARS}-variable guard")
    means: dict[int, np.ndarray] = {}
    for mask in range(1 << n):
        comp = tuple(a for a in range(n) if not mask & (1 << a))
        means[mask] = logp.mean(axis=comp, keepdims=True) if comp else logp
    return means


def mobius_inverse(means: Mapping[int, np.ndarray], mask: int) -> np.ndarray:
    """Alternating subset sum sum_{Z<=mask} (-1)^(|mask|-|Z|) means[Z]."""
    size = popcount(mask)
    out: np.ndarray | None = None
    for sub in submasks(mask):
        term = means[sub] if (size - popcount(sub)) % 2 == 0 else -means[sub]
        out = term if out is None else out + term
    assert out is not None
    return out


def _squeeze(arr: np.ndarray, mask: int, n: int) -> np.ndarray:
    drop = tuple(a for a in range(n) if not mask & (1 << a))
    return np.squeeze(arr, axis=drop).copy() if drop else arr.copy()


@dataclass(frozen=True, eq=False)
class InteractionDecomposition:
    """All 2^n interaction arrays of a positive probability table.

    ``tau(subset)`` returns the interaction array shaped over the subset's
    variables in scheme order; the empty subset yields a 0-d array holding
    the grand mean of the log cells.
    """

    scheme: CategoricalScheme
    _tau: Mapping[int, np.ndarray]  # mask -> keepdims array

    def subsets(self) -> list[tuple[int, ...]]:
        return [axes_of(m) for m in masks_by_size(self.scheme.n)]

    def tau(self, subset: SubsetSpec) -> np.ndarray:
        mask = mask_of(self.scheme.resolve_subset(subset))
        return _squeeze(self._tau[mask], mask, self.scheme.n)

    def max_abs(self, subset: SubsetSpec) -> float:
        mask = mask_of(self.scheme.resolve_subset(subset))
        return float(np.max(np.abs(self._tau[mask])))

    def forward_tilde(self, subset: SubsetSpec) -> np.ndarray:
        """Reconstruct ltilde_A as sum of tau_Z over Z subset of A (inversion pair)."""
        mask = mask_of(self.scheme.resolve_subset(subset))
        out: np.ndarray | None = None
        for sub in submasks(mask):
            out = self._tau[sub] if out is None else out + self._tau[sub]
        assert out is not None
        return _squeeze(np.broadcast_to(out, _mask_shape(self.scheme.shape, mask)).copy(), mask, self.scheme.n)

    def reconstruct_log(self) -> np.ndarray:
        """Sum of every interaction array, cell by cell: should equal ln p."""
        out = np.zeros(self.scheme.shape)
        for arr in self._tau.values():
            out = out + arr
        return out

    def to_json_dict(self) -> dict:
        return {
            "subsets": [
                {
                    "vars": list(self.scheme.subset_names(axes_of(mask))),
                    "tau": [float(x) for x in self._tau[mask].reshape(-1)],
                }
                for mask in masks_by_size(self.scheme.n)
            ]
        }


def _mask_shape(shape: tuple[int, ...], mask: int) -> tuple[int, ...]:
    return tuple(m if mask & (1 << a) else 1 for a, m in enumerate(shape))


def tilde_l(table: ContingencyTable, subset: SubsetSpec) -> np.ndarray:
    """Mean of ln p over the complement coordinates, at each fixed i_A.

    The empty subset gives the grand mean of the log cells (0-d array); the
    full set gives ln p itself.
    """
    logp = _require_probability(table)
    axes = table.scheme.resolve_subset(subset)
    comp = tuple(a for a in range(table.scheme.n) if a not in axes)
    out = logp.mean(axis=comp) if comp else logp.copy()
    return np.asarray(out)


def interaction(table: ContingencyTable, subset: SubsetSpec) -> np.ndarray:
    """Single interaction array tau_A by alternating subset sum."""
    logp = _require_probability(table)
    mask = mask_of(table.scheme.resolve_subset(subset))
    means = log_subset_means(logp)  # small n; recomputing all is cheap
    return _squeeze(
        np.broadcast_to(
            mobius_inverse(means, mask), _mask_shape(table.scheme.shape, mask)
        ).copy(),
        mask,
        table.scheme.n,
    )


def decompose(table: ContingencyTable) -> InteractionDecomposition:
    """Full saturated decomposition: tau_A for all 2^n subsets A."""
    logp = _require_probability(table)
    means = log_subset_means(logp)
    tau = {mask: mobius_inverse(means, mask) for mask in range(1 << table.scheme.n)}
    return InteractionDecomposition(table.scheme, tau)


@dataclass(frozen=True)
class HierarchyVerdict:
    """is-hierarchical flag plus the offending (superset, vanished subset) pairs."""

    hierarchical: bool
    violations: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    tol: float


def is_hierarchical(
    dec: InteractionDecomposition, tol: float = DEFAULT_TAU_TOL
) -> HierarchyVerdict:
    """Check that every nonzero interaction has all its sub-interactions nonzero.

    A subset counts as nonzero when max |tau| exceeds ``tol``.  Violations
    are reported as (B, A) pairs with tau_B nonzero but tau_A ~ 0 for some
    A strictly inside B.
    """
    n = dec.scheme.n
    nonzero = {
        mask: float(np.max(np.abs(dec._tau[mask]))) > tol for mask in range(1 << n)
    }
    violations = []
    for mask in masks_by_size(n):
        if not nonzero[mask] or mask == 0:
            continue
        for sub in submasks(mask):
            if sub != mask and not nonzero[sub]:
                violations.append(
                    (dec.scheme.subset_names(axes_of(mask)), dec.scheme.subset_names(axes_of(sub)))
                )
    return HierarchyVerdict(
        hierarchical=not violations, violations=tuple(violations), tol=tol
    )
