"""Collapsibility of interaction parameters onto a marginal table.

A table over variables 1..n is collapsible onto the margin B with respect
to tau_A (A inside B) when the A-interaction of the full table equals the
A-interaction of the marginal table over B.  Two equivalent verdict routes
are always computed and compared:

* direct: decompose both tables, compare tau_A (full) with eta_A (marginal);
* residual: form d(i_B) = ln p_B(i_B) - ltilde_B(i_B), average d over
  B-minus-Z for each Z inside A, and Möbius-invert; collapsibility is the
  vanishing of the resulting alternating sum.

Strict collapsibility additionally requires every interaction linking A to
the collapsed variables to vanish, which holds exactly when X_A is
conditionally independent of the collapsed variables given the rest of the
margin.  That conditional-independence route is computed as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import RouteDisagreementError, SchemeError
from .loglinear import DEFAULT_TAU_TOL, decompose
from .subsets import axes_of, mask_of, popcount, submasks
from .tables import DEFAULT_CI_TOL, CiVerdict, ContingencyTable, SubsetSpec


@dataclass(frozen=True, eq=False)
class CollapseVerdict:
    """Verdict of a (strict) collapsibility check.

    ``max_residual`` is the worst absolute value of the residual alternating
    sum; ``direct_gap`` is max |tau_A - eta_A| from the direct route.  The
    two agree up to rounding by construction.  For strict checks, ``strict``
    carries the verdict, ``set_gaps`` the per-parameter gaps over the target
    set, ``zero_set_max`` the largest interaction linking the target to the
    collapsed variables (the Definition-style condition (ii), also exposed
    as ``interaction_zero_ok``), and ``ci`` the conditional-independence
    cross-check.
    """

    target: tuple[str, ...]
    margin: tuple[str, ...]
    collapsible: bool
    max_residual: float
    direct_gap: float
    tau_full: np.ndarray
    eta_marginal: np.ndarray
    tol: float
    strict: bool | None = None
    set_gaps: Mapping[tuple[str, ...], float] | None = None
    zero_set_max: float | None = None
    interaction_zero_ok: bool | None = None
    ci: CiVerdict | None = None


def _collapse_core(
    table: ContingencyTable, a_axes: tuple[int, ...], b_axes: tuple[int, ...]
) -> tuple[dict, dict, np.ndarray]:
    """Decompositions of full and marginal table plus the d residual array."""
    full = decompose(table)
    marg_table = table.marginalize(b_axes)
    marg = decompose(marg_table)
    # d over the margin's axes: log marginal cells minus averaged full logs
    ltilde_b = np.log(table.cells).mean(
        axis=tuple(x for x in range(table.scheme.n) if x not in b_axes)
    )
    d = np.log(marg_table.cells) - ltilde_b
    return full, marg, d


def _residual_route(
    d: np.ndarray, a_pos: tuple[int, ...]
) -> tuple[float, np.ndarray]:
    """Alternating sum over subsets of A of the averaged d residuals."""
    s = d.ndim
    a_mask = mask_of(a_pos)
    means: dict[int, np.ndarray] = {}
    for sub in submasks(a_mask):
        comp = tuple(x for x in range(s) if not sub & (1 << x))
        means[sub] = d.mean(axis=comp, keepdims=True) if comp else d
    out: np.ndarray | None = None
    size = popcount(a_mask)
    for sub in submasks(a_mask):
        term = means[sub] if (size - popcount(sub)) % 2 == 0 else -means[sub]
        out = term if out is None else out + term
    assert out is not None
    residual = np.squeeze(
        np.broadcast_to(out, tuple(d.shape[x] if a_mask & (1 << x) else 1 for x in range(s))),
        axis=tuple(x for x in range(s) if not a_mask & (1 << x)),
    )
    return float(np.max(np.abs(residual))), np.asarray(residual)


def check_collapsibility(
    table: ContingencyTable,
    target: SubsetSpec,
    margin: SubsetSpec,
    tol: float = DEFAULT_TAU_TOL,
) -> CollapseVerdict:
    """Is the table collapsible onto ``margin`` with respect to tau_target?

    ``target`` must lie inside ``margin``, and ``margin`` must be a proper
    subset of the variables (otherwise there is nothing to collapse over).
    Raises RouteDisagreementError if the residual route and the direct
    tau-versus-eta route disagree, which would indicate a bug rather than a
    property of the data.
    """
    a_axes = table.scheme.resolve_subset(target)
    b_axes = table.scheme.resolve_subset(margin)
    if not set(a_axes) <= set(b_axes):
        raise SchemeError("target must be a subset of the margin")
    if len(b_axes) >= table.scheme.n:
        raise SchemeError("margin must be a proper subset: nothing to collapse over")
    if not a_axes:
        raise SchemeError("target must be nonempty")

    full, marg, d = _collapse_core(table, a_axes, b_axes)
    # positions of the target axes inside the (sorted) margin
    a_pos = tuple(b_axes.index(x) for x in a_axes)
    max_residual, _ = _residual_route(d, a_pos)

    tau_full = full.tau(a_axes)
    eta_marginal = marg.tau(a_pos)
    direct_gap = float(np.max(np.abs(tau_full - eta_marginal)))

    by_residual = max_residual <= tol
    by_direct = direct_gap <= tol
    if by_residual != by_direct:
        raise RouteDisagreementError(
            f"residual route ({max_residual!r}) and direct route ({direct_gap!r}) "
            f"disagree at tol {tol!r}"
        )
    return CollapseVerdict(
        target=table.scheme.subset_names(a_axes),
        margin=table.scheme.subset_names(b_axes),
        collapsible=by_residual,
        max_residual=max_residual,
        direct_gap=direct_gap,
        tau_full=tau_full,
        eta_marginal=eta_marginal,
        tol=tol,
    )


def check_strict_collapsibility(
    table: ContingencyTable,
    target: SubsetSpec,
    given: SubsetSpec,
    collapsed: SubsetSpec,
    tol: float = DEFAULT_TAU_TOL,
    ci_tol: float = DEFAULT_CI_TOL,
) -> CollapseVerdict:
    """Strict collapsibility over ``collapsed`` for the partition (target, given, collapsed).

    The three subsets must partition the variable set (``given`` may be
    empty).  The verdict covers the whole parameter set
    {tau_L : L inside target ∪ given, L meets target}: every member must
    match its marginal counterpart, and every interaction meeting both
    ``target`` and ``collapsed`` must vanish.  The equivalent
    conditional-independence statement X_target ⊥ X_collapsed | X_given is
    evaluated as a second route and must agree.
    """
    a_axes = table.scheme.resolve_subset(target)
    b_axes = table.scheme.resolve_subset(given)
    c_axes = table.scheme.resolve_subset(collapsed)
    n = table.scheme.n
    union = set(a_axes) | set(b_axes) | set(c_axes)
    if (
        len(a_axes) + len(b_axes) + len(c_axes) != n
        or union != set(range(n))
    ):
        raise SchemeError("target, given, collapsed must partition the variables")
    if not a_axes or not c_axes:
        raise SchemeError("target and collapsed must be nonempty")

    margin_axes = tuple(sorted(set(a_axes) | set(b_axes)))
    full, marg, d = _collapse_core(table, a_axes, margin_axes)

    a_mask = mask_of(a_axes)
    c_mask = mask_of(c_axes)
    margin_mask = mask_of(margin_axes)

    # per-parameter gaps over C_L = {L inside the margin : L meets target}
    set_gaps: dict[tuple[str, ...], float] = {}
    worst_gap = 0.0
    for l_mask in submasks(margin_mask):
        if not l_mask & a_mask:
            continue
        l_axes = axes_of(l_mask)
        l_pos = tuple(margin_axes.index(x) for x in l_axes)
        gap = float(np.max(np.abs(full.tau(l_axes) - marg.tau(l_pos))))
        set_gaps[table.scheme.subset_names(l_axes)] = gap
        worst_gap = max(worst_gap, gap)

    # condition (ii): interactions meeting both the target and the collapsed set
    zero_set_max = 0.0
    for mask in range(1 << n):
        if mask & a_mask and mask & c_mask:
            zero_set_max = max(zero_set_max, full.max_abs(axes_of(mask)))
    interaction_zero_ok = zero_set_max <= tol

    strict_by_tau = worst_gap <= tol and interaction_zero_ok
    ci = table.check_ci(a_axes, c_axes, b_axes, tol=ci_tol)
    if strict_by_tau != ci.holds:
        raise RouteDisagreementError(
            f"interaction route (gap {worst_gap!r}, zero-set {zero_set_max!r}) and "
            f"CI route (deviation {ci.max_deviation!r}) disagree"
        )

    a_pos = tuple(margin_axes.index(x) for x in a_axes)
    max_residual, _ = _residual_route(d, a_pos)
    tau_full = full.tau(a_axes)
    eta_marginal = marg.tau(a_pos)
    return CollapseVerdict(
        target=table.scheme.subset_names(a_axes),
        margin=table.scheme.subset_names(margin_axes),
        collapsible=worst_gap <= tol,
        max_residual=max_residual,
        direct_gap=float(np.max(np.abs(tau_full - eta_marginal))),
        tau_full=tau_full,
        eta_marginal=eta_marginal,
        tol=tol,
        strict=strict_by_tau,
        set_gaps=set_gaps,
        zero_set_max=zero_set_max,
        interaction_zero_ok=interaction_zero_ok,
        ci=ci,
    )
