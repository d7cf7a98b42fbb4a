"""Per-column cell geometry via lower envelopes of lines.

For a fixed column ``s``, the shifted cost of atom ``i`` as a function of
``t = h(p)`` is the line ``(g(s, y_i) - Psi_i) + w(y_i) * t``; the reservoir
contributes the constant line ``-Psi_{n+1}`` with slope 0.  Cell slices in a
column are therefore the pieces of the lower envelope of ``n+1`` lines,
computed exactly with a slope-sorted hull stack.  Because the reservoir's
slope 0 is strictly the smallest (w > 0 on the target box), the reservoir
piece, when visible, is always the topmost one, and its left endpoint is the
free surface.

Everything here is vectorised across a batch of columns; the scalar
``build_column`` API wraps a batch of size one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError, InternalError
from .measures import ExtendedProblem

__all__ = [
    "ColumnEnvelope",
    "ColumnBatch",
    "lower_envelope",
    "build_column",
    "build_columns",
    "column_intervals",
    "column_surface",
    "batch_lengths",
    "batch_surface",
    "batch_min_integral",
    "batch_fluid_energy",
]


def lower_envelope(intercepts: np.ndarray, slopes: np.ndarray):
    """Lower envelope of lines ``t -> intercepts[i] + slopes[i] * t`` over all t.

    ``intercepts`` has shape (m, K) for K independent columns sharing the
    slope vector.  Among lines of equal slope only the one with the smallest
    intercept (lowest index on ties) can appear.  Returns

        owner  : (K, q) original line index of each envelope piece
        start  : (K, q) piece start in t (-inf for the first piece)
        depth  : (K,)   number of valid pieces per column

    with pieces ordered left to right; slots at or beyond ``depth`` are
    padding.  Owner slopes strictly decrease along the piece order.
    """
    intercepts = np.atleast_2d(np.asarray(intercepts, dtype=float))
    slopes = np.asarray(slopes, dtype=float)
    m, k_cols = intercepts.shape
    if slopes.shape != (m,):
        raise InputError("slopes must have one entry per line")
    if not (np.all(np.isfinite(intercepts)) and np.all(np.isfinite(slopes))):
        raise InputError("envelope lines must be finite")

    # Collapse equal-slope groups to their per-column minimal line.
    order = np.argsort(-slopes, kind="stable")
    group_slope: list[float] = []
    group_members: list[np.ndarray] = []
    for idx in order:
        w = slopes[idx]
        if group_slope and w == group_slope[-1]:
            group_members[-1] = np.append(group_members[-1], idx)
        else:
            group_slope.append(w)
            group_members.append(np.array([idx]))
    g = len(group_slope)
    grp_w = np.asarray(group_slope)
    win_owner = np.empty((g, k_cols), dtype=np.int64)
    win_a = np.empty((g, k_cols), dtype=float)
    for j, members in enumerate(group_members):
        members = np.sort(members)  # argmin then prefers the lowest index
        sub = intercepts[members]
        pick = np.argmin(sub, axis=0)
        win_owner[j] = members[pick]
        win_a[j] = sub[pick, np.arange(k_cols)]

    # Hull stack per column, processed in strictly decreasing slope order.
    stack_grp = np.zeros((k_cols, g), dtype=np.int64)
    stack_start = np.full((k_cols, g), -np.inf)
    depth = np.zeros(k_cols, dtype=np.int64)
    all_cols = np.arange(k_cols)
    for j in range(g):
        a_new = win_a[j]
        w_new = grp_w[j]
        start_new = np.full(k_cols, -np.inf)
        pending = np.ones(k_cols, dtype=bool)
        while True:
            cols = np.nonzero(pending)[0]
            if cols.size == 0:
                break
            empty = depth[cols] == 0
            pending[cols[empty]] = False  # first piece starts at -inf
            cols = cols[~empty]
            if cols.size == 0:
                continue
            top_slot = depth[cols] - 1
            top = stack_grp[cols, top_slot]
            a_top = win_a[top, cols]
            x = (a_new[cols] - a_top) / (grp_w[top] - w_new)
            pop = x <= stack_start[cols, top_slot]
            depth[cols[pop]] -= 1
            resolved = cols[~pop]
            start_new[resolved] = x[~pop]
            pending[resolved] = False
        stack_grp[all_cols, depth] = j
        stack_start[all_cols, depth] = start_new
        depth += 1

    owner = win_owner[stack_grp, all_cols[:, None]]
    return owner, stack_start, depth


@dataclass(frozen=True)
class ColumnEnvelope:
    """Envelope of one column, clipped to the admissible h-range.

    ``owners[j]`` holds the piece between ``h_breaks[j]`` and
    ``h_breaks[j+1]``; the breaks partition ``[h(0), h(P)]`` exactly and a
    boundary value belongs to the piece on its left.
    """

    s: float
    owners: np.ndarray    # (q,) line indices, reservoir == n_lines - 1
    h_breaks: np.ndarray  # (q+1,) increasing, first == h(0), last == h(P)
    h_range: tuple[float, float]
    n_lines: int


@dataclass(frozen=True)
class ColumnBatch:
    """Clipped envelopes of many columns, padded to a common piece count.

    Per column ``k`` the valid pieces are ``j < counts[k]``; padding slots
    have zero width so mass and integral reductions can ignore the mask.
    ``intercept`` stores the envelope line value offsets g - Psi actually
    used, enabling exact piecewise integrals downstream.
    """

    s: np.ndarray          # (K,)
    owners: np.ndarray     # (K, q_max)
    intercept: np.ndarray  # (K, q_max) g(s, y_own) - Psi_own
    slope: np.ndarray      # (K, q_max) w(y_own)
    h_breaks: np.ndarray   # (K, q_max + 1)
    p_breaks: np.ndarray   # (K, q_max + 1)
    counts: np.ndarray     # (K,)
    h_range: tuple[float, float]
    p_cap: float
    n_lines: int           # n + 1 including the reservoir


def _line_coefficients(problem: ExtendedProblem, psi: np.ndarray, s: np.ndarray):
    cost, nu = problem.cost, problem.nu
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (nu.n + 1,):
        raise InputError(f"weight vector must have length n+1 = {nu.n + 1}, got {psi.shape}")
    if not np.all(np.isfinite(psi)):
        raise InputError("weight vector must be finite")
    intercepts = np.empty((nu.n + 1, s.size))
    intercepts[: nu.n] = cost.g(s[None, :], nu.z[:, None], nu.theta[:, None]) - psi[: nu.n, None]
    intercepts[nu.n] = -psi[nu.n]
    slopes = np.concatenate([np.asarray(cost.w(nu.z, nu.theta), dtype=float), [0.0]])
    return intercepts, slopes


def build_columns(s: np.ndarray, psi: np.ndarray, problem: ExtendedProblem) -> ColumnBatch:
    """Exact envelopes for every column in ``s`` at weights ``psi``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if not problem.cost.contains_s(s):
        raise DomainError("column coordinates must lie in the domain interval")
    cost = problem.cost
    intercepts, slopes = _line_coefficients(problem, psi, s)
    owner, start, depth = lower_envelope(intercepts, slopes)

    h_lo = float(cost.h(np.asarray(0.0)))
    h_hi = float(cost.h(np.asarray(problem.p_cap)))
    q_max = int(depth.max())
    k_cols = s.size
    cols = np.arange(k_cols)[:, None]
    slot = np.arange(q_max)[None, :]
    valid = slot < depth[:, None]

    h_breaks = np.empty((k_cols, q_max + 1))
    clipped = np.clip(start[:, :q_max], h_lo, h_hi)
    h_breaks[:, :q_max] = np.where(valid, clipped, h_hi)
    h_breaks[:, 0] = h_lo
    h_breaks[:, q_max] = h_hi
    p_breaks = np.maximum(cost.h_inv(h_breaks), 0.0)
    p_breaks[:, 0] = 0.0
    p_breaks[:, q_max] = problem.p_cap

    owners = np.where(valid, owner[:, :q_max], problem.reservoir_index)
    a_line = intercepts[owners, cols]
    w_line = slopes[owners]
    return ColumnBatch(
        s=s,
        owners=owners,
        intercept=a_line,
        slope=w_line,
        h_breaks=h_breaks,
        p_breaks=p_breaks,
        counts=np.minimum(depth, q_max),
        h_range=(h_lo, h_hi),
        p_cap=problem.p_cap,
        n_lines=problem.n + 1,
    )


def build_column(s: float, psi: np.ndarray, problem: ExtendedProblem) -> ColumnEnvelope:
    """Envelope of the single column at ``s``, zero-width pieces dropped."""
    batch = build_columns(np.asarray([s], dtype=float), psi, problem)
    owners = batch.owners[0]
    breaks = batch.h_breaks[0]
    widths = np.diff(breaks)
    keep = widths > 0.0
    if not np.any(keep):  # degenerate h-range; keep a single piece for sanity
        keep = np.zeros_like(keep)
        keep[0] = True
    h_breaks = np.concatenate([breaks[:-1][keep], [batch.h_range[1]]])
    h_breaks[0] = batch.h_range[0]
    return ColumnEnvelope(
        s=float(s),
        owners=owners[keep].copy(),
        h_breaks=h_breaks,
        h_range=batch.h_range,
    )


def column_intervals(env: ColumnEnvelope, cost) -> np.ndarray:
    """Per-owner p-lengths of the column's pieces; sums to the cap height."""
    p_breaks = np.maximum(cost.h_inv(env.h_breaks), 0.0)
    lengths = np.diff(p_breaks)
    out = np.zeros(int(env.owners.max()) + 1 if env.owners.size else 1)
    np.add.at(out, env.owners, lengths)
    return out


def column_surface(env: ColumnEnvelope, cost, reservoir_index: int | None = None) -> float:
    """Free-surface height of the column: left endpoint of the reservoir piece.

    Returns ``h_inv(h(P))`` (the cap) when the reservoir owns nothing in
    range and 0 when it owns the whole column.
    """
    if reservoir_index is None:
        reservoir_index = int(env.owners.max())
    hits = np.nonzero(env.owners == reservoir_index)[0]
    if hits.size == 0:
        return float(max(cost.h_inv(np.asarray(env.h_range[1])), 0.0))
    h_left = env.h_breaks[hits[0]]
    if h_left <= env.h_range[0]:
        return 0.0
    return float(max(cost.h_inv(np.asarray(h_left)), 0.0))


# -- batched reductions used by the dual solver -------------------------------


def batch_lengths(batch: ColumnBatch) -> np.ndarray:
    """(K, n+1) p-length of each owner's slice in each column."""
    widths = np.diff(batch.p_breaks, axis=1)
    out = np.zeros((batch.s.size, batch.n_lines))
    np.add.at(out.reshape(-1), batch.owners + np.arange(batch.s.size)[:, None] * batch.n_lines, widths)
    return out


def batch_surface(batch: ColumnBatch) -> np.ndarray:
    """(K,) free surface per column from the reservoir piece boundary."""
    reservoir = batch.n_lines - 1
    k = np.arange(batch.s.size)
    top = batch.counts - 1
    if not np.all(batch.owners[k, top] == reservoir):
        # w > 0 for every atom guarantees the reservoir tops the stack
        raise InternalError("reservoir missing from an envelope stack")
    return batch.p_breaks[k, top]


def batch_min_integral(batch: ColumnBatch, cost) -> np.ndarray:
    """(K,) exact integral over p in [0, P] of min_i(c - Psi_i) per column."""
    dp = np.diff(batch.p_breaks, axis=1)
    h_prim = cost.h_antiderivative(batch.p_breaks)
    dh = np.diff(h_prim, axis=1)
    return np.sum(batch.intercept * dp + batch.slope * dh, axis=1)


def batch_fluid_energy(batch: ColumnBatch, cost, psi: np.ndarray) -> np.ndarray:
    """(K,) exact per-column transport cost of the fluid below the surface.

    Needs the same ``psi`` the batch was built with: the stored intercepts
    are g - Psi, so adding back Psi_owner recovers the plain cost.  The
    reservoir's slice costs zero by definition and is excluded.
    """
    dp = np.diff(batch.p_breaks, axis=1)
    dh = np.diff(cost.h_antiderivative(batch.p_breaks), axis=1)
    reservoir = batch.n_lines - 1
    atom = batch.owners != reservoir
    g_part = batch.intercept + np.asarray(psi, dtype=float)[batch.owners]
    contrib = g_part * dp + batch.slope * dh
    return np.sum(np.where(atom, contrib, 0.0), axis=1)
