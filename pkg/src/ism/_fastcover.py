"""Compiled batch version of :func:`ism.inference.cover_row`.

Same candidate order, tiering and leftmost placement as the reference
implementation, so both produce identical coverings; the test-suite checks
this on random instances.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Sequence as SequenceABC
from itertools import chain
from typing import Mapping, Sequence as Seq

import numpy as np
from numba import njit

from .core import Occurrence, Sequence
from .inference import LOG_ZERO, Covering, CoverageError, _LN_FACT, log_factorial, permutation_penalty


@njit(cache=True)
def _cover_batch(n_items, row_ptr, row_items, sup_ptr, sup_ids, pat_ptr, pat_items, logs, log_len, lnf):
    n_rows = row_ptr.shape[0] - 1
    total = row_ptr[n_rows]
    occ_ptr = np.zeros(n_rows + 1, np.int64)
    occ_pat = np.empty(total, np.int64)
    occ_pos = np.empty(total, np.int64)
    status = np.zeros(n_rows, np.int64)
    has_single = np.zeros(n_items, np.int64)
    n_occ = 0
    n_pos = 0
    for r in range(n_rows):
        a = row_ptr[r]
        n = row_ptr[r + 1] - a
        covered = np.zeros(n, np.bool_)
        s0 = sup_ptr[r]
        k = sup_ptr[r + 1] - s0
        # every item needs a singleton to fall back on
        for j in range(k):
            pid = sup_ids[s0 + j]
            if pat_ptr[pid + 1] - pat_ptr[pid] == 1:
                has_single[pat_items[pat_ptr[pid]]] = r + 1
        for i in range(n):
            if has_single[row_items[a + i]] != r + 1:
                status[r] = 2
        if status[r]:
            occ_ptr[r + 1] = n_occ
            continue
        mult = np.zeros(k, np.int64)
        alive = np.ones(k, np.bool_)
        g = 0
        while g < n:
            base = lnf[g]
            best = -1
            bt = -2
            bv = 0.0
            for j in range(k):
                if not alive[j]:
                    continue
                pid = sup_ids[s0 + j]
                size = pat_ptr[pid + 1] - pat_ptr[pid]
                m = mult[j]
                ll = log_len[pid]
                nxt = logs[pid, m + 1] if m + 1 < ll else LOG_ZERO
                pen = lnf[g + size] - base
                if nxt <= LOG_ZERO:
                    if size > 1:
                        alive[j] = False
                        continue
                    tier = -1
                    val = -pen
                else:
                    cur = logs[pid, m] if m < ll else LOG_ZERO
                    if cur <= LOG_ZERO:
                        tier = 1
                        val = (nxt - pen) / size
                    else:
                        tier = 0
                        val = (nxt - cur - pen) / size
                if tier > bt or (tier == bt and val > bv):
                    bt = tier
                    bv = val
                    best = j
            if best < 0:
                status[r] = 1
                break
            pid = sup_ids[s0 + best]
            p0 = pat_ptr[pid]
            size = pat_ptr[pid + 1] - p0
            q = 0
            start = n_pos
            for i in range(n):
                if not covered[i] and row_items[a + i] == pat_items[p0 + q]:
                    occ_pos[n_pos + q] = i
                    q += 1
                    if q == size:
                        break
            if q < size:
                alive[best] = False
                continue
            for t in range(size):
                covered[occ_pos[start + t]] = True
            n_pos += size
            occ_pat[n_occ] = pid
            n_occ += 1
            mult[best] += 1
            g += size
        occ_ptr[r + 1] = n_occ
    return status, occ_ptr, occ_pat[:n_occ], occ_pos[:n_pos]


def cover_rows_fast(rows: Seq[Sequence], supported: Seq[Mapping[Sequence, int]],
                    logs: Mapping[Sequence, tuple[float, ...]]) -> list[Covering]:
    """Greedy coverings for many rows in one compiled pass."""
    if not rows:
        return []
    pats = sorted(logs, key=lambda s: (-len(s), s))
    pid = {s: i for i, s in enumerate(pats)}
    pat_ptr = np.zeros(len(pats) + 1, np.int64)
    np.cumsum([len(s) for s in pats], out=pat_ptr[1:])
    pat_items = np.fromiter(chain.from_iterable(pats), np.int64, int(pat_ptr[-1]))
    width = max(len(logs[s]) for s in pats)
    table = np.full((len(pats), width + 1), LOG_ZERO)
    log_len = np.empty(len(pats), np.int64)
    for i, s in enumerate(pats):
        lp = logs[s]
        table[i, :len(lp)] = lp
        log_len[i] = len(lp)

    row_ptr = np.zeros(len(rows) + 1, np.int64)
    np.cumsum([len(r) for r in rows], out=row_ptr[1:])
    row_items = np.fromiter(chain.from_iterable(rows), np.int64, int(row_ptr[-1]))
    sup_lists = [sorted(pid[s] for s in sup) for sup in supported]
    sup_ptr = np.zeros(len(rows) + 1, np.int64)
    np.cumsum([len(v) for v in sup_lists], out=sup_ptr[1:])
    sup_ids = np.fromiter(chain.from_iterable(sup_lists), np.int64, int(sup_ptr[-1]))

    longest = max((len(r) for r in rows), default=0)
    log_factorial(longest + int(np.max(np.diff(pat_ptr))) + 1)
    lnf = np.asarray(_LN_FACT)

    n_items = 1 + max(int(row_items.max(initial=-1)), int(pat_items.max(initial=-1)))
    status, occ_ptr, occ_pat, occ_pos = _cover_batch(
        n_items, row_ptr, row_items, sup_ptr, sup_ids, pat_ptr, pat_items, table, log_len, lnf)

    out = []
    ptr = occ_ptr.tolist()
    lengths = np.diff(pat_ptr)[occ_pat]
    pos_start = np.zeros(len(occ_pat) + 1, np.int64)
    np.cumsum(lengths, out=pos_start[1:])
    pos_start_l = pos_start.tolist()
    pat_of = occ_pat.tolist()
    penalties = {}
    for r, row in enumerate(rows):
        if status[r]:
            singles = {s[0] for s in supported[r] if len(s) == 1}
            raise CoverageError(set(row) - singles or set(row))
        if not row:
            out.append(Covering(Counter(), [], 0.0))
            continue
        a, b = ptr[r], ptr[r + 1]
        counts: Counter = Counter()
        for p, m in Counter(pat_of[a:b]).items():
            counts[pats[p]] = m
        value = sum(logs[s][m] if m < len(logs[s]) else LOG_ZERO for s, m in counts.items())
        n = len(row)
        pen = penalties.get(n)
        if pen is None:
            pen = penalties[n] = permutation_penalty(n)
        occurrences = _PackedOccurrences(pats, occ_pat[a:b], occ_pos[pos_start_l[a]:pos_start_l[b]])
        out.append(Covering(counts, occurrences, max(value, LOG_ZERO) + pen))
    return out


class _PackedOccurrences(SequenceABC):
    """Occurrence list kept as kernel arrays until someone looks at it."""

    __slots__ = ("_pats", "_ids", "_pos", "_items")

    def __init__(self, pats, ids, pos):
        self._pats = pats
        self._ids = ids
        self._pos = pos
        self._items = None

    def _materialize(self) -> list[Occurrence]:
        if self._items is None:
            items = []
            pos = self._pos.tolist()
            cursor = 0
            for p in self._ids.tolist():
                s = self._pats[p]
                items.append(Occurrence(s, tuple(pos[cursor:cursor + len(s)])))
                cursor += len(s)
            self._items = items
        return self._items

    def __getitem__(self, i):
        return self._materialize()[i]

    def __len__(self) -> int:
        return len(self._ids)

    def __eq__(self, other) -> bool:
        return list(self) == list(other)

    def __repr__(self) -> str:
        return repr(self._materialize())
