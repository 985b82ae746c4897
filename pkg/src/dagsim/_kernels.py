"""Array-backed kernels for the composite mempool structure.

One pool is a set of preallocated numpy arrays.  Entry slots 0..capacity-1
hold (txid, fee) pairs and are shared by both access structures:

  * a chained hashtable (``head``/``hnext``/``ebucket``) giving direct and
    random access, bucket index = mix64(txid ^ salt) & (buckets - 1);
  * a red-black tree (``left``/``right``/``parent``/``color``) ordered by
    (fee, txid) giving sorted access.

Slot ``capacity`` is the tree's NIL sentinel.  Chains use -1 as terminator.
All kernels are plain loops over these arrays so numba can JIT them; without
numba (or with DAGSIM_DISABLE_JIT set) they run as regular Python with
identical results.
"""

import os

import numpy as np

try:
    if os.environ.get("DAGSIM_DISABLE_JIT"):
        raise ImportError("JIT disabled via DAGSIM_DISABLE_JIT")
    from numba import njit

    JIT_ENABLED = True
except ImportError:

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(f):
            return f

        return deco

    JIT_ENABLED = False

RED = 0
BLACK = 1

META_ROOT = 0
META_SIZE = 1
META_FREE = 2  # height of the free-slot stack

_U64 = np.uint64
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_S30, _S27, _S31 = _U64(30), _U64(27), _U64(31)
_M64 = (1 << 64) - 1


def bucket_indices(ids, salt, mask):
    """Bucket index for each tx id: 64-bit avalanche of (id ^ salt).

    Vectorized reference used by single-id lookups and tests; numpy uint64
    array arithmetic wraps silently, matching the in-kernel scalar path.
    """
    z = ids.astype(np.uint64)
    z = (z ^ _U64(salt)) + _GOLDEN
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    z = z ^ (z >> _S31)
    return (z & _U64(mask)).astype(np.int64)


if JIT_ENABLED:

    @njit(cache=True)
    def _bucket_of(idv, salt, mask):
        z = (_U64(idv) ^ salt) + _GOLDEN
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        z = z ^ (z >> _S31)
        return np.int64(z & mask)

else:

    def _bucket_of(idv, salt, mask):
        # same avalanche on arbitrary-precision ints, masked to 64 bits
        z = ((int(idv) ^ int(salt)) + 0x9E3779B97F4A7C15) & _M64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        z = z ^ (z >> 31)
        return z & int(mask)


# --- red-black tree (iterative CLRS over index arrays) ----------------------


@njit(cache=True)
def _less(fee, txid, i, j):
    return fee[i] < fee[j] or (fee[i] == fee[j] and txid[i] < txid[j])


@njit(cache=True)
def _key_below(f, t, fee, txid, j):
    """(f, t) < (fee[j], txid[j]) in (fee, id) order."""
    fj = fee[j]
    return f < fj or (f == fj and t < txid[j])


@njit(cache=True)
def _rot_left(left, right, parent, meta, nil, x):
    y = right[x]
    right[x] = left[y]
    if left[y] != nil:
        parent[left[y]] = x
    parent[y] = parent[x]
    if parent[x] == nil:
        meta[META_ROOT] = y
    elif x == left[parent[x]]:
        left[parent[x]] = y
    else:
        right[parent[x]] = y
    left[y] = x
    parent[x] = y


@njit(cache=True)
def _rot_right(left, right, parent, meta, nil, x):
    y = left[x]
    left[x] = right[y]
    if right[y] != nil:
        parent[right[y]] = x
    parent[y] = parent[x]
    if parent[x] == nil:
        meta[META_ROOT] = y
    elif x == right[parent[x]]:
        right[parent[x]] = y
    else:
        left[parent[x]] = y
    right[y] = x
    parent[x] = y


@njit(cache=True)
def _rb_insert(txid, fee, left, right, parent, color, meta, nil, z):
    zf = fee[z]
    zt = txid[z]
    y = nil
    x = meta[META_ROOT]
    went_left = False
    while x != nil:
        y = x
        if _key_below(zf, zt, fee, txid, x):
            x = left[x]
            went_left = True
        else:
            x = right[x]
            went_left = False
    parent[z] = y
    if y == nil:
        meta[META_ROOT] = z
    elif went_left:
        left[y] = z
    else:
        right[y] = z
    left[z] = nil
    right[z] = nil
    color[z] = RED
    while color[parent[z]] == RED:
        zp = parent[z]
        zpp = parent[zp]
        if zp == left[zpp]:
            y = right[zpp]
            if color[y] == RED:
                color[zp] = BLACK
                color[y] = BLACK
                color[zpp] = RED
                z = zpp
            else:
                if z == right[zp]:
                    z = zp
                    _rot_left(left, right, parent, meta, nil, z)
                color[parent[z]] = BLACK
                color[parent[parent[z]]] = RED
                _rot_right(left, right, parent, meta, nil, parent[parent[z]])
        else:
            y = left[zpp]
            if color[y] == RED:
                color[zp] = BLACK
                color[y] = BLACK
                color[zpp] = RED
                z = zpp
            else:
                if z == left[zp]:
                    z = zp
                    _rot_right(left, right, parent, meta, nil, z)
                color[parent[z]] = BLACK
                color[parent[parent[z]]] = RED
                _rot_left(left, right, parent, meta, nil, parent[parent[z]])
    color[meta[META_ROOT]] = BLACK


@njit(cache=True)
def _subtree_min(left, nil, x):
    while left[x] != nil:
        x = left[x]
    return x


@njit(cache=True)
def _subtree_max(right, nil, x):
    while right[x] != nil:
        x = right[x]
    return x


@njit(cache=True)
def _predecessor(left, right, parent, nil, x):
    if left[x] != nil:
        return _subtree_max(right, nil, left[x])
    y = parent[x]
    while y != nil and x == left[y]:
        x = y
        y = parent[y]
    return y


@njit(cache=True)
def _transplant(left, right, parent, meta, nil, u, v):
    if parent[u] == nil:
        meta[META_ROOT] = v
    elif u == left[parent[u]]:
        left[parent[u]] = v
    else:
        right[parent[u]] = v
    parent[v] = parent[u]


@njit(cache=True)
def _rb_delete(left, right, parent, color, meta, nil, z):
    y = z
    y_color = color[y]
    if left[z] == nil:
        x = right[z]
        _transplant(left, right, parent, meta, nil, z, right[z])
    elif right[z] == nil:
        x = left[z]
        _transplant(left, right, parent, meta, nil, z, left[z])
    else:
        y = _subtree_min(left, nil, right[z])
        y_color = color[y]
        x = right[y]
        if parent[y] == z:
            parent[x] = y
        else:
            _transplant(left, right, parent, meta, nil, y, right[y])
            right[y] = right[z]
            parent[right[y]] = y
        _transplant(left, right, parent, meta, nil, z, y)
        left[y] = left[z]
        parent[left[y]] = y
        color[y] = color[z]
    if y_color == BLACK:
        # delete fixup
        while x != meta[META_ROOT] and color[x] == BLACK:
            xp = parent[x]
            if x == left[xp]:
                w = right[xp]
                if color[w] == RED:
                    color[w] = BLACK
                    color[xp] = RED
                    _rot_left(left, right, parent, meta, nil, xp)
                    w = right[xp]
                if color[left[w]] == BLACK and color[right[w]] == BLACK:
                    color[w] = RED
                    x = xp
                else:
                    if color[right[w]] == BLACK:
                        color[left[w]] = BLACK
                        color[w] = RED
                        _rot_right(left, right, parent, meta, nil, w)
                        w = right[xp]
                    color[w] = color[xp]
                    color[xp] = BLACK
                    color[right[w]] = BLACK
                    _rot_left(left, right, parent, meta, nil, xp)
                    x = meta[META_ROOT]
            else:
                w = left[xp]
                if color[w] == RED:
                    color[w] = BLACK
                    color[xp] = RED
                    _rot_right(left, right, parent, meta, nil, xp)
                    w = left[xp]
                if color[right[w]] == BLACK and color[left[w]] == BLACK:
                    color[w] = RED
                    x = xp
                else:
                    if color[left[w]] == BLACK:
                        color[right[w]] = BLACK
                        color[w] = RED
                        _rot_left(left, right, parent, meta, nil, w)
                        w = left[xp]
                    color[w] = color[xp]
                    color[xp] = BLACK
                    color[left[w]] = BLACK
                    _rot_right(left, right, parent, meta, nil, xp)
                    x = meta[META_ROOT]
        color[x] = BLACK


# --- hashtable chains -------------------------------------------------------


@njit(cache=True)
def _find_in_bucket(txv, b, head, hnext, txid):
    j = head[b]
    while j != -1:
        if txid[j] == txv:
            return j
        j = hnext[j]
    return -1


@njit(cache=True)
def _unlink_chain(slot, head, hnext, ebucket, txid):
    b = ebucket[slot]
    j = head[b]
    if j == slot:
        head[b] = hnext[slot]
        return
    while hnext[j] != slot:
        j = hnext[j]
    hnext[j] = hnext[slot]


# --- composite operations ----------------------------------------------------
# Shared argument tail (in this order):
#   txid, fee, hnext, ebucket, head, left, right, parent, color, free, marks,
#   meta, nil


@njit(cache=True)
def _insert_slot(idv, feev, b, txid, fee, hnext, ebucket, head, left, right,
                 parent, color, free, marks, meta, nil):
    slot = free[meta[META_FREE] - 1]
    meta[META_FREE] -= 1
    txid[slot] = idv
    fee[slot] = feev
    hnext[slot] = head[b]
    head[b] = slot
    ebucket[slot] = b
    marks[slot] = 0
    _rb_insert(txid, fee, left, right, parent, color, meta, nil, slot)
    meta[META_SIZE] += 1


@njit(cache=True)
def _drop_slot(slot, txid, fee, hnext, ebucket, head, left, right, parent,
               color, free, marks, meta, nil):
    _unlink_chain(slot, head, hnext, ebucket, txid)
    _rb_delete(left, right, parent, color, meta, nil, slot)
    free[meta[META_FREE]] = slot
    meta[META_FREE] += 1
    meta[META_SIZE] -= 1


@njit(cache=True)
def _insert_batch(ids, fees, salt, mask, txid, fee, hnext, ebucket, head, left,
                  right, parent, color, free, marks, meta, nil):
    """Insert all; returns (code, index): 0 ok, 1 duplicate, 2 over capacity."""
    for i in range(ids.shape[0]):
        b = _bucket_of(ids[i], salt, mask)
        if _find_in_bucket(ids[i], b, head, hnext, txid) != -1:
            return 1, i
        if meta[META_SIZE] >= nil:
            return 2, i
        _insert_slot(ids[i], fees[i], b, txid, fee, hnext, ebucket, head,
                     left, right, parent, color, free, marks, meta, nil)
    return 0, -1


@njit(cache=True)
def _insert_capped_batch(ids, fees, salt, mask, txid, fee, hnext, ebucket,
                         head, left, right, parent, color, free, marks, meta,
                         nil):
    """Insert keeping only the capacity-best (fee, id) of old ∪ new.

    On a full pool each new tx either evicts the current minimum or, when it
    ranks below the minimum itself, is dropped.  Returns (code, index,
    n_inserted); code 1 flags a duplicate id.
    """
    inserted = 0
    mn = -1  # cached minimum slot, valid only while the pool stays full
    for i in range(ids.shape[0]):
        b = _bucket_of(ids[i], salt, mask)
        if _find_in_bucket(ids[i], b, head, hnext, txid) != -1:
            return 1, i, inserted
        if meta[META_SIZE] >= nil:
            if mn == -1:
                mn = _subtree_min(left, nil, meta[META_ROOT])
            if fees[i] < fee[mn] or (fees[i] == fee[mn] and ids[i] < txid[mn]):
                continue
            _drop_slot(mn, txid, fee, hnext, ebucket, head, left, right,
                       parent, color, free, marks, meta, nil)
            mn = -1
        _insert_slot(ids[i], fees[i], b, txid, fee, hnext, ebucket, head,
                     left, right, parent, color, free, marks, meta, nil)
        inserted += 1
    return 0, -1, inserted


@njit(cache=True)
def _remove_batch(ids, salt, mask, txid, fee, hnext, ebucket, head, left,
                  right, parent, color, free, marks, meta, nil):
    """Remove every present id; absent ids are ignored. Returns count removed."""
    removed = 0
    for i in range(ids.shape[0]):
        slot = _find_in_bucket(ids[i], _bucket_of(ids[i], salt, mask),
                               head, hnext, txid)
        if slot != -1:
            _drop_slot(slot, txid, fee, hnext, ebucket, head, left, right,
                       parent, color, free, marks, meta, nil)
            removed += 1
    return removed


@njit(cache=True)
def _evict_lowest(k, txid, fee, hnext, ebucket, head, left, right, parent,
                  color, free, marks, meta, nil):
    for _ in range(k):
        mn = _subtree_min(left, nil, meta[META_ROOT])
        _drop_slot(mn, txid, fee, hnext, ebucket, head, left, right, parent,
                   color, free, marks, meta, nil)


@njit(cache=True)
def _take_top(k, out_ids, out_fees, txid, fee, left, right, parent, meta, nil):
    x = _subtree_max(right, nil, meta[META_ROOT])
    for i in range(k):
        out_ids[i] = txid[x]
        out_fees[i] = fee[x]
        x = _predecessor(left, right, parent, nil, x)


@njit(cache=True)
def _bucket_pick(b, u_chain, head, hnext, marks):
    """Pick uniformly among unmarked entries of bucket b; -1 if none."""
    cnt = 0
    j = head[b]
    while j != -1:
        if marks[j] == 0:
            cnt += 1
        j = hnext[j]
    if cnt == 0:
        return -1
    pick = int(u_chain * cnt)
    if pick >= cnt:
        pick = cnt - 1
    j = head[b]
    idx = 0
    while True:
        if marks[j] == 0:
            if idx == pick:
                return j
            idx += 1
        j = hnext[j]


@njit(cache=True)
def _select_many(k, us, start_random, n_buckets, out_ids, out_fees, out_slots,
                 txid, fee, hnext, head, marks):
    """Perform k random selections, excluding marked entries.

    Each selection consumes exactly two uniforms from ``us``: a start-bucket
    draw (ignored by the begin-style scan) and an in-chain draw (ignored for
    single-candidate buckets).  Selected entries are marked so one call never
    returns the same tx twice; the call's own marks are cleared before
    returning.  Returns the number selected (< k only if nothing unmarked
    remains).
    """
    done = 0
    for t in range(k):
        u_start = us[2 * t]
        u_chain = us[2 * t + 1]
        slot = -1
        if start_random:
            b0 = int(u_start * n_buckets)
            if b0 >= n_buckets:
                b0 = n_buckets - 1
            slot = _bucket_pick(b0, u_chain, head, hnext, marks)
            if slot == -1:
                # alternate above/below with wraparound, above first
                for d in range(1, n_buckets + 1):
                    bu = b0 + d
                    if bu >= n_buckets:
                        bu -= n_buckets
                    slot = _bucket_pick(bu, u_chain, head, hnext, marks)
                    if slot != -1:
                        break
                    bd = b0 - d
                    if bd < 0:
                        bd += n_buckets
                    slot = _bucket_pick(bd, u_chain, head, hnext, marks)
                    if slot != -1:
                        break
        else:
            for b in range(n_buckets):
                slot = _bucket_pick(b, u_chain, head, hnext, marks)
                if slot != -1:
                    break
        if slot == -1:
            break
        marks[slot] = 1
        out_ids[t] = txid[slot]
        out_fees[t] = fee[slot]
        out_slots[t] = slot
        done += 1
    for t in range(done):
        marks[out_slots[t]] = 0
    return done
