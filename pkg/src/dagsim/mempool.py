"""Per-miner transaction pool: chained hashtable mirrored by a fee-ordered
red-black tree.

The hashtable serves direct lookups and the random-access selection variants
(probe / begin / equal-key); the tree serves sorted access (lowest-fee
eviction, highest-fee block building).  Both views always contain exactly the
same transaction set; ``audit()`` verifies that mirror invariant together
with the red-black and chain invariants.

A pool instance is single-writer and never shared between concurrent runs.
"""

import numpy as np

from . import _kernels as k
from .model import RandomAccessVariant, Transaction

# Salt shared by every miner under the EQUAL_KEY variant, so that all pools
# place a given transaction in the same bucket.
EQUAL_KEY_SALT = 0x2545F4914F6CDD1D


class NotEnoughTransactions(RuntimeError):
    """Raised when more transactions are requested than the pool holds."""


class Mempool:
    def __init__(self, capacity, salt, audit=False):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.salt = salt & 0xFFFFFFFFFFFFFFFF
        self._audit_every_op = audit
        m = 1
        while m < 2 * capacity:  # load factor <= 0.5, power-of-two buckets
            m <<= 1
        self.n_buckets = m
        self._mask = m - 1
        self._salt_u64 = np.uint64(self.salt)
        self._mask_u64 = np.uint64(m - 1)
        nil = capacity
        self._nil = nil
        self._txid = np.zeros(capacity + 1, dtype=np.int64)
        self._fee = np.zeros(capacity + 1, dtype=np.int64)
        self._hnext = np.full(capacity + 1, -1, dtype=np.int32)
        self._ebucket = np.full(capacity + 1, -1, dtype=np.int32)
        self._head = np.full(m, -1, dtype=np.int32)
        self._left = np.full(capacity + 1, nil, dtype=np.int32)
        self._right = np.full(capacity + 1, nil, dtype=np.int32)
        self._parent = np.full(capacity + 1, nil, dtype=np.int32)
        self._color = np.full(capacity + 1, k.BLACK, dtype=np.uint8)
        self._free = np.arange(capacity - 1, -1, -1, dtype=np.int32)
        self._marks = np.zeros(capacity + 1, dtype=np.uint8)
        self._meta = np.array([nil, 0, capacity], dtype=np.int64)
        self._arrs = (
            self._txid, self._fee, self._hnext, self._ebucket, self._head,
            self._left, self._right, self._parent, self._color, self._free,
            self._marks, self._meta,
        )

    # -- sizing ---------------------------------------------------------

    @property
    def size(self):
        return int(self._meta[k.META_SIZE])

    def __len__(self):
        return self.size

    @property
    def nbytes(self):
        """Bytes held by all backing arrays (allocation is fixed up front)."""
        return sum(a.nbytes for a in self._arrs)

    @property
    def table_nbytes(self):
        """Bytes of the hashtable side alone (entries, chains, buckets)."""
        table = (self._txid, self._fee, self._hnext, self._ebucket,
                 self._head, self._free, self._meta)
        return sum(a.nbytes for a in table)

    # -- direct access ----------------------------------------------------

    def _buckets_of(self, ids):
        return k.bucket_indices(ids, self.salt, self._mask)

    def bucket_index(self, tx_id):
        return int(self._buckets_of(np.array([tx_id], dtype=np.int64))[0])

    def _find_slot(self, tx_id):
        return k._find_in_bucket(
            tx_id, self.bucket_index(tx_id), self._head, self._hnext, self._txid
        )

    def __contains__(self, tx_id):
        return self._find_slot(tx_id) != -1

    def fee_of(self, tx_id):
        slot = self._find_slot(tx_id)
        if slot == -1:
            raise KeyError(tx_id)
        return int(self._fee[slot])

    def insert(self, tx: Transaction):
        self.insert_many(
            np.array([tx.tx_id], dtype=np.int64), np.array([tx.fee], dtype=np.int64)
        )

    def insert_many(self, ids, fees):
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        fees = np.ascontiguousarray(fees, dtype=np.int64)
        code, idx = k._insert_batch(
            ids, fees, self._salt_u64, self._mask_u64, *self._arrs, self._nil
        )
        if code == 1:
            raise ValueError(f"duplicate tx id {ids[idx]}")
        if code == 2:
            raise ValueError("mempool is full; evict before inserting")
        self._maybe_audit()

    def insert_capped_many(self, ids, fees):
        """Insert keeping only the capacity-best (fee, id) of old ∪ new.

        Returns how many of the new transactions made it in.
        """
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        fees = np.ascontiguousarray(fees, dtype=np.int64)
        code, idx, inserted = k._insert_capped_batch(
            ids, fees, self._salt_u64, self._mask_u64, *self._arrs, self._nil
        )
        if code == 1:
            raise ValueError(f"duplicate tx id {ids[idx]}")
        self._maybe_audit()
        return inserted

    def remove(self, tx_id):
        return self.remove_many(np.array([tx_id], dtype=np.int64)) == 1

    def remove_many(self, ids):
        """Remove every present id (absent ids are ignored); returns count."""
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        removed = k._remove_batch(
            ids, self._salt_u64, self._mask_u64, *self._arrs, self._nil
        )
        self._maybe_audit()
        return removed

    # -- sorted access ----------------------------------------------------

    def min_key(self):
        if self.size == 0:
            raise NotEnoughTransactions("pool is empty")
        mn = k._subtree_min(self._left, self._nil, self._meta[k.META_ROOT])
        return (int(self._fee[mn]), int(self._txid[mn]))

    def evict_lowest(self, count):
        if count > self.size:
            raise ValueError(f"cannot evict {count} of {self.size} transactions")
        k._evict_lowest(count, *self._arrs, self._nil)
        self._maybe_audit()

    def take_top_fee_arrays(self, count):
        """Like take_top_fee but returning raw (ids, fees) int64 arrays."""
        if count > self.size:
            raise NotEnoughTransactions(
                f"requested {count} transactions, pool holds {self.size}"
            )
        out_ids = np.empty(count, dtype=np.int64)
        out_fees = np.empty(count, dtype=np.int64)
        k._take_top(count, out_ids, out_fees, self._txid, self._fee, self._left,
                    self._right, self._parent, self._meta, self._nil)
        return out_ids, out_fees

    def take_top_fee(self, count):
        """The count highest-(fee, id) transactions, fee-descending; pool unchanged."""
        out_ids, out_fees = self.take_top_fee_arrays(count)
        return [Transaction(int(i), int(f)) for i, f in zip(out_ids, out_fees)]

    def iter_sorted(self):
        """All transactions in (fee, id) ascending order."""
        top = self.take_top_fee(self.size) if self.size else []
        return list(reversed(top))

    # -- random access ----------------------------------------------------

    def select_many(self, rng, variant, count):
        """count distinct random selections; pool unchanged.

        Consumes exactly 2*count uniforms from rng (start-bucket draw and
        in-chain draw per selection, in that order).
        """
        us = np.array([rng.random() for _ in range(2 * count)], dtype=np.float64)
        out_ids = np.empty(count, dtype=np.int64)
        out_fees = np.empty(count, dtype=np.int64)
        out_slots = np.empty(count, dtype=np.int64)
        start_random = variant == RandomAccessVariant.PROBE
        done = k._select_many(
            count, us, start_random, self.n_buckets, out_ids, out_fees,
            out_slots, self._txid, self._fee, self._hnext, self._head,
            self._marks,
        )
        if done < count:
            raise NotEnoughTransactions(
                f"requested {count} distinct transactions, pool holds {self.size}"
            )
        return out_ids, out_fees

    def select_random(self, rng, variant, exclude=()):
        """One random selection, ignoring any tx ids in `exclude`."""
        if self.size == 0:
            raise NotEnoughTransactions("pool is empty")
        marked = []
        for tx_id in exclude:
            slot = self._find_slot(tx_id)
            if slot != -1:
                self._marks[slot] = 1
                marked.append(slot)
        try:
            ids, fees = self.select_many(rng, variant, 1)
        finally:
            for slot in marked:
                self._marks[slot] = 0
        return Transaction(int(ids[0]), int(fees[0]))

    # -- auditing ---------------------------------------------------------

    def _maybe_audit(self):
        if self._audit_every_op:
            self.audit()

    def audit(self):
        """Check mirror, chain, and red-black invariants; raise on violation."""
        nil = self._nil
        left, right, parent, color = self._left, self._right, self._parent, self._color
        # chains: every entry's stored bucket matches its hash
        table_ids = {}
        for b in range(self.n_buckets):
            j = int(self._head[b])
            hops = 0
            while j != -1:
                tx = int(self._txid[j])
                if int(self._ebucket[j]) != b or self.bucket_index(tx) != b:
                    raise AssertionError(f"tx {tx} chained in wrong bucket")
                if tx in table_ids:
                    raise AssertionError(f"tx {tx} appears twice in the table")
                table_ids[tx] = int(self._fee[j])
                j = int(self._hnext[j])
                hops += 1
                if hops > self.capacity:
                    raise AssertionError("chain cycle detected")
        # tree: in-order walk, order + node count
        tree_ids = {}
        prev = None
        stack = []
        x = int(self._meta[k.META_ROOT])
        while stack or x != nil:
            while x != nil:
                stack.append(x)
                x = int(left[x])
            x = stack.pop()
            key = (int(self._fee[x]), int(self._txid[x]))
            if prev is not None and key <= prev:
                raise AssertionError("tree order violated")
            prev = key
            tree_ids[key[1]] = key[0]
            x = int(right[x])
        if table_ids != tree_ids:
            raise AssertionError("mirror invariant violated: table != tree")
        if len(table_ids) != self.size:
            raise AssertionError("size counter out of sync")
        # red-black structure
        root = int(self._meta[k.META_ROOT])
        if root != nil and color[root] != k.BLACK:
            raise AssertionError("root is not black")
        if color[nil] != k.BLACK:
            raise AssertionError("sentinel is not black")

        # recursion depth equals tree height, O(log n) for a valid RB tree
        def black_height(x):
            if x == nil:
                return 1
            if color[x] == k.RED:
                if color[left[x]] != k.BLACK or color[right[x]] != k.BLACK:
                    raise AssertionError("red node with red child")
            lh = black_height(int(left[x]))
            rh = black_height(int(right[x]))
            if lh != rh:
                raise AssertionError("unbalanced black height")
            return lh + (1 if color[x] == k.BLACK else 0)

        black_height(root)
        # free list accounts for all unused slots
        if int(self._meta[k.META_FREE]) + self.size != self.capacity:
            raise AssertionError("free list out of sync")
        return True
