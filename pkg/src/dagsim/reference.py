"""Deliberately naive mempool used as an independent oracle in tests.

A flat list with linear scans and sort-on-demand: trivially correct, slow,
and sharing no code with the composite structure it double-checks.
"""

from .model import Transaction


class ReferenceMempool:
    def __init__(self, capacity):
        self.capacity = capacity
        self.txs = []  # (tx_id, fee) in insertion order

    @property
    def size(self):
        return len(self.txs)

    def __contains__(self, tx_id):
        return any(t == tx_id for t, _ in self.txs)

    def insert(self, tx_id, fee):
        if tx_id in self:
            raise ValueError(f"duplicate tx id {tx_id}")
        if self.size >= self.capacity:
            raise ValueError("mempool is full")
        self.txs.append((tx_id, fee))

    def remove(self, tx_id):
        for i, (t, _) in enumerate(self.txs):
            if t == tx_id:
                del self.txs[i]
                return True
        return False

    def evict_lowest(self, count):
        if count > self.size:
            raise ValueError("not enough transactions")
        doomed = sorted(self.txs, key=lambda tf: (tf[1], tf[0]))[:count]
        for t, _ in doomed:
            self.remove(t)

    def take_top_fee(self, count):
        if count > self.size:
            raise ValueError("not enough transactions")
        best = sorted(self.txs, key=lambda tf: (tf[1], tf[0]), reverse=True)
        return [Transaction(t, f) for t, f in best[:count]]

    def insert_capped(self, tx_id, fee):
        """Keep only the capacity-best (fee, id) of the union; True if kept."""
        if self.size < self.capacity:
            self.insert(tx_id, fee)
            return True
        low_id, low_fee = min(self.txs, key=lambda tf: (tf[1], tf[0]))
        if (fee, tx_id) < (low_fee, low_id):
            return False
        self.remove(low_id)
        self.insert(tx_id, fee)
        return True

    def iter_sorted(self):
        return [
            Transaction(t, f)
            for t, f in sorted(self.txs, key=lambda tf: (tf[1], tf[0]))
        ]
