"""Per-entity counter-based random streams.

A stream is just ``(key, counter)``: draw ``i`` is a fixed mix of the key and
``i``. Moving an entity to another LP, snapshotting it or replicating it
copies two integers and can never perturb its draws.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    # splitmix64 finalizer
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, entity: int, salt: int = 0) -> int:
    return mix64(mix64(seed & MASK64) ^ mix64((entity << 8) ^ salt))


class CounterRNG:
    __slots__ = ("key", "counter")

    def __init__(self, key: int, counter: int = 0) -> None:
        self.key = key
        self.counter = counter

    @classmethod
    def for_entity(cls, seed: int, entity: int) -> "CounterRNG":
        return cls(stream_key(seed, entity))

    def copy(self) -> "CounterRNG":
        return CounterRNG(self.key, self.counter)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CounterRNG) and (self.key, self.counter) == (other.key, other.counter)

    def __repr__(self) -> str:
        return f"CounterRNG(key={self.key:#x}, counter={self.counter})"

    def next_u64(self) -> int:
        c = self.counter
        self.counter = c + 1
        return mix64(self.key ^ ((c * GOLDEN) & MASK64))

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        # 64-bit multiply-shift; bias is below 2**-40 for the n used here
        return (self.next_u64() * n) >> 64

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed range [lo, hi]."""
        return lo + self.randbelow(hi - lo + 1)

    def sample(self, items: list, k: int) -> list:
        """k distinct items, by partial Fisher-Yates on a copy."""
        pool = list(items)
        k = min(k, len(pool))
        for i in range(k):
            j = i + self.randbelow(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
