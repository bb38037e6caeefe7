"""
Random sources for the RWI table
Seeded numpy substreams for experiments, scripted replays for hand traces
"""

import logging
from typing import Iterable, List, Optional, Tuple

import numpy as np

from config.config import Config

logger = logging.getLogger(__name__)

SUBSTREAMS = ("pairs", "tie_break", "eviction", "probe")


class ScriptExhaustedError(RuntimeError):
    """A scripted source was asked for more values than it was given"""


class RandomSource:
    """Interface shared by seeded and scripted sources"""

    def next_pair(self, n: int) -> Tuple[int, int]:
        raise NotImplementedError

    def d_head(self, p: int, q: int) -> int:
        """Head of the item's edge in D, uniform over {p, q}"""
        raise NotImplementedError

    def walk_start(self, p: int, q: int) -> int:
        raise NotImplementedError

    def resident_index(self, size: int) -> int:
        raise NotImplementedError

    def probe_stream(self) -> np.random.Generator:
        raise NotImplementedError


class SeededRandomSource(RandomSource):
    """
    One root seed split into four independent substreams
    (pairs, tie_break, eviction, probe), so turning probes on or off
    never shifts the insertion trajectory.
    """

    def __init__(self, seed: int, batch_size: Optional[int] = None):
        if seed < 0 or seed >= 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer: {seed}")
        self.seed = seed
        self.batch_size = batch_size or Config.PAIR_BATCH_SIZE

        children = np.random.SeedSequence(seed).spawn(len(SUBSTREAMS))
        self._pairs, self._tie_break, self._eviction, self._probe = (
            np.random.default_rng(child) for child in children
        )
        logger.debug(f"seed {seed}: substreams {SUBSTREAMS}, batch size {self.batch_size}")

        self._pair_buffer: List[Tuple[int, int]] = []
        self._pair_n: Optional[int] = None
        self._coin_buffer: List[int] = []
        self._uniform_buffer: List[float] = []

    def next_pair(self, n: int) -> Tuple[int, int]:
        if n != self._pair_n:
            # buffered pairs were drawn for another bin count
            self._pair_buffer = []
            self._pair_n = n
        if not self._pair_buffer:
            p = self._pairs.integers(0, n, size=self.batch_size)
            q = self._pairs.integers(0, n - 1, size=self.batch_size)
            q += q >= p
            # popped from the end, so reverse to keep draw order
            self._pair_buffer = list(zip(p.tolist(), q.tolist()))[::-1]
        return self._pair_buffer.pop()

    def d_head(self, p: int, q: int) -> int:
        if not self._coin_buffer:
            self._coin_buffer = self._tie_break.integers(0, 2, size=self.batch_size).tolist()[::-1]
        return p if self._coin_buffer.pop() == 0 else q

    def _uniform(self) -> float:
        if not self._uniform_buffer:
            self._uniform_buffer = self._eviction.random(self.batch_size).tolist()[::-1]
        return self._uniform_buffer.pop()

    def walk_start(self, p: int, q: int) -> int:
        return p if self._uniform() < 0.5 else q

    def resident_index(self, size: int) -> int:
        return int(self._uniform() * size)

    def probe_stream(self) -> np.random.Generator:
        return self._probe


class ScriptedRandomSource(RandomSource):
    """Replays fixed choices; used to reproduce hand-traced insertions"""

    def __init__(self,
                 pairs: Iterable[Tuple[int, int]] = (),
                 d_heads: Iterable[int] = (),
                 walk_starts: Iterable[int] = (),
                 resident_picks: Iterable[int] = (),
                 probe_seed: int = 0):
        self._pairs = list(pairs)[::-1]
        self._d_heads = list(d_heads)[::-1]
        self._walk_starts = list(walk_starts)[::-1]
        self._resident_picks = list(resident_picks)[::-1]
        self._probe = np.random.default_rng(probe_seed)

    @staticmethod
    def _take(queue: List, what: str):
        if not queue:
            raise ScriptExhaustedError(f"script has no more {what}")
        return queue.pop()

    def next_pair(self, n: int) -> Tuple[int, int]:
        return self._take(self._pairs, "pairs")

    def d_head(self, p: int, q: int) -> int:
        head = self._take(self._d_heads, "D heads")
        if head not in (p, q):
            raise ValueError(f"scripted D head {head} is not an end of ({p}, {q})")
        return head

    def walk_start(self, p: int, q: int) -> int:
        start = self._take(self._walk_starts, "walk starts")
        if start not in (p, q):
            raise ValueError(f"scripted walk start {start} is not an end of ({p}, {q})")
        return start

    def resident_index(self, size: int) -> int:
        index = self._take(self._resident_picks, "resident picks")
        if not 0 <= index < size:
            raise ValueError(f"scripted resident pick {index} outside bin of {size}")
        return index

    def probe_stream(self) -> np.random.Generator:
        return self._probe


def derive_seeds(root_seed: int, count: int) -> List[int]:
    """Deterministic 64-bit seeds for `count` trials"""
    state = np.random.SeedSequence(root_seed).generate_state(count * 2, dtype=np.uint32)
    return [int(state[2 * i]) << 32 | int(state[2 * i + 1]) for i in range(count)]


def uniform_index(rng: np.random.Generator, size: int) -> int:
    return int(rng.integers(0, size)) if size > 1 else 0

