"""Region-pattern interaction matrix, sparse-aware splitting, negative sampling.

Interactions are implicit: a stored (user, item) pair means the region adopted
the pattern; absence means no history. The split is per-user 80/20 train/test
with overrides for very sparse users (a single interaction stays in training;
exactly two interactions split one/one), then a flat 20% of the pooled
training interactions is carved out as validation without ever emptying a
user's training set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .kg import Vocab


class SaturationError(RuntimeError):
    """Negative sampling requested for a user who interacted with every item."""


class InteractionMatrix:
    """Immutable sparse set of positive (user, item) pairs."""

    __slots__ = ("num_users", "num_items", "_by_user")

    def __init__(self, num_users: int, num_items: int, pairs: Iterable[tuple[int, int]]) -> None:
        if num_users <= 0 or num_items <= 0:
            raise ValueError("num_users and num_items must be positive")
        per_user: list[set[int]] = [set() for _ in range(num_users)]
        for user, item in pairs:
            if not 0 <= user < num_users:
                raise ValueError(f"user index out of range: {user}")
            if not 0 <= item < num_items:
                raise ValueError(f"item index out of range: {item}")
            per_user[user].add(item)
        self.num_users = num_users
        self.num_items = num_items
        self._by_user: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted(items)) for items in per_user
        )

    def items_of(self, user: int) -> tuple[int, ...]:
        if not 0 <= user < self.num_users:
            raise ValueError(f"user index out of range: {user}")
        return self._by_user[user]

    def has(self, user: int, item: int) -> bool:
        return item in set(self.items_of(user))

    def pairs(self) -> Iterator[tuple[int, int]]:
        for user, items in enumerate(self._by_user):
            for item in items:
                yield user, item

    @property
    def num_interactions(self) -> int:
        return sum(len(items) for items in self._by_user)

    def active_users(self) -> list[int]:
        return [u for u, items in enumerate(self._by_user) if items]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, InteractionMatrix)
            and self.num_users == other.num_users
            and self.num_items == other.num_items
            and self._by_user == other._by_user
        )


@dataclass(frozen=True)
class DataSplit:
    train: InteractionMatrix
    validation: InteractionMatrix
    test: InteractionMatrix
    seed: int


def _test_count(n: int) -> int:
    if n <= 1:
        return 0
    if n == 2:
        return 1
    return int(0.2 * n)


def split_interactions(matrix: InteractionMatrix, seed: int) -> DataSplit:
    """Deterministic per-user train/test split plus a global validation carve.

    Per user with n interactions, floor(0.2 n) go to test (n=2 sends exactly
    one; n=1 sends none), the rest to train. Then floor(0.2 * |train pool|)
    pairs move from train to validation, skipping any pair whose removal
    would leave its user with an empty training set.
    """
    rng = np.random.default_rng(seed)
    train_pairs: list[tuple[int, int]] = []
    test_pairs: list[tuple[int, int]] = []
    train_count = [0] * matrix.num_users
    for user in range(matrix.num_users):
        items = matrix.items_of(user)
        if not items:
            continue
        order = rng.permutation(len(items))
        cut = _test_count(len(items))
        test_pairs.extend((user, items[j]) for j in order[:cut])
        kept = [items[j] for j in order[cut:]]
        train_pairs.extend((user, item) for item in kept)
        train_count[user] = len(kept)

    target = int(0.2 * len(train_pairs))
    valid_pairs: list[tuple[int, int]] = []
    moved: set[int] = set()
    for idx in rng.permutation(len(train_pairs)):
        if len(valid_pairs) >= target:
            break
        user, item = train_pairs[idx]
        if train_count[user] <= 1:
            continue
        valid_pairs.append((user, item))
        train_count[user] -= 1
        moved.add(int(idx))
    remaining = [pair for i, pair in enumerate(train_pairs) if i not in moved]

    shape = (matrix.num_users, matrix.num_items)
    return DataSplit(
        train=InteractionMatrix(*shape, remaining),
        validation=InteractionMatrix(*shape, valid_pairs),
        test=InteractionMatrix(*shape, test_pairs),
        seed=seed,
    )


def sample_negative(train: InteractionMatrix, user: int, rng: np.random.Generator) -> int:
    """Uniform item with no training interaction for ``user``.

    Rejection sampling while the positive set is small; explicit complement
    enumeration once it covers half the catalog.
    """
    positives = train.items_of(user)
    num_items = train.num_items
    if len(positives) >= num_items:
        raise SaturationError(f"user {user} interacted with all {num_items} items")
    if len(positives) * 2 >= num_items:
        pool = sorted(set(range(num_items)) - set(positives))
        return int(pool[rng.integers(len(pool))])
    positive_set = set(positives)
    while True:
        item = int(rng.integers(num_items))
        if item not in positive_set:
            return item


def write_interactions_tsv(
    path: str | Path, matrix: InteractionMatrix, users: Vocab, items: Vocab
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for user, item in matrix.pairs():
            fh.write(f"{users.name_of(user)}\t{items.name_of(item)}\n")


def read_interaction_pairs(path: str | Path) -> list[tuple[str, str]]:
    """Raw (region id, pattern id) string pairs; ``#`` comments ignored."""
    pairs: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 tab-separated fields")
            pairs.append((parts[0], parts[1]))
    return pairs


def encode_interactions(
    pairs: Iterable[tuple[str, str]], users: Vocab, items: Vocab
) -> InteractionMatrix:
    return InteractionMatrix(
        len(users), len(items), ((users.id_of(u), items.id_of(i)) for u, i in pairs)
    )


def item_vocab_from_pairs(pair_lists: Iterable[Iterable[tuple[str, str]]]) -> Vocab:
    """Deterministic item vocabulary: lexicographically sorted union."""
    names: set[str] = set()
    for pairs in pair_lists:
        names.update(item for _, item in pairs)
    return Vocab(sorted(names))


def write_split(
    out_dir: str | Path, split: DataSplit, users: Vocab, items: Vocab
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", split.train), ("validation", split.validation), ("test", split.test)):
        write_interactions_tsv(out / f"{name}.tsv", part, users, items)
    manifest = {
        "seed": split.seed,
        "num_users": split.train.num_users,
        "num_items": split.train.num_items,
        "interactions": {
            "train": split.train.num_interactions,
            "validation": split.validation.num_interactions,
            "test": split.test.num_interactions,
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def read_split(split_dir: str | Path, users: Vocab, items: Vocab) -> DataSplit:
    split_dir = Path(split_dir)
    manifest = json.loads((split_dir / "manifest.json").read_text(encoding="utf-8"))
    parts = {
        name: encode_interactions(
            read_interaction_pairs(split_dir / f"{name}.tsv"), users, items
        )
        for name in ("train", "validation", "test")
    }
    return DataSplit(
        train=parts["train"],
        validation=parts["validation"],
        test=parts["test"],
        seed=int(manifest["seed"]),
    )
