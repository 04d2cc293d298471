import random

import pytest

SENTINEL = "zzfabricated"

CONTEXT_WORDS = [
    "savings", "duration", "employment", "housing", "age", "purpose",
    "installment", "residence", "history", "stable", "short", "long",
]


def synthetic_pairs(n: int = 300, k: int = 3, seed: int = 5) -> list[dict]:
    """Separable fixture: hallucinated claims carry a sentinel token."""
    rng = random.Random(seed)
    pairs = []
    for i in range(n):
        words = rng.sample(CONTEXT_WORDS, 4)
        context = "; ".join(f"{w}: {rng.randint(1, 99)}th percentile" for w in words)
        # label pattern deliberately independent of the fold assignment (i % k)
        label = 1 if (i // k) % 3 == 0 else 0
        if label:
            claim = f"The {rng.choice(words)} value is {SENTINEL} beyond the records."
        else:
            claim = f"The {rng.choice(words)} value matches the profile."
        pairs.append({"context": context, "claim": claim, "label": label, "fold": i % k})
    return pairs


@pytest.fixture(scope="session")
def pairs300():
    return synthetic_pairs()
