"""Pair two classifiers' slice predictions for a McNemar comparison."""

from typing import Dict, List, Optional, Sequence, Tuple

from bobnet.evaluation.metrics import McNemarResult, mcnemar
from bobnet.localization.fusion import ProfileRow

Key = Tuple[str, int, str]


def _first_divergence(left: Sequence[Key], right: Sequence[Key]) -> Optional[Key]:
    for a, b in zip(left, right):
        if a != b:
            return min(a, b)
    if len(left) != len(right):
        longer = left if len(left) > len(right) else right
        return longer[min(len(left), len(right))]
    return None


def _keyed(rows: Sequence[ProfileRow]) -> Dict[Key, float]:
    return {row.key: row.probability for row in rows}


def compare_predictions(a_rows: Sequence[ProfileRow], b_rows: Sequence[ProfileRow],
                        label_rows: Sequence[ProfileRow], threshold: float = 0.5) -> McNemarResult:
    """McNemar test of two prediction sets against shared labels.

    Predictions and labels are thresholded; a slice is correct when the
    thresholded prediction equals the thresholded label.

    Raises:
        ValueError: no shared keys, or the three files disagree on keys.
    """
    a, b, labels = _keyed(a_rows), _keyed(b_rows), _keyed(label_rows)
    if not a or not (a.keys() & b.keys() & labels.keys()):
        raise ValueError("prediction and label files share no (plane, slice_index, structure) keys")

    keys_a, keys_b, keys_l = sorted(a), sorted(b), sorted(labels)
    for other_name, other in (("b", keys_b), ("labels", keys_l)):
        divergent = _first_divergence(keys_a, other)
        if divergent is not None:
            raise ValueError(
                f"key mismatch between a and {other_name}: first divergent key "
                f"{divergent[0]},{divergent[1]},{divergent[2]}"
            )

    correct_a: List[bool] = []
    correct_b: List[bool] = []
    for key in keys_a:
        truth = labels[key] >= threshold
        correct_a.append((a[key] >= threshold) == truth)
        correct_b.append((b[key] >= threshold) == truth)
    return mcnemar(correct_a, correct_b)
