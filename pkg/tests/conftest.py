import numpy as np
import pytest

from vibesense import features
from vibesense.devicesim import ActivityKind

FIXTURE_HOME = """\
# two-room fixture used by the recommendation tests: a prominent kitchen
# counter close to the medication target, a semi-hidden sideboard, and a
# fully hidden shelf one room away
room kitchen
room living
adjacent kitchen living
surface counter in kitchen material=wood visibility=1.0
surface sideboard in kitchen material=wood visibility=0.3
surface shelf in living material=wood visibility=0.0
outlet k1 in kitchen
outlet l1 in living
reach k1 counter 1.5
reach k1 sideboard 1.5
reach l1 shelf 1.5
object pillbox on counter tag=medication
"""


@pytest.fixture(scope="session")
def fixture_home_doc() -> str:
    return FIXTURE_HOME


@pytest.fixture(scope="session")
def four_class_events():
    """284 synthesized labeled events, 71 per class."""
    counts = {
        ActivityKind.OBJECT_PLACE: 71,
        ActivityKind.SHOWER: 71,
        ActivityKind.FOOTSTEP: 71,
        ActivityKind.MEDICATION_SHAKE: 71,
    }
    return features.synth_event_dataset(counts, seed=11)


def knn_accuracy(embedding: np.ndarray, labels: np.ndarray, k: int = 5) -> float:
    d = ((embedding[:, None, :] - embedding[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d, np.inf)
    nearest = np.argsort(d, axis=1)[:, :k]
    correct = 0
    for i, row in enumerate(nearest):
        votes = np.bincount(labels[row], minlength=labels.max() + 1)
        correct += votes.argmax() == labels[i]
    return correct / len(labels)
