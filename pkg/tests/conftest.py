import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from metaseg.segmetrics import image_records
from metaseg.synth import SceneSpec, generate_corpus


@pytest.fixture(scope="session")
def corpus():
    """The seed-pinned default 200-scene corpus."""
    return generate_corpus(SceneSpec(seed=0), 200)


@pytest.fixture(scope="session")
def corpus_records(corpus):
    records = []
    for sc in corpus:
        recs, _, _ = image_records(sc.scene_id, sc.probs, sc.gt)
        records.extend(recs)
    return records


@pytest.fixture(scope="session")
def small_corpus():
    """A handful of small scenes for cheaper end-to-end checks."""
    return generate_corpus(SceneSpec(height=64, width=64, n_shapes=6, seed=7), 12)
