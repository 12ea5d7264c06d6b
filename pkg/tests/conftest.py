"""Shared fixtures and factories for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mespot.model import Detection, GroundTruthSample
from mespot.synth import FixtureConfig, generate_fixture

settings.register_profile(
    "suite",
    max_examples=60,
    deadline=None,
    database=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def gt(onset: int, offset: int, video_id: str = "v", subject_id: str = "s") -> GroundTruthSample:
    return GroundTruthSample(video_id=video_id, subject_id=subject_id,
                             onset=onset, offset=offset)


def det(center: int, length: int, score: float = 1.0, video_id: str = "v") -> Detection:
    return Detection(video_id=video_id, center=center, length=length, score=score)


def random_instance(rng: np.random.Generator, max_gts: int = 5, max_dets: int = 5,
                    span: int = 400) -> tuple[list[GroundTruthSample], list[Detection]]:
    """One video's worth of random non-overlapping ground truths plus detections.

    Ground-truth intervals never overlap and keep at least one frame of
    separation, matching the annotation convention (and the generator's
    spacing guarantee), so a maximum matching is well defined and unique in
    cardinality.
    """
    n_gts = int(rng.integers(0, max_gts + 1))
    gts: list[GroundTruthSample] = []
    cursor = 0
    for _ in range(n_gts):
        onset = cursor + int(rng.integers(1, 40))
        length = int(rng.integers(2, 52))
        offset = onset + length - 1
        if offset >= span:
            break
        gts.append(gt(onset, offset))
        cursor = offset + 1
    dets = []
    for _ in range(int(rng.integers(0, max_dets + 1))):
        center = int(rng.integers(0, span))
        length = int(rng.integers(2, 60))
        dets.append(det(center, length, score=float(rng.uniform(0, 1))))
    return gts, dets


def brute_force_max_matching(gts, dets, is_hit) -> int:
    """Maximum one-to-one matching size by exhaustive backtracking."""
    edges = [[di for di, d in enumerate(dets) if is_hit(g, d)] for g in gts]

    def best(gi: int, used: frozenset) -> int:
        if gi == len(edges):
            return 0
        top = best(gi + 1, used)  # leave this gt unmatched
        for di in edges[gi]:
            if di not in used:
                top = max(top, 1 + best(gi + 1, used | {di}))
        return top

    return best(0, frozenset())


SMALL_FIXTURE = FixtureConfig(
    seed=3,
    videos=4,
    subjects=2,
    frames_per_video=400,
    fps=100.0,
    frame_size=(64, 64),
    mes_per_video=(1, 2),
    me_length=(10, 30),
)


@pytest.fixture(scope="session")
def small_fixture(tmp_path_factory):
    """A 4-video fixture dataset on disk, shared by io/harness/cli tests."""
    out = tmp_path_factory.mktemp("fixture")
    manifest, tracks, events = generate_fixture(SMALL_FIXTURE, out)
    return out, manifest, tracks, events
