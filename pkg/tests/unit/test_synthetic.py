"""Unit tests for synthetic scenarios."""
import numpy as np
import pytest

from app.config import Settings
from app.io import SyntheticScenarioError, identity_vectors, render_frame_image, scenario_from_settings, synth_sequence
from app.models import BoxAnnotation, SyntheticScenario
from app.tracking.assignment import iou_matrix


def scenario(**overrides) -> SyntheticScenario:
    values = dict(seed=3, n_identities=4, n_frames=20, width=640, height=480, embedding_dim=16)
    values.update(overrides)
    return SyntheticScenario(**values)


class TestIdentityVectors:
    """Oracle appearance vectors."""

    def test_orthonormal(self):
        vectors = identity_vectors(np.random.default_rng(0), 5, 8)
        np.testing.assert_allclose(vectors @ vectors.T, np.eye(5), atol=1e-10)

    def test_too_many_for_dimension(self):
        with pytest.raises(SyntheticScenarioError, match="orthogonal"):
            identity_vectors(np.random.default_rng(0), 9, 8)

    def test_random_unit_vectors(self):
        vectors = identity_vectors(np.random.default_rng(0), 12, 8, orthogonal=False)
        np.testing.assert_allclose(np.linalg.norm(vectors, axis=1), 1.0)


class TestSynthSequence:
    """Ground truth and oracle detections."""

    def test_deterministic(self):
        first, second = synth_sequence(scenario(dropout=0.2, embedding_noise=0.1)), synth_sequence(scenario(dropout=0.2, embedding_noise=0.1))
        assert first.gt_lines() == second.gt_lines()
        assert first.det_lines() == second.det_lines()
        np.testing.assert_array_equal(first.embedding_rows(), second.embedding_rows())

    def test_seed_changes_sequence(self):
        assert synth_sequence(scenario(seed=1)).gt_lines() != synth_sequence(scenario(seed=2)).gt_lines()

    def test_noiseless_embeddings_exact(self):
        sequence = synth_sequence(scenario())
        for frame, embeddings in sequence.embeddings.items():
            for emb, identity in zip(embeddings, sequence.detection_identities[frame]):
                np.testing.assert_array_equal(emb, sequence.identity_embeddings[identity - 1])

    def test_noisy_embeddings_unit_norm(self):
        sequence = synth_sequence(scenario(embedding_noise=0.3))
        np.testing.assert_allclose(np.linalg.norm(sequence.embedding_rows(), axis=1), 1.0)

    def test_every_identity_every_frame(self):
        sequence = synth_sequence(scenario(dropout=0.5))
        for boxes in sequence.ground_truth.values():
            assert sorted(b.identity for b in boxes) == [1, 2, 3, 4]

    def test_dropout_spares_first_and_last_frame(self):
        sequence = synth_sequence(scenario(dropout=0.9))
        assert len(sequence.detections[1]) == 4
        assert len(sequence.detections[20]) == 4
        assert sum(len(d) for d in sequence.detections.values()) < 4 * 20

    def test_boxes_inside_image(self):
        sequence = synth_sequence(scenario(n_identities=10))
        for boxes in sequence.ground_truth.values():
            for b in boxes:
                assert b.l >= 0 and b.t >= 0 and b.r <= 640 and b.b <= 480

    def test_crossing_pairs_swap_and_overlap(self):
        sequence = synth_sequence(scenario(n_identities=2, n_frames=21, motion="crossing", box_size=(40.0, 80.0)))
        first = {b.identity: b for b in sequence.ground_truth[1]}
        last = {b.identity: b for b in sequence.ground_truth[21]}
        middle = {b.identity: b for b in sequence.ground_truth[11]}
        assert first[1].center[0] == pytest.approx(last[2].center[0])
        assert first[2].center[0] == pytest.approx(last[1].center[0])
        assert first[1].center[1] == pytest.approx(first[2].center[1])
        assert iou_matrix([middle[1].box], [middle[2].box])[0, 0] > 0.9

    def test_boxes_must_fit(self):
        with pytest.raises(SyntheticScenarioError, match="fit"):
            synth_sequence(scenario(box_size=(700.0, 50.0)))

    def test_detection_rows_align_with_embeddings(self):
        sequence = synth_sequence(scenario(dropout=0.3))
        assert len(sequence.det_lines()) == sequence.embedding_rows().shape[0]

    def test_frames_in_order(self):
        frames = synth_sequence(scenario()).frames()
        assert [f.frame for f in frames] == list(range(1, 21))


class TestScenarioFromSettings:
    """Settings to scenario mapping."""

    def test_defaults(self):
        s = scenario_from_settings(Settings())
        assert (s.n_identities, s.n_frames, s.width, s.height) == (20, 200, 1920, 1080)

    def test_overrides(self):
        assert scenario_from_settings(Settings(), dropout=0.1).dropout == 0.1


class TestRenderFrameImage:
    """Rasterised frames for the neural path."""

    def test_shape_and_range(self):
        image = render_frame_image([BoxAnnotation(l=8, t=8, r=24, b=40, identity=1)], 64, 48)
        assert image.shape == (48, 64, 3)
        assert image.dtype == np.float32
        assert image.min() >= 0.0 and image.max() <= 1.0

    def test_box_brighter_than_background(self):
        image = render_frame_image([BoxAnnotation(l=8, t=8, r=24, b=40, identity=1)], 64, 48)
        assert image[8:40, 8:24].mean() > 2 * image[:, 40:].mean()
