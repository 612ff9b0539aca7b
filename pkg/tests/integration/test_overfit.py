"""Overfitting the small network on one synthetic frame."""
import numpy as np
import pytest

from app.config import Settings
from app.detect import decode
from app.io import render_frame_image
from app.models import BoxAnnotation
from app.nn.model import RelationTrackNet
from app.nn.train import Trainer, TrainingSample

BOXES = [
    BoxAnnotation(l=8, t=8, r=24, b=24, identity=1),
    BoxAnnotation(l=36, t=12, r=52, b=28, identity=2),
    BoxAnnotation(l=16, t=40, r=32, b=56, identity=3),
]


@pytest.fixture(scope="module")
def trained():
    """Model, sample and loss history after 500 Adam steps."""
    config = Settings(backbone_channels=16, num_blocks=1, num_heads=2, num_keys=4, embed_dim=16, seed=0)
    model = RelationTrackNet(channels=16, num_classes=3, config=config)
    sample = TrainingSample.from_boxes(render_frame_image(BOXES, 64, 64, seed=1), BOXES, labels=[0, 1, 2])
    history = Trainer(model, lr=0.05).fit(sample, steps=500)
    return model, sample, history


@pytest.mark.slow
class TestOverfit:
    """Loss reduction and heatmap peaks."""

    def test_total_loss_drops_ninety_percent(self, trained):
        _, _, history = trained
        initial, final = history.total[0], history.total[-1]
        assert final <= initial - 0.9 * abs(initial)

    def test_heatmap_loss_drops(self, trained):
        _, _, history = trained
        assert history.heatmap[-1] < 0.5 * history.heatmap[0]

    def test_box_loss_drops(self, trained):
        _, _, history = trained
        assert history.box[-1] < 0.5 * history.box[0]

    def test_reid_loss_drops(self, trained):
        _, _, history = trained
        assert history.reid[-1] < 0.5 * history.reid[0]

    def test_peaks_at_centers(self, trained):
        model, sample, _ = trained
        output = model(sample.image[None])
        peaks = decode(output.heatmap.data[0], output.offset.data[0], output.size.data[0], max_k=3, score_thresh=0.0)
        found = [d.center for d in peaks]
        assert len(found) == 3
        for x, y in sample.targets.centers:
            assert any(max(abs(x - fx), abs(y - fy)) <= 1 for fx, fy in found)

    def test_outputs_finite(self, trained):
        model, sample, _ = trained
        output = model(sample.image[None])
        assert np.isfinite(output.embedding.data).all()
