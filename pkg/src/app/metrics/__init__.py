"""Sequence-level tracking evaluation."""
from app.metrics.clear import (
    ClearMotResult,
    FrameMatch,
    IdentityScores,
    MetricsError,
    as_frames,
    clear_mot,
    evaluate,
    identity_scores,
    idf1,
    match_frame,
    mt_ml,
)
from app.metrics.report import render_csv, render_summary, render_table

__all__ = [
    "ClearMotResult",
    "FrameMatch",
    "IdentityScores",
    "MetricsError",
    "as_frames",
    "clear_mot",
    "evaluate",
    "identity_scores",
    "idf1",
    "match_frame",
    "mt_ml",
    "render_csv",
    "render_summary",
    "render_table",
]
