"""MOTChallenge files and synthetic scenarios."""
from app.io.mot_format import (
    MotFormatError,
    format_number,
    group_frames,
    parse_mot,
    read_mot,
    render_mot,
    tracks_to_lines,
    write_mot,
)
from app.io.synthetic import (
    SyntheticScenarioError,
    SyntheticSequence,
    identity_vectors,
    render_frame_image,
    scenario_from_settings,
    synth_sequence,
)

__all__ = [
    "MotFormatError",
    "SyntheticScenarioError",
    "SyntheticSequence",
    "format_number",
    "group_frames",
    "identity_vectors",
    "parse_mot",
    "read_mot",
    "render_frame_image",
    "render_mot",
    "scenario_from_settings",
    "synth_sequence",
    "tracks_to_lines",
    "write_mot",
]
