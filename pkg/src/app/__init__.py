"""relation-track: joint detection and multi-object tracking."""
