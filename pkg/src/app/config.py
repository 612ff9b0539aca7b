"""Configuration management using pydantic-settings."""
from pathlib import Path
from typing import Any, Dict, Literal, Union

from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict


class ConfigError(ValueError):
    """Config file could not be parsed or validated."""
    pass


class Settings(BaseSettings):
    """Pipeline settings; environment variables use the RELTRACK_ prefix."""

    model_config = SettingsConfigDict(
        env_prefix="RELTRACK_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="forbid",
    )

    # Logging
    log_level: str = Field("INFO", description="Root log level")

    # Runtime
    seed: int = Field(0, description="Seed for weight init and synthetic data")
    dtype: Literal["float32", "float64"] = Field("float32", description="Runtime precision")

    # Model
    backbone_channels: int = Field(32, ge=1, description="Width C of the backbone output")
    gcd_reduction: int = Field(4, ge=1, description="Squeeze ratio; C_mid = C / gcd_reduction")
    gcd_epsilon: float = Field(1e-5, gt=0, description="Layer-norm stabilizer")
    use_gcd: bool = Field(True, description="Disentangle features before the heads")
    attention: Literal["deformable", "dense"] = Field("deformable", description="Encoder attention")
    num_keys: int = Field(9, ge=1, description="Key samples per query and head (N_k)")
    num_heads: int = Field(4, ge=1, description="Attention heads (N_head)")
    ffn_ratio: int = Field(4, ge=1, description="FFN hidden width as a multiple of C")
    num_blocks: int = Field(1, ge=1, description="Stacked encoder blocks")
    embed_dim: int = Field(64, ge=1, description="ReID embedding dimension D")

    # Detection
    heatmap_alpha: float = Field(2.0, description="Focal exponent alpha")
    heatmap_beta: float = Field(4.0, description="Penalty-reduction exponent beta")
    min_overlap: float = Field(0.7, gt=0, lt=1, description="Gaussian radius overlap rule")
    score_thresh: float = Field(0.4, ge=0, le=1, description="Decode score threshold")
    max_k: int = Field(128, ge=1, description="Maximum detections per frame")

    # Association
    ema_momentum: float = Field(0.9, ge=0, le=1, description="Track embedding smoothing")
    embedding_thresh: float = Field(0.4, ge=0, le=2, description="Max cosine cost in stage 1")
    iou_match_thresh: float = Field(0.5, ge=0, le=1, description="Min IoU in stage 2")
    init_score: float = Field(0.5, ge=0, le=1, description="Min score to start a track")
    max_lost: int = Field(30, ge=0, description="Frames a lost track survives")
    gap_max: int = Field(30, ge=0, description="Longest gap filled by interpolation")
    motion_gating: bool = Field(True, description="Forbid stage-1 pairs outside the motion gate")
    gating_sigma: float = Field(3.0, gt=0, description="Gate radius in predicted std devs")
    motion_noise_scale: float = Field(1.0, ge=0, description="Scale on Kalman noise terms")
    fill_gaps: bool = Field(True, description="Interpolate re-matched track gaps")

    # Metrics
    eval_iou_thresh: float = Field(0.5, gt=0, le=1, description="Min IoU for a CLEAR match")
    mt_thresh: float = Field(0.8, ge=0, le=1, description="Coverage for mostly tracked")
    ml_thresh: float = Field(0.2, ge=0, le=1, description="Coverage for mostly lost")
    match_continuity: bool = Field(True, description="Keep previous-frame correspondences")

    # Synthetic
    synth_identities: int = Field(20, ge=1, description="Identities in the scenario")
    synth_frames: int = Field(200, ge=1, description="Frames in the scenario")
    synth_width: int = Field(1920, ge=16, description="Image width in pixels")
    synth_height: int = Field(1080, ge=16, description="Image height in pixels")
    synth_motion: Literal["linear", "crossing"] = Field("linear", description="Path model")
    synth_dropout: float = Field(0.0, ge=0, lt=1, description="Detection dropout rate")
    synth_embedding_noise: float = Field(0.0, ge=0, description="Per-frame embedding noise")
    synth_embedding_dim: int = Field(64, ge=1, description="Oracle embedding dimension")

    # Worker
    workers: int = Field(1, ge=1, description="Threads for multi-sequence tracking")

    def ensure_directories(self, *paths: Union[str, Path]) -> None:
        """Create output directories if they don't exist."""
        for path in paths:
            Path(path).mkdir(parents=True, exist_ok=True)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def render_config(config: Settings) -> str:
    """Echo every field as ``key=value`` in declaration order."""
    lines = [f"{name}={_format_value(getattr(config, name))}" for name in Settings.model_fields]
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> Dict[str, str]:
    """
    Parse line-based ``key=value`` text.

    Blank lines and ``#`` comments are skipped.

    Raises:
        ConfigError: On a line without ``=``, an unknown key, or a repeated key.
    """
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in Settings.model_fields:
            raise ConfigError(f"line {number}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {number}: duplicate key {key!r}")
        values[key] = value
    return values


def load_config(path: Union[str, Path, None] = None, **overrides: Any) -> Settings:
    """
    Build settings from defaults, environment, and an optional config file.

    Raises:
        ConfigError: If the file is missing, malformed, or has invalid values.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError(f"config file not found: {config_path}")
        values.update(parse_config_text(config_path.read_text(encoding="utf-8")))
    values.update(overrides)
    try:
        return Settings(**values)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


settings = Settings()
