"""
Experiment config loading.
Reads a JSON file into ExperimentConfig and applies command-line overrides.
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError as SchemaError

from core.config import get_settings
from core.exceptions import ConfigurationError, DataNotFoundError
from core.logger import setup_logger
from core.schema import ExperimentConfig

logger = setup_logger(__name__)


def _field_errors(error: SchemaError) -> Dict[str, str]:
    """Flatten pydantic errors into {"section.field": message}."""
    return {
        ".".join(str(part) for part in err["loc"]) or "<root>": err["msg"]
        for err in error.errors()
    }


def parse_config(file_path: str) -> ExperimentConfig:
    """
    Parse and validate an experiment config file.

    Args:
        file_path: Path to a JSON config

    Returns:
        Validated config with defaults filled in

    Raises:
        DataNotFoundError: If the file doesn't exist
        ConfigurationError: If the file is not valid JSON or violates the schema
    """
    path = Path(file_path)
    if not path.exists():
        raise DataNotFoundError(
            f"Config file not found: {file_path}",
            details={"file_path": file_path},
        )

    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(
            f"Invalid JSON in {path.name}",
            details={"file_path": file_path, "line": e.lineno, "error": e.msg},
        )
    return parse_config_dict(raw, source=file_path)


def parse_config_dict(raw: Any, source: str = "<dict>") -> ExperimentConfig:
    """Validate an already-decoded config."""
    if not isinstance(raw, dict):
        raise ConfigurationError(
            "Config root must be a JSON object",
            details={"source": source, "type": type(raw).__name__},
        )
    try:
        config = ExperimentConfig.model_validate(raw)
    except SchemaError as e:
        errors = _field_errors(e)
        logger.error(f"Config {source} failed validation: {errors}")
        raise ConfigurationError(
            "Config violates the experiment schema",
            details={"source": source, "errors": errors},
        )
    logger.info(f"Loaded config for experiment '{config.experiment}' from {source}")
    return config


def serialize_config(config: ExperimentConfig) -> str:
    """JSON text that parses back to an equal config."""
    return config.model_dump_json(indent=2)


def apply_overrides(
    config: ExperimentConfig,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    output_dir: Optional[str] = None,
) -> ExperimentConfig:
    """
    Resolve seed, threads and output directory.

    Command-line values win over the config file, which wins over Settings.
    """
    settings = get_settings()
    resolved = {
        "seed": seed if seed is not None else (config.seed if config.seed is not None else settings.master_seed),
        "threads": threads if threads is not None else (config.threads or settings.threads),
        "output_dir": output_dir or config.output_dir or settings.output_dir,
    }
    try:
        return ExperimentConfig.model_validate({**config.model_dump(), **resolved})
    except SchemaError as e:
        raise ConfigurationError(
            "Command-line override violates the experiment schema",
            details={"errors": _field_errors(e)},
        )
