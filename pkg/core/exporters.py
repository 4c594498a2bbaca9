"""
CSV exporters with JSON metadata sidecars.
Floats are written with 12 significant digits so identical runs give identical files.
"""
import json
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from core.config import get_settings
from core.exceptions import ExportError
from core.logger import setup_logger

logger = setup_logger(__name__)
settings = get_settings()

FLOAT_FORMAT = "%.12g"
REPORTED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic")


def library_versions() -> Dict[str, str]:
    """Installed versions of the numerical stack, for reproducibility metadata."""
    versions = {}
    for name in REPORTED_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers into JSON-friendly values."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(np.real(value)), "im": float(np.imag(value))}
    if isinstance(value, Path):
        return str(value)
    return value


def export_to_csv(frame: pd.DataFrame, output_path: str) -> str:
    """
    Write a DataFrame as UTF-8 CSV with a header row.

    Args:
        frame: Data to write
        output_path: Destination file path

    Returns:
        Path to created file

    Raises:
        ExportError: If the frame is empty or writing fails
    """
    if frame.empty:
        raise ExportError(
            "Refusing to export an empty table",
            details={"output_path": output_path},
        )

    output_file = Path(output_path)
    output_file.parent.mkdir(parents=True, exist_ok=True)

    try:
        frame.to_csv(
            output_file,
            index=False,
            float_format=FLOAT_FORMAT,
            encoding="utf-8",
            lineterminator="\n",
        )
        logger.info(f"Exported {len(frame)} rows to {output_path}")
        return str(output_file)
    except Exception as e:
        logger.error(f"Failed to export CSV: {e}")
        raise ExportError(
            "Failed to export CSV",
            details={"output_path": output_path, "error": str(e)},
        )


def write_metadata(csv_path: str, metadata: Dict[str, Any]) -> str:
    """
    Write the `<name>.meta.json` sidecar next to a CSV artifact.

    Returns:
        Path to created sidecar
    """
    csv_file = Path(csv_path)
    meta_path = csv_file.with_name(f"{csv_file.stem}.meta.json")
    payload = dict(metadata)
    payload.setdefault("versions", library_versions())
    try:
        meta_path.write_text(
            json.dumps(_jsonable(payload), indent=2, sort_keys=True, ensure_ascii=False),
            encoding="utf-8",
        )
        return str(meta_path)
    except Exception as e:
        logger.error(f"Failed to write metadata: {e}")
        raise ExportError(
            "Failed to write metadata sidecar",
            details={"output_path": str(meta_path), "error": str(e)},
        )


def export_artifact(frame: pd.DataFrame, output_path: str, metadata: Dict[str, Any]) -> str:
    """CSV plus its metadata sidecar."""
    path = export_to_csv(frame, output_path)
    write_metadata(path, metadata)
    return path


def matrix_to_long_frame(matrix: np.ndarray, value_name: str = "value") -> pd.DataFrame:
    """Long `j,k,value` layout of a square matrix, 1-based indices."""
    n_rows, n_cols = matrix.shape
    j_idx, k_idx = np.meshgrid(np.arange(1, n_rows + 1), np.arange(1, n_cols + 1), indexing="ij")
    return pd.DataFrame(
        {"j": j_idx.ravel(), "k": k_idx.ravel(), value_name: np.real(matrix).ravel()}
    )


def create_output_filename(experiment: str, artifact: str, base_path: Optional[str] = None) -> str:
    """
    Build the deterministic output path of one artifact.

    Args:
        experiment: Experiment name, e.g. "combined-figure5"
        artifact: Artifact tag, e.g. "combined"
        base_path: Base directory path (defaults to configured output dir)

    Returns:
        Full output file path
    """
    if base_path is None:
        base_path = settings.output_dir

    Path(base_path).mkdir(parents=True, exist_ok=True)

    slug = experiment.replace("-", "_")
    filename = f"{slug}_{artifact}.csv"
    return str(Path(base_path) / filename)
