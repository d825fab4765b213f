"""
data_loader.py

Reads and writes every file format the package touches.

Functionality includes:
- Loading the flat `key=value` experiment config (python-dotenv) into an `ExperimentConfig`.
- Loading custom link spectra (`volume <v>` header, then `mu2 multiplicity` lines).
- Reading/writing the Bessel reference table (`kind nu x re im`, %.17e).
- Writing CSV reports (pandas, %.17e) headed by a config-hash comment, including kernel dumps.
"""

# -------------------- IMPORTS --------------------
# Standard Library
import os
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Tuple

# Third-Party Libraries
import numpy as np
import pandas as pd
from pydantic import ValidationError

# Environment & Configuration
from dotenv import dotenv_values

# Internal Modules
from errors import ConfigurationError
from schemas import CircleLink, CustomLink, ExperimentConfig, LinkConfig, LinkSpec, SphereLink

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17e"


# -------------------- CONFIG LOADING --------------------
def nest_dotted(flat: Dict[str, str]) -> Dict:
    """Turn {'grid.rmax': '40'} into {'grid': {'rmax': '40'}}."""
    nested: Dict = {}
    for key, value in flat.items():
        if value is None:
            raise ConfigurationError(f"config key {key!r} has no value")
        node = nested
        *parents, leaf = key.strip().split(".")
        for part in parents:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"config key {key!r} collides with a scalar entry")
            node = child
        if leaf in node and isinstance(node[leaf], dict):
            raise ConfigurationError(f"config key {key!r} collides with a section")
        node[leaf] = value
    return nested


def load_config(path: str | os.PathLike | None) -> ExperimentConfig:
    """
    Load and validate an experiment config.

    Args:
        path: Path to a `key=value` file, or None for the built-in defaults.

    Returns:
        ExperimentConfig: The validated configuration.
    """
    if path is None:
        return ExperimentConfig()
    if not Path(path).is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        return ExperimentConfig.model_validate(nest_dotted(dotenv_values(path, interpolate=False)))
    except ValidationError as exc:
        raise ConfigurationError(f"invalid config {path}:\n{exc}") from exc


# -------------------- CUSTOM SPECTRA --------------------
def load_custom_spectrum(path: str | os.PathLike, volume: float | None = None) -> CustomLink:
    """Parse a custom link spectrum file; `volume` overrides the file header when given."""
    levels: List[Tuple[float, int]] = []
    file_volume = None
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            fields = text.split()
            try:
                if fields[0] == "volume":
                    file_volume = float(fields[1])
                else:
                    levels.append((float(fields[0]), int(fields[1])))
            except (IndexError, ValueError) as exc:
                raise ConfigurationError(f"{path}:{lineno}: malformed spectrum line {line.rstrip()!r}") from exc
    volume = volume if volume is not None else file_volume
    if volume is None:
        raise ConfigurationError(f"{path}: missing 'volume <v>' header")
    try:
        return CustomLink(levels=levels, volume=volume)
    except ValidationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def load_link(config: LinkConfig) -> LinkSpec:
    """Link described by the `link.*` section; custom spectra are read from `link.file`."""
    if config.kind == "circle":
        return CircleLink(circumference=config.circumference)
    if config.kind == "sphere":
        return SphereLink(dim=config.dim)
    if not config.file:
        raise ConfigurationError("link.kind=custom requires link.file")
    return load_custom_spectrum(config.file, config.volume)


# -------------------- REFERENCE TABLE --------------------
def write_reference_table(records: Iterable[Tuple[str, float, float, float, float]], path: str | os.PathLike) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for kind, nu, x, re, im in records:
            handle.write(f"{kind} {nu:.17e} {x:.17e} {re:.17e} {im:.17e}\n")
    logger.info("wrote reference table %s", path)
    return str(path)


def load_reference_table(path: str | os.PathLike) -> pd.DataFrame:
    """Reference records as a DataFrame with columns kind, nu, x, value (complex)."""
    frame = pd.read_csv(path, sep=" ", header=None, names=["kind", "nu", "x", "re", "im"], comment="#")
    frame["value"] = frame["re"].to_numpy() + 1j * frame["im"].to_numpy()
    return frame


# -------------------- CSV REPORTS --------------------
def write_csv(frame: pd.DataFrame, path: str | os.PathLike, config_hash: str) -> str:
    """Write `frame` with a `# config-hash:` header line and %.17e floats."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"# config-hash: {config_hash}\n")
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT)
    logger.info("wrote %s (%d rows)", path, len(frame))
    return str(path)


def read_csv(path: str | os.PathLike) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def kernel_frame(nodes: np.ndarray, values: np.ndarray) -> pd.DataFrame:
    """Row-major `r,s,re,im` table of a kernel sampled on nodes x nodes."""
    count = nodes.size
    return pd.DataFrame(
        {
            "r": np.repeat(nodes, count),
            "s": np.tile(nodes, count),
            "re": np.real(values).ravel(),
            "im": np.imag(values).ravel(),
        }
    )
