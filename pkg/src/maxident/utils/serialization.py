import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Type, TypeVar

import numpy as np
from pydantic import BaseModel, ValidationError

from ..exceptions import ConfigurationError, InputError

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)

FLOAT_FORMAT = ".17g"


def to_jsonable(payload: Any) -> Any:
    """Plain Python data for json; infinite floats are kept and written as Infinity"""
    if isinstance(payload, BaseModel):
        return to_jsonable(payload.model_dump())
    if isinstance(payload, dict):
        return {str(k): to_jsonable(v) for k, v in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [to_jsonable(v) for v in payload]
    if isinstance(payload, np.ndarray):
        return to_jsonable(payload.tolist())
    if isinstance(payload, np.generic):
        return payload.item()
    return payload


def dumps(payload: Any, indent: int = 2) -> str:
    return json.dumps(to_jsonable(payload), indent=indent, sort_keys=True, allow_nan=True)


def config_hash(config: BaseModel) -> str:
    """sha256 of the canonical JSON of a config"""
    canonical = json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_json(path: str, payload: Any) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(dumps(payload))
            handle.write("\n")
    except OSError as e:
        raise InputError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote JSON report to {path}")


def read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e}") from e


def load_model(path: str, model: Type[ModelT]) -> ModelT:
    """Read and validate a JSON object; schema violations are configuration errors"""
    data = read_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path} must hold a JSON object")
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"{path} does not describe a valid {model.__name__}: {e}") from e


def load_model_list(path: str, model: Type[ModelT]) -> List[ModelT]:
    """Read a JSON list of documents.

    Anything but a nonempty list is malformed input; an entry that parses but
    fails validation is a configuration error, as in load_model.
    """
    data = read_json(path)
    if isinstance(data, dict) and "candidates" in data:
        data = data["candidates"]
    if not isinstance(data, list) or not data:
        raise InputError(f"{path} must hold a nonempty JSON list")
    try:
        return [model.model_validate(item) for item in data]
    except ValidationError as e:
        raise ConfigurationError(f"{path} has an entry that is not a valid {model.__name__}: {e}") from e


def format_float(x: float) -> str:
    return format(float(x), FLOAT_FORMAT)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """Write rows with '\\n' line endings; floats use the exact round-trip format"""
    count = 0
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
                count += 1
    except OSError as e:
        raise InputError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote {count} rows to {path}")
    return count


def write_samples_csv(path: str, pairs: np.ndarray) -> int:
    return write_csv(path, ["u", "v"], (map(float, row) for row in np.asarray(pairs, dtype=float)))


def read_samples_csv(path: str) -> np.ndarray:
    """Read a "u,v" sample file into an (n, 2) array"""
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["u", "v"]:
                raise InputError(f"{path} must start with the header u,v")
            rows = [(float(u), float(v)) for u, v in reader]
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    except ValueError as e:
        raise InputError(f"{path} has a malformed row: {e}") from e
    if not rows:
        raise InputError(f"{path} holds no samples")
    return np.asarray(rows, dtype=float)


def read_probes_csv(path: str) -> np.ndarray:
    """Read a "t1,t2" probe file into an (n, 2) array"""
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["t1", "t2"]:
                raise InputError(f"{path} must start with the header t1,t2")
            rows = [(float(t1), float(t2)) for t1, t2 in reader]
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    except ValueError as e:
        raise InputError(f"{path} has a malformed row: {e}") from e
    return np.asarray(rows, dtype=float).reshape(-1, 2)


def report_envelope(command: str, version: str, digest: str, result: Any) -> Dict[str, Any]:
    """Provenance wrapper shared by every JSON report"""
    return {"command": command, "tool_version": version, "config_hash": digest, "result": to_jsonable(result)}
