"""JSON game files.

A game file is a JSON object::

    {
      "format_version": 1,
      "m": 2,
      "n": 3,
      "payoffs": [...],            # nested [m][n]...[n] lists, or
                                   # {"shape": [m, n, ..., n], "data": [flat row-major]}
      "transform": {"scale": s, "shift": b},   # optional
      "metadata": {...}                        # optional
    }

Floats are written with ``repr`` precision, so a save/load round trip is exact.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from smoothnash.core import AffineTransform, Game
from smoothnash.errors import InvalidArgumentError, ParseError, ResourceLimitError

FORMAT_VERSION = 1


def game_to_dict(game: Game, flat: bool = False) -> Dict[str, Any]:
    payoffs: Any
    if flat:
        payoffs = {"shape": list(game.payoffs.shape), "data": game.payoffs.ravel().tolist()}
    else:
        payoffs = game.payoffs.tolist()
    out = {"format_version": FORMAT_VERSION, "m": game.num_players, "n": game.num_actions,
           "payoffs": payoffs}
    if game.transform is not None:
        out["transform"] = {"scale": game.transform.scale, "shift": game.transform.shift}
    if game.metadata:
        out["metadata"] = game.metadata
    return out


def _field(data: Dict[str, Any], name: str, source: str):
    if name not in data:
        raise ParseError(f"{source}: missing field '{name}'")
    return data[name]


def game_from_dict(data: Any, source: str = "<game>") -> Game:
    if not isinstance(data, dict):
        raise ParseError(f"{source}: top level must be a JSON object")
    version = _field(data, "format_version", source)
    if version != FORMAT_VERSION:
        raise ParseError(f"{source}: field 'format_version': unsupported version {version!r}")
    m, n = _field(data, "m", source), _field(data, "n", source)
    if not (isinstance(m, int) and isinstance(n, int) and m >= 1 and n >= 1):
        raise ParseError(f"{source}: fields 'm' and 'n' must be positive integers")
    raw = _field(data, "payoffs", source)
    expected = (m,) + (n,) * m
    try:
        if isinstance(raw, dict):
            shape = tuple(_field(raw, "shape", f"{source}: field 'payoffs'"))
            flat = np.asarray(_field(raw, "data", f"{source}: field 'payoffs'"), dtype=float)
            if flat.ndim != 1 or flat.size != int(np.prod(shape)):
                raise ParseError(
                    f"{source}: field 'payoffs.data' has {flat.size} values for shape {list(shape)}")
            payoffs = flat.reshape(shape)
        else:
            payoffs = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as err:
        raise ParseError(f"{source}: field 'payoffs': not a numeric array ({err})") from err
    if payoffs.shape != expected:
        raise ParseError(
            f"{source}: field 'payoffs' has shape {list(payoffs.shape)}, expected {list(expected)}")
    transform = None
    if "transform" in data:
        t = data["transform"]
        try:
            transform = AffineTransform(float(t["scale"]), float(t["shift"]))
        except (TypeError, KeyError, ValueError) as err:
            raise ParseError(f"{source}: field 'transform' needs numeric 'scale' and 'shift'") from err
    metadata = data.get("metadata", {})
    if not isinstance(metadata, dict):
        raise ParseError(f"{source}: field 'metadata' must be an object")
    try:
        return Game(payoffs, transform=transform, metadata=metadata)
    except (InvalidArgumentError, ResourceLimitError) as err:
        raise ParseError(f"{source}: field 'payoffs': {err}") from err


def load_game(path: Union[str, Path]) -> Game:
    """Reads a game file, raising ParseError with line or field context."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ParseError(f"{path}: cannot read file ({err.strerror})") from err
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from err
    return game_from_dict(data, str(path))


def save_game(game: Game, path: Union[str, Path], flat: bool = False) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game, flat), indent=1) + "\n")
