#  Copyright 2022, roi-reacher authors
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.

"""
Conversion between JSON documents and configuration dataclasses.
Unknown keys are rejected, missing keys take the dataclass default.
"""

import dataclasses
import hashlib
import json
from enum import Enum
from typing import Any, Dict, Type, TypeVar, Union, get_args, get_origin, get_type_hints

from roi_reacher.utils.errors import ConfigurationError


T = TypeVar("T")


def _convert(value: Any, field_type: Any, path: str) -> Any:
    origin = get_origin(field_type)
    if origin is Union:
        args = [a for a in get_args(field_type) if a is not type(None)]
        if value is None:
            return None
        return _convert(value, args[0], path)
    if dataclasses.is_dataclass(field_type):
        return from_dict(field_type, value, path=path)
    if isinstance(field_type, type) and issubclass(field_type, Enum):
        try:
            return field_type(value)
        except ValueError:
            valid = [e.value for e in field_type]
            raise ConfigurationError(f"{path}: invalid value {value!r}, expected one of {valid}")
    if origin in (list, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{path}: expected a list, got {value!r}")
        args = get_args(field_type)
        item_type = args[0] if len(args) > 0 else Any
        items = [_convert(v, item_type, f"{path}[{i}]") for i, v in enumerate(value)]
        return tuple(items) if origin is tuple else items
    if field_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if field_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}: expected an integer, got {value!r}")
        return value
    if field_type is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{path}: expected a boolean, got {value!r}")
        return value
    if field_type is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def from_dict(cls: Type[T], data: Dict[str, Any], path: str = "") -> T:
    """
    Build a (nested) dataclass from a dictionary.
    :param cls: dataclass type
    :param data: parsed JSON document
    :param path: dotted path used in error messages
    :return: dataclass instance, validated by its __post_init__
    """
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path or 'document'}: expected a mapping, got {data!r}")
    hints = get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data.keys()) - set(fields.keys()))
    if len(unknown) > 0:
        dotted = ", ".join(f"{path}.{k}" if path else k for k in unknown)
        raise ConfigurationError(f"unknown key(s): {dotted}")
    kwargs = dict()
    for name, value in data.items():
        field_path = f"{path}.{name}" if path else name
        kwargs[name] = _convert(value, hints[name], field_path)
    try:
        return cls(**kwargs)
    except (AssertionError, ValueError) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"{path or cls.__name__}: {e}")


def to_dict(instance: Any) -> Any:
    """
    Dataclass to JSON compatible structure, enums are replaced by their values.
    """
    if dataclasses.is_dataclass(instance):
        return {f.name: to_dict(getattr(instance, f.name)) for f in dataclasses.fields(instance)}
    if isinstance(instance, Enum):
        return instance.value
    if isinstance(instance, (list, tuple)):
        return [to_dict(v) for v in instance]
    if isinstance(instance, dict):
        return {k: to_dict(v) for k, v in instance.items()}
    return instance


def canonical_json(document: Any) -> str:
    """
    Stable JSON text: sorted keys, no whitespace. Used for hashing.
    """
    return json.dumps(to_dict(document), sort_keys=True, separators=(",", ":"))


def config_hash(*documents: Any) -> str:
    """
    SHA-256 of the canonical JSON of the provided documents.
    """
    digest = hashlib.sha256()
    for document in documents:
        digest.update(canonical_json(document).encode("utf-8"))
    return digest.hexdigest()
