from functools import wraps
import os
from typing import Any

import numpy as np
from pydantic import BaseModel

from core.settings import log_file as log_file_for


def as_float_list(value: Any) -> Any:
    """Nested python floats for json payloads."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: as_float_list(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [as_float_list(v) for v in value]
    return value


def read_logs(names: list[str], lines: int = 100) -> list[str]:
    logs = []
    for name in names:
        log_file = log_file_for(name)
        if not os.path.exists(log_file):
            continue
        with open(log_file, "r") as f:
            logs.extend(f.readlines())

    # lines start with a timestamp
    return [log.strip() for log in sorted(logs)[-lines:]]


def clear_logs(names: list[str]) -> list[str]:
    for name in names:
        log_file = log_file_for(name)
        if os.path.exists(log_file):
            with open(log_file, "w") as f:
                f.write("")
    return []


def requires(*required_keys: str | type[BaseModel]):
    def decorator(func):
        @wraps(func)
        def wrapper(self, body: dict | None = None):
            missing = []
            fields = []
            for field in required_keys:
                if isinstance(field, type) and issubclass(field, BaseModel):
                    fields.extend(
                        name
                        for name, f in field.model_fields.items()
                        if f.is_required()
                    )
                else:
                    fields.append(field)

            if isinstance(body, dict):
                missing = [key for key in fields if key not in body]
            elif fields:
                missing = fields

            if missing:
                msg = (
                    f"Missing required parameter: {missing[0]}"
                    if len(missing) == 1
                    else f"Missing required parameters: {', '.join(missing[:-1])}, and {missing[-1]}"
                )
                return self._err(msg)
            else:
                return func(self, body)

        return wrapper

    return decorator
