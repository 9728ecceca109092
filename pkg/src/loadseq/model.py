from __future__ import annotations
from enum import Enum


class CELL(str, Enum):
    LSTM = "lstm"
    GRU = "gru"

class MODE(str, Enum):
    MANY_TO_ONE = "many_to_one"
    MANY_TO_MANY = "many_to_many"

    @classmethod
    def parse(cls, raw: "str | MODE") -> "MODE":
        """Accept both ``many-to-one`` (CLI spelling) and ``many_to_one``."""
        if isinstance(raw, MODE):
            return raw
        return cls(str(raw).strip().lower().replace("-", "_"))

class ACTIVATION(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"

class OPTIMIZER(str, Enum):
    SGD = "sgd"
    ADAM = "adam"

class SEASON(str, Enum):
    SUMMER = "summer"
    WINTER = "winter"

class SEARCH(str, Enum):
    GRID = "grid"
    RANDOM = "random"

class FNN_VARIANT(str, Enum):
    ONE_YEAR = "one_year"
    THREE_YEAR = "three_year"
