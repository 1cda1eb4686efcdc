from typing import NamedTuple, Protocol

import numpy as np

from environment import FlowVector


class FieldEvaluation(NamedTuple):
    delta: FlowVector
    xdot: np.ndarray


class VectorField(Protocol):
    kind: str

    def field(self, x: np.ndarray) -> FieldEvaluation: ...

    def reset(self) -> None: ...

    def __call__(self, x: np.ndarray) -> FieldEvaluation: ...
