"""Parameter containers and weight initialisation."""
from pathlib import Path
from typing import Dict, Iterator, List, Tuple, Union

import numpy as np

from app.tensor import DEFAULT_DTYPE, Parameter


class Module:
    """
    Holds Parameters (directly, in lists, or in child modules).

    Parameter names are dotted attribute paths, which is also the key format of
    ``state_dict`` and of saved ``.npz`` weight files.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, value in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{path}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Parameter):
                        yield f"{path}.{i}", item
                    elif isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def astype(self, dtype: np.dtype) -> "Module":
        """Cast every parameter in place (64-bit for gradient checks)."""
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.zero_grad()
        return self

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: np.array(p.data, copy=True) for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        Raises:
            KeyError: If a parameter is missing from ``state`` or ``state`` has extras.
            ValueError: If a stored shape differs.
        """
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        unexpected = set(state) - set(params)
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ValueError(f"{name}: stored shape {value.shape} != {p.shape}")
            p.data = value.astype(p.dtype)
            p.zero_grad()

    def save(self, path: Union[str, Path]) -> None:
        np.savez(Path(path), **self.state_dict())

    def load(self, path: Union[str, Path]) -> None:
        with np.load(Path(path)) as archive:
            self.load_state_dict({k: archive[k] for k in archive.files})


def uniform_fan_in(
    shape: Tuple[int, ...],
    fan_in: int,
    rng: np.random.Generator,
    name: str = "",
    dtype: np.dtype = DEFAULT_DTYPE,
) -> Parameter:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return Parameter(rng.uniform(-bound, bound, size=shape), name=name, dtype=dtype)


def zeros(shape: Tuple[int, ...], name: str = "", dtype: np.dtype = DEFAULT_DTYPE) -> Parameter:
    return Parameter(np.zeros(shape), name=name, dtype=dtype)


def constant(shape: Tuple[int, ...], value: float, name: str = "", dtype: np.dtype = DEFAULT_DTYPE) -> Parameter:
    return Parameter(np.full(shape, value), name=name, dtype=dtype)
