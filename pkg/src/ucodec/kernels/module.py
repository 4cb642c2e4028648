"""Tiny module base: parameter discovery by attribute walk."""

from __future__ import annotations

from typing import Iterator

from ucodec.kernels.tensor import Parameter


class Module:
    """Containers subclass this; parameters are found by walking attributes
    (and lists/tuples of them) in definition order, giving stable names."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}"
            yield from _walk(name, value)

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]


def _walk(name: str, value) -> Iterator[tuple[str, Parameter]]:
    if isinstance(value, Parameter):
        yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(prefix=name + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(f"{name}.{i}", item)
