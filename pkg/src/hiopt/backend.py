"""Kernel backend selection.

The compiled ``_vm`` extension is used when it imports; otherwise the numpy
interpreter in ``_vm_py`` takes over. ``use_backend`` switches explicitly
(tests and the benchmark run both).
"""

from __future__ import annotations

from . import _vm_py

try:
    from . import _vm as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _vm_py.run_program}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled.run_program

_active = "compiled" if _compiled is not None else "python"


def available() -> list[str]:
    return sorted(_BACKENDS)


def active() -> str:
    return _active


def use_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available()}")
    _active = name


def run_program(ops, args, X, out, stack_size, n_regs=0):
    return _BACKENDS[_active](ops, args, X, out, stack_size, n_regs)
