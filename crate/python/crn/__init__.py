"""Python bindings for the crn reaction network toolkit.

The compiled extension lives in the Rust workspace. Build it once with

    cargo build -p crn-py --release

and this package finds the shared library in the workspace target
directory. Set CRN_NATIVE_LIB to point at the library explicitly, or drop
a copy next to this file as ``_native.so``, when the package is used
outside the repository checkout.
"""

import importlib.util
import os
import pathlib
import sys
import sysconfig


def _candidates():
    override = os.environ.get("CRN_NATIVE_LIB")
    if override:
        yield pathlib.Path(override)
    here = pathlib.Path(__file__).resolve().parent
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    yield here / ("_native" + suffix)
    yield here / "_native.so"
    # Editable install from python/crn: the workspace root is two levels up.
    root = here.parent.parent
    for profile in ("release", "debug"):
        for name in ("libcrn_native.so", "libcrn_native.dylib", "crn_native.dll"):
            yield root / "target" / profile / name


def _load():
    for path in _candidates():
        if path.is_file():
            spec = importlib.util.spec_from_file_location(__name__ + "._native", path)
            if spec is None or spec.loader is None:
                continue
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            sys.modules[spec.name] = module
            return module
    raise ImportError(
        "compiled crn extension not found; run `cargo build -p crn-py --release` "
        "in the repository root or set CRN_NATIVE_LIB"
    )


_native = _load()

Mechanism = _native.Mechanism
count_steps = _native.count_steps
step_type_census = _native.step_type_census
count_mechanisms = _native.count_mechanisms
enumerate_steps = _native.enumerate_steps
enumerate_mechanisms = _native.enumerate_mechanisms
load_data = _native.load_data
parse_values = _native.parse_values
__version__ = _native.__version__

__all__ = [
    "Mechanism",
    "count_steps",
    "step_type_census",
    "count_mechanisms",
    "enumerate_steps",
    "enumerate_mechanisms",
    "load_data",
    "parse_values",
]
