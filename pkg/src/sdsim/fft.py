"""FFT backend used by every transform in the package.

The backend is fixed per process (``SDSIM_FFT=torch|scipy``; default torch when
importable). torch's MKL transforms are faster here and their round-off is far
less biased in the L2 norm than pocketfft's. Every double-precision backend
still gains about 1e-16 of relative L2 norm per transform on average, so the
free step can optionally run in long double (``*_extended``), which removes
that bias at roughly four times the cost.
"""
from __future__ import annotations

import os
import warnings

import numpy as np
import scipy.fft as sfft

_torch = None


def _pick() -> str:
    global _torch
    if os.environ.get("SDSIM_FFT", "torch").lower() == "scipy":
        return "scipy"
    try:
        import torch
    except ImportError:
        return "scipy"
    _torch = torch
    return "torch"


BACKEND = _pick()


def _tensor(a: np.ndarray):
    a = np.ascontiguousarray(a, dtype=np.complex128)
    if a.flags.writeable:
        return _torch.from_numpy(a)
    # the transforms only read their input, so sharing a read-only buffer is safe
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return _torch.from_numpy(a)


def fftn(a: np.ndarray, workers=None) -> np.ndarray:
    if BACKEND == "torch":
        return _torch.fft.fftn(_tensor(a)).numpy()
    return sfft.fftn(a, workers=workers)


def ifftn(a: np.ndarray, workers=None) -> np.ndarray:
    if BACKEND == "torch":
        return _torch.fft.ifftn(_tensor(a)).numpy()
    return sfft.ifftn(a, workers=workers)


def fftn_extended(a: np.ndarray, workers=None) -> np.ndarray:
    """Forward transform in long double (pocketfft); returns a clongdouble array."""
    return sfft.fftn(np.asarray(a, dtype=np.clongdouble), workers=workers)


def ifftn_extended(a: np.ndarray, workers=None) -> np.ndarray:
    return sfft.ifftn(np.asarray(a, dtype=np.clongdouble), workers=workers)


fftshift = np.fft.fftshift
ifftshift = np.fft.ifftshift
fftfreq = np.fft.fftfreq


def set_threads(n: int) -> None:
    """Intra-transform threads for the torch backend (scipy takes ``workers`` per call)."""
    if BACKEND == "torch" and n >= 1:
        _torch.set_num_threads(int(n))


def describe() -> str:
    if BACKEND == "torch":
        return f"torch {_torch.__version__} (mkl={_torch.backends.mkl.is_available()})"
    import scipy

    return f"scipy {scipy.__version__} (pocketfft)"
