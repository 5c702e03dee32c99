import warnings

import numpy as np
import pytest

from qecbench.calibration import build_noise_model, load_device
from qecbench.codes import KINDS, RECOVERIES, CodeBackend

SC = "ibm-falcon-27"
NV = "nv-center-5"


def haar_states(n_samples: int, dim: int, rng) -> np.ndarray:
    """Rows are Haar-random pure states (normalised complex Gaussians)."""
    z = rng.normal(size=(n_samples, dim)) + 1j * rng.normal(size=(n_samples, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def random_density(n_qubits: int, rng) -> np.ndarray:
    d = 2**n_qubits
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_unitary(d: int, rng) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


@pytest.fixture(scope="session")
def devices():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = {}
        for name in (SC, NV):
            d = load_device(name)
            out[name] = (d, build_noise_model(d))
    return out


@pytest.fixture(scope="session")
def backends(devices):
    """Calibrated code backends keyed by (device, kind, recovery), built lazily."""
    cache = {}

    def get(device, kind, recovery):
        key = (device, kind, recovery)
        if key not in cache:
            assert kind in KINDS and recovery in RECOVERIES
            d, nm = devices[device]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                cache[key] = CodeBackend.build(kind, recovery, d, nm)
        return cache[key]

    return get


def stabilizer_segment_count(c) -> int:
    """Multi-qubit gates between the last error slot and the first measurement."""
    ins = c.instructions
    last = max(i for i, x in enumerate(ins) if x.name == "SLOT")
    first = min(i for i, x in enumerate(ins) if x.name == "MEASURE")
    return sum(1 for x in ins[last:first] if x.is_multi_qubit)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(label: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
