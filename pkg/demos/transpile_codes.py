"""Placing the repetition codes on both devices.

Transpiles the bit-flip code (post-processing) and the phase-flip code
(unitary correction) onto the heavy-hex superconducting device and the NV
star, then prints each placement and its gate counts. The phase-flip code is
where the native CCZ of the NV register pays off.

Run: python3 demos/transpile_codes.py
"""
import warnings

from qecbench.calibration import build_noise_model, load_device
from qecbench.circuit import dumps
from qecbench.codes import CodeBackend


def show(device_name, kind, recovery, print_circuit=False):
    device = load_device(device_name)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = CodeBackend.build(kind, recovery, device, build_noise_model(device)).transpiled
    print(f"{device_name:14s} {kind:10s} {recovery:15s} layout={tuple(res.layout)} "
          f"swaps={res.swaps_inserted} controlled gates={res.cnot_count} p_av={res.p_av:.3f}")
    if print_circuit:
        print(dumps(res.circuit, res.layout))


if __name__ == "__main__":
    show("nv-center-5", "bit-flip", "post-processing", print_circuit=True)
    show("ibm-falcon-27", "bit-flip", "post-processing")
    show("nv-center-5", "phase-flip", "unitary")
    show("ibm-falcon-27", "phase-flip", "unitary")
