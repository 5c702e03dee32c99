"""Noise channels from calibration data.

Builds the damping and depolarizing channels, checks that the order of
relaxation and dephasing does not matter, and shows how a calibrated gate
error splits into a damping part and a depolarizing residual on each platform.

Run: python3 demos/noise_channels.py
"""
import warnings

import numpy as np

from qecbench import channels as ch
from qecbench.calibration import build_noise_model, damping_probs, load_device


def order_independence():
    ad, pd = ch.make_amplitude_damping(0.3), ch.make_phase_damping(0.2)
    a_then_p = ch.choi(ch.compose(pd, ad)).entries
    p_then_a = ch.choi(ch.compose(ad, pd)).entries
    combined = ch.choi(ch.make_amplitude_phase_damping(0.3, 0.2)).entries
    print("damping order, max Choi difference:",
          f"{np.max(np.abs(a_then_p - p_then_a)):.1e}, vs combined {np.max(np.abs(a_then_p - combined)):.1e}")


def fidelities():
    for p in (0.01, 0.1, 0.5):
        f = ch.average_gate_fidelity(ch.make_depolarizing(p))
        print(f"depolarizing p={p}: average fidelity {f:.4f} (1 - p/2 = {1 - p / 2:.4f})")


def calibrated_gates():
    p_ad, p_pd = damping_probs(5.7, 0.4, 0.1)
    print(f"NV electron, 0.1 ms gate: p_ad={p_ad:.6f} p_pd={p_pd:.6f}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, gate, qubits in (("ibm-falcon-27", "CNOT", (0, 1)), ("nv-center-5", "CROT_X", (0, 1))):
            nm = build_noise_model(load_device(name))
            gn = nm.gate_noise(gate, qubits)
            print(f"{name} {gate}{qubits}: p_ad={gn.p_ad} p_pd={gn.p_pd} p_depol={gn.p_depol}, "
                  f"average infidelity {1 - nm.gate_fidelity(gate, qubits):.4f}")


if __name__ == "__main__":
    order_independence()
    fidelities()
    calibrated_gates()
