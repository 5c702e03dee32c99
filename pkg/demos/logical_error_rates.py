"""Logical error rates under calibrated and swept noise.

First the bit-flip code with a random injected flip under each device's own
calibration, then a short gate-error sweep with the same parameters on both
devices for the bit-flip code and the phase-flip code with unitary correction.

Run: python3 demos/logical_error_rates.py
"""
import warnings

from qecbench.bench import ExperimentConfig, Sweep, run_experiment
from qecbench.calibration import build_noise_model, load_device
from qecbench.codes import CodeBackend, CodeSpec, evaluate

DEVICES = ("ibm-falcon-27", "nv-center-5")


def calibrated():
    for name in DEVICES:
        device = load_device(name)
        backend = CodeBackend.build("bit-flip", "post-processing", device, build_noise_model(device))
        res = evaluate(CodeSpec("bit-flip", "post-processing", "0", "random"), backend)
        print(f"{name}: bit-flip logical error {res.logical_error_rate:.4f}, syndromes {res.syndrome_histogram}")


def sweep(kind, recovery):
    cfg = ExperimentConfig(DEVICES, kind, recovery, "0", sweeps=(Sweep("depol", (0.005, 0.01, 0.02)),))
    print(f"{kind} / {recovery}, uniform gate error:")
    for row in run_experiment(cfg).rows:
        print(f"  p_depol={row.value:<6} {row.platform:14s} {row.logical_error_rate:.4f}")


if __name__ == "__main__":
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        calibrated()
        sweep("bit-flip", "post-processing")
        sweep("phase-flip", "unitary")
