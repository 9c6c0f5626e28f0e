#!/usr/bin/env python3
"""
Calibration script for the default trap model

Picks the fill coefficients c_j so that the calibration spot (1.4 nW into
35 um) fills the slow and fast traps at 0.03/s and 0.2/s, then prints the
resulting rise so the [trap_model] values of paper-fig8.ini can be checked.
"""

from dotenv import load_dotenv

# fill rate c_j * I at the calibration intensity, 1/s
TARGET_FILL_RATES = (0.03, 0.2)
LIFETIMES = (100.0, 5.0)
GAINS = (16.0, 4.0)


def calibrate():
    load_dotenv()

    from biphoton.kinetics import (
        CALIBRATION_INTENSITY,
        IntensitySchedule,
        TrapModel,
        equilibrium_populations,
        simulate_sensitization,
    )

    fill = tuple(rate / CALIBRATION_INTENSITY for rate in TARGET_FILL_RATES)
    model = TrapModel(fill_coefficient=fill, lifetime=LIFETIMES, gain=GAINS)

    print(f"Calibration intensity: {CALIBRATION_INTENSITY:.6g} W/m^2")
    print(f"Equilibrium populations: {equilibrium_populations(model, CALIBRATION_INTENSITY)}")

    trace = simulate_sensitization(model, IntensitySchedule.constant(CALIBRATION_INTENSITY), 300.0, 0.05)
    for t in (10.0, 50.0, 100.0, 200.0, 300.0):
        k = int(round(t / 0.05))
        print(f"  s({t:5.0f} s) = {trace.values[k]:8.4f}  (rise x{trace.values[k] / model.base_sensitivity:.2f})")

    print("\n[trap_model]")
    for j in (1, 2):
        print(f"capacity_{j} = {model.capacity[j - 1]:g}")
        print(f"fill_coeff_{j}_m2_per_ws = {model.fill_coefficient[j - 1]:.6g}")
        print(f"lifetime_{j}_s = {model.lifetime[j - 1]:g}")
        print(f"gain_{j} = {model.gain[j - 1]:g}")
    print(f"base_sensitivity = {model.base_sensitivity:g}")


if __name__ == '__main__':
    calibrate()
