"""
Water-filling along a constant-speed fly-over
=============================================

With the path fixed, the minimum-energy powers have a closed form: fill
each instant up to a common water level above the inverse channel
quality, capped at the power limit.  The general solver lands on the same
allocation.
"""
from dataclasses import replace

import numpy as np

from commenergy.baselines import (fixed_speed_config, fixed_speed_solution, link_profile,
                                  max_feasible_data, water_filling)
from commenergy.model import MEGABYTE_BITS
from commenergy.scenarios import load_fixture
from commenergy.transcription import evaluate_energy

cfg = fixed_speed_config(load_fixture("single_node"))
nd = cfg.node(1)
ch = cfg.channel
prof = link_profile(cfg, 1)

# the most this path can carry, transmitting flat out
cap = max_feasible_data(prof, nd.p_max, ch.noise_power, ch.bandwidth(0))
print(f"constant-speed capacity {cap / MEGABYTE_BITS:.2f} MB")

for frac in (0.25, 0.5, 0.9):
    load = frac * cap
    wf = water_filling(prof, load, nd.p_max, ch.noise_power, ch.bandwidth(0))
    on = np.flatnonzero(wf.power > 0)
    print(f"{load / MEGABYTE_BITS:6.2f} MB: water level {wf.water_level:.3e} W, "
          f"transmitting for {prof.knot_times[on[-1]] - prof.knot_times[on[0]]:.0f} s, "
          f"energy {wf.energy(prof) / 1e3:.3f} kJ")

    # the interior-point solve of the full program agrees
    sol = fixed_speed_solution(replace(cfg, nodes=(replace(nd, initial_data=load),)))
    print(f"         solver energy {evaluate_energy(cfg, sol).transmission / 1e3:.3f} kJ")
