"""
Calibrating the antenna gain product
====================================

The channel gain constant is not given directly, so it is fitted: choose
G so that a node flying the reference path at constant speed and full
power delivers exactly 56 MB.
"""
from commenergy.baselines import calibrate_gain, fixed_speed_config, link_profile, max_feasible_data
from commenergy.model import MEGABYTE_BITS
from commenergy.scenarios import calibrated_gain, load_fixture

cfg = fixed_speed_config(load_fixture("single_node"))
G = calibrate_gain(cfg, 56 * MEGABYTE_BITS)
print(f"fitted G = {G:.17g} (shipped value {calibrated_gain():.17g})")

# the fitted value reproduces the target
nd = cfg.node(1)
cap = max_feasible_data(link_profile(cfg, 1), nd.p_max, cfg.channel.noise_power, cfg.channel.bandwidth(0))
print(f"constant-speed maximum with the shipped G: {cap / MEGABYTE_BITS:.6f} MB")
