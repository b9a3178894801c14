"""Joint transmission-power and speed optimisation for mobile nodes offloading data."""
