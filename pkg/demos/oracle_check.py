"""
Checking the solver against exhaustive search
=============================================

On a four-interval problem every speed profile on a 20-level grid can be
tried, each with its exact water-filled powers.  The grid can only do as
well as the true optimum, so the solver's energy must sit just below.
"""
from commenergy.baselines import brute_force_oracle
from commenergy.scenarios import load_fixture
from commenergy.solver import solve
from commenergy.transcription import build_program

cfg = load_fixture("tiny_oracle")
res = brute_force_oracle(cfg, speed_grid=20)
print(f"grid search: {res.n_feasible} of {res.n_profiles} speed profiles reach the destination on time")
print(f"best grid profile {res.energy:.2f} J, speeds {res.speeds.round(2)} m/s")

sol, stats = solve(build_program(cfg))
print(f"solver ({stats.status}) {stats.objective:.2f} J, speeds {sol.speed[1].round(2)} m/s")
print(f"oracle / solver = {res.energy / stats.objective:.5f}")
