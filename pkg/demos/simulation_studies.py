"""Small versions of the two simulation studies.

Support recovery of the no-grouping estimator as T grows, and Lasso risk
against the dependence of the regressors. Pass ``full`` for the full-size
runs (several minutes on one core).
"""
import sys

from largevar import DependenceDesign, PenaltySchedule, dependence_risk_experiment, recovery_experiment

full = sys.argv[1:] == ["full"]
trials = 100 if full else 20

# a_T * sqrt(T) -> 0 and b_T * sqrt(T) -> infinity
a_T = PenaltySchedule(0.01, -0.6)
b_T = PenaltySchedule(4.0, -0.4)
print("T      recovery  fp_rate  oracle_ratio")
for r in recovery_experiment(10, 2, 2, 1, [200, 500, 2000], trials, a_T, b_T, seed=0):
    print(f"{r.T:<6} {r.recovery_rate:8.2f} {r.fp_rate:8.4f} {r.oracle_ratio:12.3f}")

T, P = (500, 50) if full else (300, 20)
designs = [DependenceDesign("MA", k=k, T=T, P=P) for k in (0, 2, 8)]
print("\nk  dependence  pred_error  bound_held")
for r in dependence_risk_experiment(designs, s=3, trials=trials, seed=0, kappa_budget=100_000 if full else 5_000):
    print(f"{r.k:<2} {r.dependence:10d} {r.mean_pred_error:11.3f} {r.bound_fraction:11.2f}")
