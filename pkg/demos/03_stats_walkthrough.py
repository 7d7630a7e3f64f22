"""Welch tests, Holm correction and macro-F1 on small hand-checkable inputs.

Run: python3 demos/03_stats_walkthrough.py
"""
from kgrag.stats import holm_adjust, score_labels, stars, student_t_cdf, welch_t_test

# three temperature-level macro-F1 values per system, as in one (model, probe) family
baseline = [0.500, 0.510, 0.524]
systems = {
    "g1": [0.627, 0.653, 0.655],
    "g2": [0.505, 0.520, 0.515],
    "g3": [0.540, 0.470, 0.560],
}

tests = {name: welch_t_test(x, baseline) for name, x in systems.items()}
adj = dict(zip(tests, holm_adjust([t.p_value for t in tests.values()])))
print("system   diff     t       df     p       p_holm  d")
for name, t in tests.items():
    diff = sum(systems[name]) / 3 - sum(baseline) / 3
    print(f"{name:6} {diff:+.3f}  {t.t_statistic:6.2f}  {t.degrees_of_freedom:5.2f}  "
          f"{t.p_value:.4f}  {adj[name]:.4f}  {t.cohens_d:5.2f} {stars(adj[name])}")

# the two-sided p is 2 * (1 - F(|t|)) under the Student t with Welch df
t = tests["g1"]
print(f"\ncheck: 2*(1-cdf(|t|, df)) = {2 * (1 - student_t_cdf(abs(t.t_statistic), t.degrees_of_freedom)):.6f}")

# constant samples: no variance, so the test is flagged rather than dividing by zero
flat = welch_t_test([0.5, 0.5, 0.5], [0.25, 0.25, 0.25])
print(f"constant samples: degenerate={flat.degenerate}, p={flat.p_value:.3g}")

gold = list("ABCDABCD")
pred = ["A", "B", "C", "A", "A", "INVALID", "C", "D"]
m = score_labels(gold, pred)
print(f"\nmacro-F1 {m.macro_f1:.4f}, accuracy {m.accuracy:.3f}, {m.n_invalid} unparseable answer(s)")
