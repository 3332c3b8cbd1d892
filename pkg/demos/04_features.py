"""Extract structural and empirical complexity features.

Structural measures run over the rule subsets that feed `next` and
`legal`; empirical ones come from seeded playouts. Renaming symbols
cannot move any structural number.
"""

from ggpbench.features import empirical_features, rule_subset, structural_features
from ggpbench.games import load_game
from ggpbench.pipeline import features_table, rows_to_csv

chess = load_game("chess")
sf = structural_features(chess)
print("chess, rules reachable from `next`:", len(rule_subset(chess, "next")))
for key in (
    "Total rules_NEXT", "Total conditions_NEXT", "Max conditions per rule_NEXT",
    "Rules 'H-Index'_NEXT", "Max rule depth_NEXT", "Top level rules_LEGAL",
):
    print(f"  {key}: {sf[key]}")

print("\nempirical features (20 seeded playouts):")
for name in ("buttons", "connectfour", "checkers"):
    ef = empirical_features(load_game(name), playout_count=20, max_steps=25, seed=0)
    print(f"  {name:12s} avg facts {ef['Avg FactCount']:7.2f}  "
          f"state diff {ef['Diff Heuristic']:6.2f}  converging {ef['Converging?']}")

rows = features_table(
    {n: load_game(n) for n in ("tictactoe", "buttons")},
    playout_count=5, max_steps=10,
)
print("\nCSV row sample:")
print("\n".join(rows_to_csv(rows).splitlines()[:2]))
