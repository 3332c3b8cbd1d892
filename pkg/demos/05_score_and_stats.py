"""Score model output against engine ground truth, then run the stats.

The scoring side is fully offline: raw responses are re-parsed with the
relaxed fact parser and compared by Jaccard; unparseable or illegal
answers score zero. The statistics reproduce the published analyses
from the bundled result tables.
"""

from ggpbench import published
from ggpbench.harness import parse_response
from ggpbench.metrics import (
    diff_report,
    jaccard,
    pearson,
    score_instance,
    wilcoxon_rank_sum,
)

# --- scoring a model reply -------------------------------------------------
raw = '{"llm_state": "(cell 1 1 x)\\n(cell 2 2 o)\\n(control xplayer)"}'
answer = parse_response(1, raw)
expected = frozenset({("cell", "1", "1", "x"), ("cell", "2", "2", "o"),
                      ("cell", "3", "3", "b"), ("control", "xplayer")})
record = score_instance(1, expected, answer, instance_id="demo_000")
missing, superfluous = diff_report(record.expected, record.produced)
print(f"JI = {record.ji:.3f}  exact = {record.exact}")
print("missing:", missing, " superfluous:", superfluous)

print("\nseparator tolerance:", jaccard(
    parse_response(1, '{"llm_state": "(score blue,5)"}').fact_set,
    frozenset({("score", "blue", "5")})))
print("bracket misuse status:",
      parse_response(1, '{"llm_state": "score(blue,5)"}').parse_status)

# --- statistics over the published tables -----------------------------------
results = published.load_results()
features = published.load_features()
games = published.game_list(results)

stat = published.obfuscation_wilcoxon(results, "gemini-2.5-flash",
                                      "original", "dictionary")
print(f"\nFlash, original vs dictionary (signed-rank): p = {stat.p_value:.2e}")

pro = published.column(results, published.TASK1, "gemini-2.5-pro")
flash = published.column(results, published.TASK1, "gemini-2.5-flash")
print(f"Pro vs Flash on next-state strict success (rank-sum): "
      f"p = {wilcoxon_rank_sum(pro, flash).p_value:.6f}")

conv = [features[g]["Converging?"] for g in games]
llama = published.per_game_average(results, "llama-3.3-70b")
print(f"Pearson(converging, llama mean strict success) = "
      f"{pearson(conv, llama).statistic:.3f}")
