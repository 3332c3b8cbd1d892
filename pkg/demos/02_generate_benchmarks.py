"""Generate forward-simulation benchmark fixtures for a few games.

Single-step instances carry a state, the move played, the full legal
sets and the engine's successor; multistep fixtures are legal
move sequences replayable at any horizon.
"""

from pathlib import Path

from ggpbench.games import load_game
from ggpbench.pipeline import RunManifest, VARIANT_DIRS, export_games, genbench
from ggpbench.simulator import (
    generate_sequences,
    generate_step_instances,
    instance_to_json,
    replay,
)

desc = load_game("connectfour")

instances = generate_step_instances(desc, count=3, seed=7)
print(f"{len(instances)} single-step instances for {desc.source_name}")
print(instance_to_json(instances[0], desc.roles)[:400], "...\n")

sequences = generate_sequences(desc, count=2, length=15, seed=7)
seq = sequences[0]
print(f"sequence {seq.sequence_id}: {len(seq.joints)} joint moves")
for n in (0, 5, 15):
    print(f"  state size after {n:2d} moves: {len(replay(desc, seq, n))}")

# the same thing as an on-disk tree following the distribution layout
out = Path("runs-demo")
manifest = RunManifest(games=["tictactoe", "buttons"], count=3, sequence_length=5, seed=1)
root = out / VARIANT_DIRS["original"]
export_games(root, manifest.games)
counts = genbench(root, manifest)
print("\nwrote fixture tree under", root)
for game, (ni, ns) in sorted(counts.items()):
    print(f"  {game}: {ni} instances, {ns} sequences")
