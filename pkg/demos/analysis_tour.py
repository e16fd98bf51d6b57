"""Checkpoint sets chosen by each instrumentation policy on the bundled corpus."""
from intermittent.analysis import POLICIES, check_rio, check_war, checkpoint_omegas, instrument
from intermittent.harness import load_corpus
from intermittent.lang import TaskProgram, pretty
from intermittent.variants.ratchet import rewrite_ratchet

for name, program in load_corpus().items():
    if isinstance(program, TaskProgram):
        continue
    print(f"== {name}")
    for policy in POLICIES:
        p = instrument(program, policy)
        sets = {k: sorted(v) for k, v in checkpoint_omegas(p).items() if k is not None}
        problems = len(check_war(p)) + len(check_rio(p))
        print(f"   {policy:16} {sets}  violations={problems}")

# Ratchet-style rewriting avoids saving anything: it splits each region at
# the write that would close a write-after-read dependence.
small = load_corpus()["swap"]
print("\nswap after ratchet rewriting:\n" + pretty(rewrite_ratchet(small)))
