"""A power failure right after an input-dependent write.

The program reads a sensor, then takes one of two branches. If power
fails after the first branch has written ``y`` and the sensor reads
differently on re-execution, the second branch runs instead and ``y``
keeps its stale value. Saving only the write-after-read locations misses
this; saving the exclusive may-write set too does not.
"""
from intermittent.analysis import analyze, checkpoint_omegas, instrument
from intermittent.continuous import InputOracle
from intermittent.equiv import check_correspondence
from intermittent.harness import load_corpus
from intermittent.intermittent import run_int
from intermittent.machine import FailureSchedule

program = load_corpus()["fig5"]
# the sensor reads 2 at time 3 (then-branch) and 0 at time 14 (else-branch)
oracle = InputOracle(0, (0, 2), {3: 2, 14: 0})
# power fails at step 7, right after y := 1, and stays off for 4 ticks
schedule = FailureSchedule.of((7, 4))

for policy in ("war-only", "war+emw-tainted"):
    p = instrument(program, policy)
    print(f"== {policy}: checkpoint saves {sorted(checkpoint_omegas(p)[0])}")
    final, obs, trace = run_int(p, oracle, schedule)
    print("   observations:", ", ".join(map(str, obs)))
    print("   final x, y:", final.nv["x"].v, final.nv["y"].v)
    report, _ = check_correspondence(p, trace)
    verdict = "corresponds to a continuous run" if report.holds else f"broken at {report.witness}"
    print("   verdict:", verdict)

print("\nstatic view of the uninstrumented program:")
for region in analyze(program)["regions"]:
    if region["checkpoint"] is not None:
        print("   WAR", region["war"], "tainted EMW", region["emw_tainted"])
