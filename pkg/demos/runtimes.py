"""Undo logging, redo logging and task runtimes stay in lockstep with plain checkpointing."""
from intermittent.continuous import InputOracle
from intermittent.equiv import bisim_lockstep
from intermittent.harness import load_corpus, run_model
from intermittent.machine import FailureSchedule

corpus = load_corpus()
schedule = FailureSchedule.of((5, 2), (11, 3))
oracle = InputOracle(0)

for model in ("basic", "undo", "redo"):
    trace = run_model(model, corpus["swap"], oracle, schedule)
    rules = " ".join(s.rule for s in trace.steps)
    print(f"{model:6} {rules}")
    print(f"{'':6} final nv: {({k: v.v for k, v in trace.final.memories()[0].items()})}")

for pair, program in (("basic-undo", "swap"), ("basic-redo", "swap"), ("redo-task", "swap_tasks")):
    report = bisim_lockstep(corpus[program], pair, oracle, schedule)
    print(f"{pair:10} holds={report.holds} steps={report.steps}")
