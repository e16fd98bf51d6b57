"""Executable semantics, static analyses and a verification harness for
checkpoint-based intermittent computing."""
from .analysis import (POLICIES, Violation, analyze, check_rio, check_task_program, check_war,
                       collect_emw, collect_war_dino, emw_sets, instrument, must_write, war_sets)
from .continuous import ContConfig, ContinuousModel, InputOracle, run_cont, step_cont
from .equiv import (RelationReport, bisim_lockstep, check_correspondence, obs_leq_cm, obs_leq_m,
                    relation_initial_point, relation_same_point)
from .harness import (CampaignReport, GenConfig, gen_program, gen_schedule, gen_task_program,
                      load_corpus, run_campaign)
from .intermittent import BasicModel, IntConfig, run_int, step_int
from .lang import (Program, TaskProgram, ParseError, ValidationError, parse, parse_any,
                   parse_tasks, pretty)
from .machine import Failure, FailureSchedule, Trace, drive

__all__ = [
    "POLICIES", "Violation", "analyze", "check_rio", "check_task_program", "check_war",
    "collect_emw", "collect_war_dino", "emw_sets", "instrument", "must_write", "war_sets",
    "ContConfig", "ContinuousModel", "InputOracle", "run_cont", "step_cont",
    "RelationReport", "bisim_lockstep", "check_correspondence", "obs_leq_cm", "obs_leq_m",
    "relation_initial_point", "relation_same_point",
    "CampaignReport", "GenConfig", "gen_program", "gen_schedule", "gen_task_program",
    "load_corpus", "run_campaign",
    "BasicModel", "IntConfig", "run_int", "step_int",
    "Program", "TaskProgram", "ParseError", "ValidationError", "parse", "parse_any",
    "parse_tasks", "pretty",
    "Failure", "FailureSchedule", "Trace", "drive",
]
