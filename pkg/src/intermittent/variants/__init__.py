"""Alternative execution models and program transformations."""
from .jit import JIT_FAIL, JitConfig, JitModel, JitSuccess, run_jit, step_jit
from .ratchet import rewrite_ratchet, strip_checkpoints
from .redo import MacroRedoModel, RedoConfig, RedoCtx, RedoModel, run_redo, step_redo
from .tasks import (TaskConfig, TaskModel, TaskWellFormednessError, label, run_task, step_task,
                    translate_cmd, translate_tasks)
from .undo import UndoConfig, UndoCtx, UndoModel, run_undo, step_undo

__all__ = [
    "JIT_FAIL", "JitConfig", "JitModel", "JitSuccess", "run_jit", "step_jit",
    "rewrite_ratchet", "strip_checkpoints",
    "MacroRedoModel", "RedoConfig", "RedoCtx", "RedoModel", "run_redo", "step_redo",
    "TaskConfig", "TaskModel", "TaskWellFormednessError", "label", "run_task", "step_task",
    "translate_cmd", "translate_tasks",
    "UndoConfig", "UndoCtx", "UndoModel", "run_undo", "step_undo",
]
