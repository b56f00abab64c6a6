"""Classification task registry: label sets and label derivation rules.

Four tasks are supported: the eight-note musical scale, gender (M/F),
choral status (S = sings in a chorus, N = does not), and the joint
gender-by-choral task with four classes.
"""

from __future__ import annotations

SCALE_LABELS = ["do", "re", "mi", "fa", "so", "la", "ti", "do'"]
GENDER_LABELS = ["M", "F"]
CHORAL_LABELS = ["S", "N"]
JOINT_LABELS = ["M/S", "M/N", "F/S", "F/N"]

TASKS: dict[str, list[str]] = {
    "scale": SCALE_LABELS,
    "gender": GENDER_LABELS,
    "choral": CHORAL_LABELS,
    "joint": JOINT_LABELS,
}


def task_labels(task: str) -> list[str]:
    if task not in TASKS:
        raise KeyError(f"unknown task {task!r}; expected one of {sorted(TASKS)}")
    return TASKS[task]


def n_classes(task: str) -> int:
    return len(task_labels(task))


def joint_index(gender_idx: int, choral_idx: int) -> int:
    """Joint class index for (gender, choral); order matches JOINT_LABELS."""
    return gender_idx * 2 + choral_idx
