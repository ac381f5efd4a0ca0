"""Bypass-rate evaluation: run solvers over a challenge set and report.

One attempt per challenge per solver; solver exceptions and unmatched
answers count as abstentions, and abstentions never count as solved.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .challenge import Challenge
from .solvers import SolverVerdict, attacker_view

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalRow:
    solver: str
    mode: str | None
    solved: int
    total: int

    @property
    def bypass_rate(self) -> float:
        return self.solved / self.total if self.total else 0.0


@dataclass
class EvalReport:
    rows: list[EvalRow]
    verdicts: dict[str, list[SolverVerdict]]

    def to_json(self) -> str:
        payload = [
            {
                "solver": r.solver,
                "mode": r.mode,
                "solved": r.solved,
                "total": r.total,
                "bypass_rate": round(r.bypass_rate, 6),
            }
            for r in self.rows
        ]
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def render_table(self) -> str:
        header = f"{'solver':<20} {'mode':<18} {'solved':>6} {'total':>6} {'bypass':>8}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.solver:<20} {r.mode or '-':<18} "
                f"{r.solved:>6} {r.total:>6} {r.bypass_rate:>8.2%}"
            )
        return "\n".join(lines)


def evaluate(
    solvers: list,
    challenges: list[Challenge],
    json_path=None,
) -> EvalReport:
    """Every solver attempts every challenge exactly once."""
    if not challenges:
        raise ValueError("challenge set is empty")
    rows: list[EvalRow] = []
    verdicts: dict[str, list[SolverVerdict]] = {}
    for solver in solvers:
        solved = 0
        solver_verdicts: list[SolverVerdict] = []
        for ch in challenges:
            view = attacker_view(ch)
            try:
                verdict = solver.solve(view)
            except Exception as exc:  # solver bugs become abstentions
                logger.warning("solver %s failed on %s: %s", solver.name, ch.challenge_id, exc)
                verdict = SolverVerdict(ch.challenge_id, None, f"error: {exc}")
            solver_verdicts.append(verdict)
            if verdict.chosen_index is not None and verdict.chosen_index == ch.answer_index:
                solved += 1
        key = f"{solver.name}:{solver.mode}" if solver.mode else solver.name
        verdicts[key] = solver_verdicts
        rows.append(EvalRow(solver=solver.name, mode=solver.mode, solved=solved, total=len(challenges)))
    report = EvalReport(rows=rows, verdicts=verdicts)
    if json_path is not None:
        Path(json_path).write_text(report.to_json())
    return report
