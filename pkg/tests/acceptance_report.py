"""Shared sink for acceptance-criterion outcomes.

Each acceptance test records one line here; the conftest terminal-summary
hook renders them after the run so every criterion shows an explicit
pass/fail regardless of capture settings.
"""

RESULTS = []


def record(name: str, passed: bool, detail: str) -> bool:
    RESULTS.append((name, bool(passed), detail))
    return bool(passed)
