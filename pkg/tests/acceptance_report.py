"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(num: int, title: str, ok: bool, detail: str) -> bool:
    line = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    print(line)
    LINES.append(line)
    return ok
