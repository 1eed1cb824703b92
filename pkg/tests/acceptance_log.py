"""Shared record of acceptance outcomes, printed by the terminal-summary hook."""

RESULTS: dict = {}


def record(num: int, ok: bool, line: str) -> None:
    RESULTS[num] = (bool(ok), line)
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {line}")
