"""Shared drive-script builders for the CLI and acceptance suites."""

from __future__ import annotations

TICK = 0.02


def quantize(t: float) -> float:
    return round(round(t / TICK) * TICK, 10)


def with_keepalives(steps: list[tuple[float, str]], gap: float = 0.4) -> list[tuple[float, str]]:
    """Insert PNG keep-alives so no command gap exceeds the watchdog window."""
    out: list[tuple[float, str]] = []
    for i, (at, text) in enumerate(steps):
        out.append((at, text))
        if i + 1 < len(steps):
            nxt = steps[i + 1][0]
            t = at + gap
            while t < nxt - TICK / 2:
                out.append((quantize(t), "PNG"))
                t += gap
    return out


def square_script(leg_s: float = 2.0, turn_s: float = 0.6,
                  leg_duty: int = 255, turn_duty: int = 50) -> list[tuple[float, str]]:
    """Four legs + four spin turns returning to the start pose.

    Effective motion time between two commands is exactly STP_at - MOV_at
    (both apply one tick after their AT times).  turn_duty 50 for 0.6 s
    gives 89.875 deg per corner with the default 0.15 m track; keep-alives
    hold the watchdog off mid-leg.
    """
    steps: list[tuple[float, str]] = []
    t = 0.5
    for _ in range(4):
        steps.append((quantize(t), f"SPD {leg_duty}"))
        mov_at = quantize(t + 0.02)
        steps.append((mov_at, "MOV F"))
        stp_at = quantize(mov_at + leg_s)
        steps.append((stp_at, "STP"))
        steps.append((quantize(stp_at + 0.02), f"SPD {turn_duty}"))
        mov2_at = quantize(stp_at + 0.04)
        steps.append((mov2_at, "MOV L"))
        stp2_at = quantize(mov2_at + turn_s)
        steps.append((stp2_at, "STP"))
        t = stp2_at + 0.04
    return with_keepalives(steps)


def forward_script(duration_s: float, duty: int = 255,
                   start_s: float = 0.5) -> list[tuple[float, str]]:
    steps = [(quantize(start_s), f"SPD {duty}"),
             (quantize(start_s + 0.02), "MOV F"),
             (quantize(start_s + 0.02 + duration_s), "STP")]
    return with_keepalives(steps)


def script_text(steps: list[tuple[float, str]]) -> str:
    return "".join(f"AT {at:g} {text}\n" for at, text in steps)
