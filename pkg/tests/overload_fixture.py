"""Pinned overload fixture for the PID unit.

The plant is linear in the replica shortfall: with ``need`` replicas
required, the measured response is ``slo + gain * (need - replicas)``,
floored at zero. The controller first faces a demand above its ceiling,
then a demand it can meet.
"""
from chainscale.control import PAPER_GAINS, PidState, pid_step

SLO_MS = 200.0
GAIN_MS_PER_REPLICA = 20.0
DT = 1.0
BOUNDS = (1, 40)
START = 5
OVERLOAD = (60, 120)  # (replicas needed, decisions)
RECOVERY = (25, 360)
SETTLE_FROM = 2 * OVERLOAD[1]  # one overload length after the overload ends


def measured(need, replicas):
    return max(0.0, SLO_MS + GAIN_MS_PER_REPLICA * (need - replicas))


def run(anti_windup):
    """Return the actuated target after every decision."""
    state = PidState.fresh(START)
    replicas = START
    targets = []
    for need, n in (OVERLOAD, RECOVERY):
        for _ in range(n):
            state, replicas = pid_step(state, measured(need, replicas), SLO_MS, DT, PAPER_GAINS,
                                       BOUNDS, anti_windup=anti_windup)
            targets.append(replicas)
    return targets


def overshoot(targets):
    """Largest distance from the recovery demand once settling time has passed."""
    need = RECOVERY[0]
    return max(abs(r - need) for r in targets[SETTLE_FROM:])
