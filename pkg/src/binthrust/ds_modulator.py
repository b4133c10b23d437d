"""Per-thruster Delta-Sigma modulators with firing-time enforcement.

Each thruster owns an error integrator and a four-phase timing machine:

    IDLE        output 0; trigger when the integrated error exceeds the
                threshold, which equals the minimum firing time
    FIRING_HELD output 1; the minimum on-time has not elapsed yet
    FIRING      output 1 while the error stays above threshold and the
                cumulative on-time is below the maximum
    COOL_DOWN   output 0 until the mandatory off-time has elapsed

The integrator runs u_error += dt * K * (command - emitted_bit) with K = 1
and threshold epsilon = t_on_min.  The error is clamped to [-eps, 2*eps] as
anti-windup; without the clamp a long saturated phase causes over-firing
afterwards.

forward_simulate() plays a copy of the bank ahead over the prediction
horizon, substepping each horizon cell at the live update rate and calling
a cell "on" when the thruster is commanded on for at least half of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .platform_model import N_THRUSTERS, PlatformParams

IDLE = 0
FIRING_HELD = 1
FIRING = 2
COOL_DOWN = 3

_TIME_EPS = 1e-9


@dataclass
class ModulatorBank:
    """State of all eight modulators; one control loop owns one bank."""

    params: PlatformParams
    gain: float = 1.0
    u_error: np.ndarray = field(default_factory=lambda: np.zeros(N_THRUSTERS))
    phase: np.ndarray = field(default_factory=lambda: np.full(N_THRUSTERS, IDLE, dtype=np.int8))
    on_time: np.ndarray = field(default_factory=lambda: np.zeros(N_THRUSTERS))
    off_time: np.ndarray = field(default_factory=lambda: np.zeros(N_THRUSTERS))

    @property
    def threshold(self) -> float:
        return self.params.t_on_min

    def copy(self) -> "ModulatorBank":
        return ModulatorBank(
            params=self.params,
            gain=self.gain,
            u_error=self.u_error.copy(),
            phase=self.phase.copy(),
            on_time=self.on_time.copy(),
            off_time=self.off_time.copy(),
        )

    def output_bits(self) -> np.ndarray:
        return ((self.phase == FIRING_HELD) | (self.phase == FIRING)).astype(float)

    def update(self, commands: np.ndarray, dt: float) -> np.ndarray:
        """Advance every modulator by dt and return the emitted bits.

        commands are the continuous thruster demands in [0, 1]; the wheel
        torque channel never passes through here.
        """
        if not dt > 0.0:
            raise ValueError("dt must be positive")
        commands = np.asarray(commands, dtype=float)
        if commands.shape != (N_THRUSTERS,):
            raise ValueError("need one command per thruster")
        if np.any(commands < -1e-9) or np.any(commands > 1.0 + 1e-9):
            raise ValueError("commands must lie in [0, 1]")
        eps = self.threshold
        p = self.params
        bits = np.empty(N_THRUSTERS)
        prev = self.output_bits()
        self.u_error += dt * self.gain * (commands - prev)
        np.clip(self.u_error, -eps, 2.0 * eps, out=self.u_error)
        for j in range(N_THRUSTERS):
            ph = self.phase[j]
            if ph == IDLE:
                if self.u_error[j] > eps:
                    self.phase[j] = FIRING_HELD
                    self.on_time[j] = dt
                    if self.on_time[j] >= p.t_on_min - _TIME_EPS:
                        self.phase[j] = FIRING
                    bits[j] = 1.0
                else:
                    bits[j] = 0.0
            elif ph == FIRING_HELD:
                self.on_time[j] += dt
                bits[j] = 1.0
                if self.on_time[j] >= p.t_on_min - _TIME_EPS:
                    self.phase[j] = FIRING
            elif ph == FIRING:
                if self.u_error[j] <= eps or self.on_time[j] >= p.t_on_max - _TIME_EPS:
                    self.phase[j] = COOL_DOWN
                    self.off_time[j] = dt
                    bits[j] = 0.0
                    if self.off_time[j] >= p.t_off_min - _TIME_EPS:
                        self.phase[j] = IDLE
                else:
                    self.on_time[j] += dt
                    bits[j] = 1.0
            else:  # COOL_DOWN
                self.off_time[j] += dt
                bits[j] = 0.0
                if self.off_time[j] >= p.t_off_min - _TIME_EPS:
                    self.phase[j] = IDLE
        return bits

    def forward_simulate(self, n_steps: int, dt_cell: float,
                         held_commands: np.ndarray, dt_update: float | None = None) -> np.ndarray:
        """Predicted firing matrix (n_steps x 8) under held commands.

        The live state is untouched; a copy is stepped at dt_update (the
        live loop rate by default) and each dt_cell-wide horizon cell is 1
        when the thruster is on for at least half its substeps.
        """
        if n_steps < 1:
            raise ValueError("need at least one step")
        if dt_update is None:
            dt_update = dt_cell
        n_sub = max(1, int(round(dt_cell / dt_update)))
        ghost = self.copy()
        held = np.asarray(held_commands, dtype=float)
        plan = np.zeros((n_steps, N_THRUSTERS))
        for t in range(n_steps):
            acc = np.zeros(N_THRUSTERS)
            for _ in range(n_sub):
                acc += ghost.update(held, dt_cell / n_sub)
            plan[t] = (acc >= 0.5 * n_sub).astype(float)
        return plan
