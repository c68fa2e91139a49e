"""Synthetic gait generator and streaming protocol client.

The generator is a pulse-train model, not biomechanics: each step drops a
Gaussian-windowed sinusoid on the forward axis at a jittered step time, so
the ground truth (step times, model step lengths) is exact by construction.
"""

from __future__ import annotations

import math
import socket
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .features import WEINBERG_K_DEFAULT
from .model import G_MPS2, SignalTrack, q9_array
from .protocol import Message, MessageKind, decode, encode
from .rng import derive

# pulse shape relative to the step period
PULSE_SIGMA_FRACTION = 0.2
PULSE_CARRIER_FRACTION = 0.5  # carrier = this fraction of cadence
STEP_TIME_JITTER_CV = 0.02
VERTICAL_HARMONIC_FRACTION = 0.25
LATERAL_SWAY_FRACTION = 0.15
DEFAULT_BATCH_SAMPLES = 50


class SimulatorError(ValueError):
    pass


@dataclass(frozen=True)
class GaitProfile:
    cadence_hz: float
    step_amplitude_mps2: float
    amplitude_cv: float = 0.0
    asymmetry: float = 0.0
    noise_std_mps2: float = 0.0
    device_tilt_deg: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.3 <= self.cadence_hz <= 3.5:
            raise SimulatorError(f"cadence {self.cadence_hz} outside [0.3, 3.5] Hz")
        if self.step_amplitude_mps2 <= 0:
            raise SimulatorError("step amplitude must be positive")
        if self.amplitude_cv < 0:
            raise SimulatorError("amplitude_cv must be >= 0")
        if not 0.0 <= self.asymmetry <= 1.0:
            raise SimulatorError("asymmetry must be in [0, 1]")
        if self.noise_std_mps2 < 0:
            raise SimulatorError("noise_std must be >= 0")


@dataclass(frozen=True)
class GroundTruth:
    step_times_s: tuple[float, ...]
    per_step_length_m: tuple[float, ...]
    total_distance_m: float

    @property
    def num_steps(self) -> int:
        return len(self.step_times_s)


def synthesize(
    profile: GaitProfile, duration_s: float, rate_hz: float
) -> tuple[SignalTrack, GroundTruth]:
    """Generate a device-frame track plus exact ground truth.

    True axes: forward = step pulses, vertical = gravity + a harmonic at
    twice the cadence (empirically zero-mean), lateral = slow sway. The
    device is pitched by device_tilt_deg about the lateral axis, white
    noise is added per channel, and samples are quantized to the persisted
    precision.
    """
    if duration_s < 5.0:
        raise SimulatorError(f"duration {duration_s} s < 5 s")
    if not 20.0 <= rate_hz <= 200.0:
        raise SimulatorError(f"rate {rate_hz} Hz outside [20, 200]")
    rng = derive(profile.seed, "synthesize")
    period = 1.0 / profile.cadence_hz
    t = np.arange(int(round(duration_s * rate_hz))) / rate_hz

    # jittered step times covering [period/2, duration - period/2]
    step_times = []
    t_step = period / 2
    while t_step <= duration_s - period / 2:
        step_times.append(t_step)
        t_step += period * (1.0 + STEP_TIME_JITTER_CV * rng.standard_normal())
    if not step_times:
        raise SimulatorError("duration too short for one step at this cadence")

    amplitudes = []
    for i in range(len(step_times)):
        a = profile.step_amplitude_mps2 * (1.0 + profile.amplitude_cv * rng.standard_normal())
        if i % 2 == 1:
            a *= 1.0 - profile.asymmetry
        amplitudes.append(max(a, 0.1 * profile.step_amplitude_mps2))

    sigma = PULSE_SIGMA_FRACTION * period
    carrier = PULSE_CARRIER_FRACTION * profile.cadence_hz
    forward = np.zeros_like(t)
    for t_k, a_k in zip(step_times, amplitudes):
        support = np.abs(t - t_k) <= 5 * sigma
        dt = t[support] - t_k
        forward[support] += a_k * np.exp(-(dt**2) / (2 * sigma**2)) * np.cos(2 * np.pi * carrier * dt)

    harmonic = (
        VERTICAL_HARMONIC_FRACTION
        * profile.step_amplitude_mps2
        * np.sin(2 * np.pi * (2 * profile.cadence_hz) * t)
    )
    vertical = G_MPS2 + (harmonic - harmonic.mean())
    lateral = (
        LATERAL_SWAY_FRACTION
        * profile.step_amplitude_mps2
        * np.sin(2 * np.pi * (profile.cadence_hz / 2) * t)
    )

    # ground-truth lengths: Weinberg model on the clean per-step swing
    lengths = []
    for t_k in step_times:
        lo, hi = t_k - period / 2, t_k + period / 2
        window = forward[(t >= lo) & (t <= hi)]
        swing = float(window.max() - window.min())
        lengths.append(WEINBERG_K_DEFAULT * swing**0.25)

    theta = math.radians(profile.device_tilt_deg)
    device_x = lateral
    device_y = math.cos(theta) * forward - math.sin(theta) * vertical
    device_z = math.sin(theta) * forward + math.cos(theta) * vertical
    if profile.noise_std_mps2 > 0:
        device_x = device_x + rng.normal(0, profile.noise_std_mps2, len(t))
        device_y = device_y + rng.normal(0, profile.noise_std_mps2, len(t))
        device_z = device_z + rng.normal(0, profile.noise_std_mps2, len(t))

    track = SignalTrack(
        t=q9_array(t),
        ax=q9_array(device_x / G_MPS2),
        ay=q9_array(device_y / G_MPS2),
        az=q9_array(device_z / G_MPS2),
        nominal_rate_hz=rate_hz,
    )
    truth = GroundTruth(
        step_times_s=tuple(step_times),
        per_step_length_m=tuple(lengths),
        total_distance_m=math.fsum(lengths),
    )
    return track, truth


def preset(kind: str, seed: int = 0) -> GaitProfile:
    """Cohort profiles: brisk regular gait vs slow, weak, variable gait."""
    rng = derive(seed, f"preset:{kind}")
    if kind == "typical_child":
        return GaitProfile(
            cadence_hz=float(np.clip(rng.normal(2.0, 0.1), 0.3, 3.5)),
            step_amplitude_mps2=4.0,
            amplitude_cv=0.05,
            asymmetry=0.02,
            noise_std_mps2=0.2,
            device_tilt_deg=5.0,
            seed=seed,
        )
    if kind == "impaired_gait":
        return GaitProfile(
            cadence_hz=float(np.clip(rng.normal(1.2, 0.15), 0.3, 3.5)),
            step_amplitude_mps2=2.0,
            amplitude_cv=0.25,
            asymmetry=0.15,
            noise_std_mps2=0.2,
            device_tilt_deg=5.0,
            seed=seed,
        )
    raise SimulatorError(f"unknown preset {kind!r} (typical_child or impaired_gait)")


class _LineSocket:
    """Blocking line-oriented socket wrapper."""

    def __init__(self, host: str, port: int, timeout_s: float) -> None:
        self.sock = socket.create_connection((host, port), timeout=timeout_s)
        self.file = self.sock.makefile("rb")

    def send(self, msg: Message) -> None:
        self.sock.sendall(encode(msg))

    def recv(self) -> Optional[Message]:
        line = self.file.readline()
        if not line:
            return None
        return decode(line)

    def close(self) -> None:
        try:
            self.file.close()
        finally:
            self.sock.close()


def run_client(
    profile: GaitProfile,
    server: str,
    participant_id: str,
    duration_s: float,
    speedup: float = 1.0,
    project_id: str = "default",
    rate_hz: float = 50.0,
    batch_samples: int = DEFAULT_BATCH_SAMPLES,
    start_timeout_s: float = 60.0,
    session_id: Optional[str] = None,
    fault_rate: float = 0.0,
) -> str:
    """Stream a synthetic session through the full three-phase protocol.

    Connects and sends Hello (Off -> Ready), waits for the server's Start,
    streams batches at real-time/speedup pace, honors seq-gap rejects by
    retransmitting, then sends Stop. fault_rate > 0 deliberately duplicates
    or skips batches to exercise the server's dedup/reject path. Returns
    the session id assigned by the server.
    """
    host, _, port_s = server.partition(":")
    if not port_s:
        raise SimulatorError(f"server must be host:port, got {server!r}")
    track, _ = synthesize(profile, duration_s, rate_hz)
    samples = list(track.samples())
    batches = [samples[i : i + batch_samples] for i in range(0, len(samples), batch_samples)]

    conn = _LineSocket(host, int(port_s), timeout_s=max(start_timeout_s, 10.0))
    fault_rng = derive(profile.seed, "faults")
    try:
        conn.send(
            Message(
                kind=MessageKind.HELLO,
                project_id=project_id,
                participant_id=participant_id,
                session_id=session_id,
                device_meta={"model": "simulator", "rate_hz": str(rate_hz)},
            )
        )
        armed = conn.recv()
        if armed is None or armed.kind != MessageKind.ARMED:
            raise SimulatorError(f"expected Armed, got {armed.kind.value if armed else 'EOF'}")
        sid = armed.session_id

        deadline = time.monotonic() + start_timeout_s
        started = False
        while time.monotonic() < deadline:
            conn.sock.settimeout(max(0.05, deadline - time.monotonic()))
            try:
                msg = conn.recv()
            except (TimeoutError, socket.timeout):
                break
            if msg is None:
                raise SimulatorError("server closed connection while Ready")
            if msg.kind == MessageKind.START:
                started = True
                break
        if not started:
            conn.send(Message(kind=MessageKind.STOP, session_id=sid))  # give up: back to Off
            return sid

        pace = (batch_samples / rate_hz) / speedup if speedup > 0 else 0.0
        next_seq = 1
        acked = 0
        while acked < len(batches):
            idx = next_seq - 1
            if idx >= len(batches):
                next_seq = acked + 1
                continue
            send_seq = next_seq
            if fault_rate > 0:
                roll = fault_rng.random()
                if roll < fault_rate / 2 and send_seq > 1:
                    send_seq -= 1  # duplicate the previous batch
                elif roll < fault_rate:
                    send_seq += 1  # skip ahead: creates a gap
            batch = batches[send_seq - 1] if send_seq - 1 < len(batches) else batches[idx]
            conn.send(
                Message(
                    kind=MessageKind.SAMPLE_BATCH,
                    session_id=sid,
                    seq=send_seq,
                    samples=batch,
                )
            )
            reply = conn.recv()
            if reply is None:
                raise SimulatorError("server closed connection while Streaming")
            if reply.kind == MessageKind.ACK:
                acked = max(acked, reply.seq or 0)
                next_seq = acked + 1
            elif reply.kind == MessageKind.ERROR and reply.expected_seq is not None:
                next_seq = reply.expected_seq  # retransmit from the gap
            elif reply.kind == MessageKind.STOP:
                break
            else:
                raise SimulatorError(f"unexpected {reply.kind.value} while streaming")
            if pace:
                time.sleep(pace)

        conn.send(Message(kind=MessageKind.STOP, session_id=sid))
        # drain until the connection closes or the server echoes the stop
        conn.sock.settimeout(5.0)
        try:
            while True:
                msg = conn.recv()
                if msg is None or msg.kind == MessageKind.STOP:
                    break
        except (TimeoutError, OSError):
            pass
        return sid
    finally:
        conn.close()
