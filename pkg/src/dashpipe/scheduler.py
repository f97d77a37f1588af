"""Per-pair assignment decisions over the connected fleet.

Outer videos carry higher priority than inner ones: each pair is scheduled
outer first, and the inner video (or its segments) is never placed on a
device with more processing capacity than the outer video's target. Within a
pick, idle devices always beat busy ones; when everything is occupied, the
video queues on the worker with the shortest queue, ties broken by capacity
and then by name so decisions are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ProtocolError
from .model import Command, HardwareInfo, capacity_score
from .segmenter import segment_name

# Target id used for assignments the master processes itself.
SELF = None


@dataclass
class DeviceState:
    """Scheduler's view of one device; endpoint_id is None for the master."""

    name: str
    hw: HardwareInfo
    endpoint_id: str | None = SELF
    busy: bool = False
    queue_len: int = 0

    @property
    def is_self(self) -> bool:
        return self.endpoint_id is SELF

    @property
    def occupied(self) -> bool:
        return self.busy or self.queue_len > 0


@dataclass(frozen=True)
class Assignment:
    video_name: str
    target_id: str | None  # SELF (None) or an endpoint id
    target_name: str
    command: Command
    segment_count: int = 1

    @property
    def is_local(self) -> bool:
        return self.target_id is SELF


def _cap(device: DeviceState) -> tuple:
    return capacity_score(device.hw)


def _pref_key(device: DeviceState) -> tuple:
    # min() over this key picks the preferred device: highest capacity,
    # capacity ties broken by ascending name.
    return (tuple(-v for v in _cap(device)), device.name)


def _best(devices) -> DeviceState:
    return min(devices, key=_pref_key)


def pick_device(candidates: list[DeviceState]) -> DeviceState:
    """One video's placement among the given candidate devices."""
    master = next((d for d in candidates if d.is_self), None)
    workers = [d for d in candidates if not d.is_self]

    if master is not None and not master.occupied and _best(candidates) is master:
        return master
    idle_workers = [d for d in workers if not d.occupied]
    if idle_workers:
        return _best(idle_workers)
    if master is not None and not master.occupied:
        return master
    if workers:
        shortest = min(d.queue_len for d in workers)
        return _best(d for d in workers if d.queue_len == shortest)
    return master


def schedule_pair(
    devices: list[DeviceState],
    outer_name: str,
    inner_name: str,
    segmentation_enabled: bool,
    segment_count: int = 2,
) -> list[Assignment]:
    """Decide placements for one downloaded outer/inner pair.

    Pure function: the caller's device states are not mutated; bookkeeping
    copies track the occupancy effects of earlier picks within the pair.
    """
    state = [replace(d) for d in devices]
    masters = [d for d in state if d.is_self]
    if len(masters) != 1:
        raise ValueError("device list must contain exactly one SELF entry")
    master = masters[0]
    workers = sorted((d for d in state if not d.is_self), key=_pref_key)

    def assign(video: str, device: DeviceState, command: Command, segments: int = 1) -> Assignment:
        device.queue_len += 1
        device.busy = True
        return Assignment(
            video_name=video,
            target_id=device.endpoint_id,
            target_name=device.name,
            command=command,
            segment_count=segments,
        )

    if not workers:
        return [
            assign(outer_name, master, Command.ANALYSE),
            assign(inner_name, master, Command.ANALYSE),
        ]

    if len(workers) == 1:
        worker = workers[0]
        if _pref_key(master) <= _pref_key(worker):
            return [
                assign(outer_name, master, Command.ANALYSE),
                assign(inner_name, worker, Command.ANALYSE),
            ]
        return [
            assign(outer_name, worker, Command.ANALYSE),
            assign(inner_name, master, Command.ANALYSE),
        ]

    if segmentation_enabled:
        everyone = [master, *workers]
        outer_target = _best(everyone)
        assignments = [assign(outer_name, outer_target, Command.ANALYSE)]
        remaining = sorted((d for d in everyone if d is not outer_target), key=_pref_key)
        for i in range(segment_count):
            target = remaining[i % len(remaining)]
            assignments.append(
                assign(segment_name(inner_name, i), target, Command.SEGMENT, segment_count)
            )
        return assignments

    outer_target = pick_device([master, *workers])
    assignments = [assign(outer_name, outer_target, Command.ANALYSE)]
    # Inner videos go to the computationally weaker end of the fleet: never
    # to a device with more capacity than the outer video's target.
    ceiling = _cap(outer_target)
    candidates = [d for d in (master, *workers) if _cap(d) <= ceiling]
    assignments.append(assign(inner_name, pick_device(candidates), Command.ANALYSE))
    return assignments


def on_worker_result(devices: list[DeviceState], endpoint_id: str | None) -> DeviceState:
    """Mark one assigned video finished on the device that produced a result."""
    for device in devices:
        if device.endpoint_id == endpoint_id:
            if device.queue_len < 1:
                raise ProtocolError(
                    f"result from {device.name} which has no outstanding videos"
                )
            device.queue_len -= 1
            device.busy = device.queue_len > 0
            return device
    raise ProtocolError(f"result from unknown endpoint {endpoint_id!r}")
