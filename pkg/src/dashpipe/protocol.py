"""Wire protocol: framing, byte-payload command strings, and payload pairing.

Every connection carries a stream of self-delimiting frames:

    tag(1) | payload_id(8, big-endian) | length(4, big-endian) | body

Tags:
    0x01  byte payload (UTF-8 command text), payload_id is always 0
    0x02  file-payload chunk
    0x03  file-payload end marker (empty body)
    0x04  ledger event record (JSON), payload_id is always 0

A file payload is the concatenation of its 0x02 chunk bodies terminated by a
single 0x03 frame. Chunks of different payload ids may interleave; byte and
file payloads for the same id may arrive in either order, which the
PairingTable resolves before handing a completed file to the application.

Byte payloads are colon-delimited command strings, "CMD" or "CMD:id:filename".
The one exception is the hardware handshake reply, "HW_INFO:<json>", whose
body after the first colon is a JSON document rather than id/filename fields.
"""

from __future__ import annotations

import itertools
import json
import re
import struct
from dataclasses import dataclass, field

from .errors import ConnectionClosedError, ProtocolError
from .model import Command, HardwareInfo, command_to_string, parse_command

TAG_BYTE = 0x01
TAG_FILE_CHUNK = 0x02
TAG_FILE_END = 0x03
TAG_EVENT = 0x04

_HEADER = struct.Struct(">BQI")
HEADER_SIZE = _HEADER.size

DEFAULT_CHUNK_SIZE = 32 * 1024
MAX_FRAME_BODY = 64 * 1024 * 1024

# Commands that arrive paired with a file payload.
FILE_PAIRED_COMMANDS = frozenset({Command.ANALYSE, Command.SEGMENT, Command.RETURN})

_FILENAME_RE = re.compile(r"^[A-Za-z0-9._-]+$")


# ---------------------------------------------------------------------------
# Byte-payload command strings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CommandMessage:
    """Decoded colon-delimited command text."""

    command: Command
    payload_id: int | None = None
    filename: str | None = None


@dataclass(frozen=True)
class HardwareMessage:
    """Decoded HW_INFO reply carrying a node's hardware descriptor.

    node_name identifies the sender; endpoint ids are assigned by the
    receiving runtime, so the fleet-unique human name travels here.
    """

    hw: HardwareInfo
    node_name: str | None = None


def encode_byte_payload(
    command: Command,
    payload_id: int | None = None,
    filename: str | None = None,
) -> bytes:
    """Build command text: "CMD" standalone or "CMD:id:filename" file-paired."""
    if (payload_id is None) != (filename is None):
        raise ProtocolError("payload_id and filename must be given together")
    if command is Command.HW_INFO:
        raise ProtocolError("HW_INFO payloads are built with encode_hw_info")
    if filename is None:
        return command_to_string(command).encode("utf-8")
    if not _FILENAME_RE.match(filename):
        raise ProtocolError(f"filename {filename!r} contains characters outside [A-Za-z0-9._-]")
    return f"{command_to_string(command)}:{payload_id}:{filename}".encode("utf-8")


def encode_hw_info(hw: HardwareInfo, node_name: str | None = None) -> bytes:
    doc = json.loads(hw.to_json())
    if node_name is not None:
        doc["name"] = node_name
    return b"HW_INFO:" + json.dumps(doc).encode("utf-8")


def decode_byte_payload(raw: bytes) -> CommandMessage | HardwareMessage:
    """Inverse of encode_byte_payload / encode_hw_info."""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ProtocolError("byte payload is not valid UTF-8") from None
    if text.startswith("HW_INFO:"):
        payload = text[len("HW_INFO:"):]
        hw = HardwareInfo.from_json(payload)
        name = json.loads(payload).get("name")
        return HardwareMessage(hw, str(name) if name is not None else None)
    fields = text.split(":")
    command = parse_command(fields[0])
    if len(fields) == 1:
        if command is Command.HW_INFO:
            raise ProtocolError("HW_INFO payload missing hardware JSON")
        return CommandMessage(command)
    if len(fields) != 3:
        raise ProtocolError(f"expected 1 or 3 colon-delimited fields, got {len(fields)}: {text!r}")
    try:
        payload_id = int(fields[1])
    except ValueError:
        raise ProtocolError(f"payload id {fields[1]!r} is not an integer") from None
    return CommandMessage(command, payload_id, fields[2])


# ---------------------------------------------------------------------------
# Frame codec
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    tag: int
    payload_id: int
    body: bytes


def encode_frame(tag: int, payload_id: int, body: bytes) -> bytes:
    if len(body) > MAX_FRAME_BODY:
        raise ProtocolError(f"frame body of {len(body)} bytes exceeds {MAX_FRAME_BODY}")
    return _HEADER.pack(tag, payload_id, len(body)) + body


def encode_byte_frame(raw: bytes) -> bytes:
    return encode_frame(TAG_BYTE, 0, raw)


def encode_event_frame(raw: bytes) -> bytes:
    return encode_frame(TAG_EVENT, 0, raw)


def encode_file_frames(
    payload_id: int, content: bytes, chunk_size: int = DEFAULT_CHUNK_SIZE
) -> list[bytes]:
    """Chunk a file payload into 0x02 frames plus the terminating 0x03 frame."""
    if chunk_size <= 0:
        raise ValueError("chunk_size must be positive")
    frames = [
        encode_frame(TAG_FILE_CHUNK, payload_id, content[off:off + chunk_size])
        for off in range(0, len(content), chunk_size)
    ]
    frames.append(encode_frame(TAG_FILE_END, payload_id, b""))
    return frames


class FrameParser:
    """Incremental frame parser; feed() yields complete frames in order."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Frame]:
        self._buf.extend(data)
        frames = []
        while True:
            if len(self._buf) < HEADER_SIZE:
                break
            tag, payload_id, length = _HEADER.unpack_from(self._buf)
            if length > MAX_FRAME_BODY:
                raise ProtocolError(
                    f"frame length {length} exceeds {MAX_FRAME_BODY} byte cap"
                )
            if tag not in (TAG_BYTE, TAG_FILE_CHUNK, TAG_FILE_END, TAG_EVENT):
                raise ProtocolError(f"unknown frame tag 0x{tag:02x}")
            if len(self._buf) < HEADER_SIZE + length:
                break
            body = bytes(self._buf[HEADER_SIZE:HEADER_SIZE + length])
            del self._buf[:HEADER_SIZE + length]
            frames.append(Frame(tag, payload_id, body))
        return frames

    def finish(self) -> None:
        """Assert the stream ended on a frame boundary."""
        if self._buf:
            raise ConnectionClosedError(
                f"stream truncated mid-frame with {len(self._buf)} buffered bytes"
            )


# ---------------------------------------------------------------------------
# Payload-level stream codec (whole payload events in, bytes out, and back)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BytePayload:
    raw: bytes


@dataclass(frozen=True)
class FilePayload:
    payload_id: int
    content: bytes


@dataclass(frozen=True)
class EventRecord:
    raw: bytes


PayloadEvent = BytePayload | FilePayload | EventRecord


def frame_stream_encode(
    events: list[PayloadEvent], chunk_size: int = DEFAULT_CHUNK_SIZE
) -> bytes:
    out = bytearray()
    for event in events:
        if isinstance(event, BytePayload):
            out += encode_byte_frame(event.raw)
        elif isinstance(event, FilePayload):
            for frame in encode_file_frames(event.payload_id, event.content, chunk_size):
                out += frame
        elif isinstance(event, EventRecord):
            out += encode_event_frame(event.raw)
        else:
            raise TypeError(f"unsupported payload event {event!r}")
    return bytes(out)


def frame_stream_decode(data: bytes) -> list[PayloadEvent]:
    """Strict whole-stream decode; raises if a file payload is left dangling."""
    parser = FrameParser()
    frames = parser.feed(data)
    parser.finish()
    events: list[PayloadEvent] = []
    partial: dict[int, bytearray] = {}
    for frame in frames:
        if frame.tag == TAG_BYTE:
            events.append(BytePayload(frame.body))
        elif frame.tag == TAG_EVENT:
            events.append(EventRecord(frame.body))
        elif frame.tag == TAG_FILE_CHUNK:
            partial.setdefault(frame.payload_id, bytearray()).extend(frame.body)
        else:  # TAG_FILE_END
            content = bytes(partial.pop(frame.payload_id, b""))
            events.append(FilePayload(frame.payload_id, content))
    if partial:
        raise ConnectionClosedError(
            f"stream ended with incomplete file payloads: {sorted(partial)}"
        )
    return events


# ---------------------------------------------------------------------------
# Byte/file payload pairing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReadyFile:
    """A file payload matched with its command and filename, ready for use.

    Emission obligates the receiver to send a COMPLETE command message back to
    the original sender.
    """

    payload_id: int
    filename: str
    command: Command
    content: bytes


@dataclass
class PairingTable:
    """Arrival-order-independent matching of byte and file payloads.

    A file-paired command's byte payload records the filename and command for
    its payload id; the file payload itself accumulates chunk by chunk. Once
    all three records exist for an id, exactly one ReadyFile is emitted and
    the id is purged everywhere.
    """

    incoming_files: dict[int, bytearray] = field(default_factory=dict)
    completed_files: dict[int, bytes] = field(default_factory=dict)
    pending_filenames: dict[int, str] = field(default_factory=dict)
    pending_commands: dict[int, Command] = field(default_factory=dict)
    _emitted: set[int] = field(default_factory=set)

    def on_byte_payload(self, message: CommandMessage) -> ReadyFile | None:
        """Record a file-paired command; standalone commands are the caller's
        concern and are rejected here."""
        if message.payload_id is None:
            raise ProtocolError(f"{message.command.name} is not file-paired")
        payload_id = message.payload_id
        if payload_id in self._emitted:
            raise ProtocolError(f"payload id {payload_id} was already completed and purged")
        if payload_id in self.pending_commands:
            raise ProtocolError(f"duplicate byte payload for id {payload_id}")
        self.pending_filenames[payload_id] = message.filename
        self.pending_commands[payload_id] = message.command
        return self._try_emit(payload_id)

    def on_file_chunk(self, payload_id: int, data: bytes) -> None:
        if payload_id in self._emitted or payload_id in self.completed_files:
            raise ProtocolError(f"chunk for already-completed payload id {payload_id}")
        self.incoming_files.setdefault(payload_id, bytearray()).extend(data)

    def on_file_end(self, payload_id: int) -> ReadyFile | None:
        if payload_id in self._emitted or payload_id in self.completed_files:
            raise ProtocolError(f"duplicate completion for payload id {payload_id}")
        content = bytes(self.incoming_files.pop(payload_id, b""))
        self.completed_files[payload_id] = content
        return self._try_emit(payload_id)

    def on_file_payload(self, payload: FilePayload) -> ReadyFile | None:
        """Convenience for pre-assembled file payloads."""
        self.on_file_chunk(payload.payload_id, payload.content)
        return self.on_file_end(payload.payload_id)

    def _try_emit(self, payload_id: int) -> ReadyFile | None:
        if (
            payload_id in self.completed_files
            and payload_id in self.pending_filenames
            and payload_id in self.pending_commands
        ):
            ready = ReadyFile(
                payload_id=payload_id,
                filename=self.pending_filenames.pop(payload_id),
                command=self.pending_commands.pop(payload_id),
                content=self.completed_files.pop(payload_id),
            )
            self._emitted.add(payload_id)
            return ready
        return None


def payload_id_counter(start: int = 1):
    """Per-sender monotonic payload id source; never reuses an id in a session."""
    return itertools.count(start)
