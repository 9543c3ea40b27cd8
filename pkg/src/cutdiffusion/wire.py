"""CDN1 wire protocol: length-prefixed frames for remote denoising.

Frame layout, little-endian throughout:

    magic   4 bytes  b"CDN1"
    hlen    u32      header byte length
    header  hlen     UTF-8 JSON object
    plen    u32      payload byte length
    payload plen     raw bytes (tensors: float32, row-major)

Request headers carry {request_id, op, t, shape: [h, w, c], condition};
ops are "hello", "eps", "decode", and "echo". Responses mirror the header
with op "<op>_result"; failures come back as op "error" with a "reason"
field and the offending request_id. Tensor payloads are float32, so one
round trip preserves values to f32 precision exactly.

Header JSON is canonicalized (sorted keys, no spaces) so frames are
byte-reproducible across implementations.
"""

import json
import socket
import struct
import subprocess

import numpy as np

from .errors import ProtocolViolation, TransportError

MAGIC = b"CDN1"
MAX_HEADER_BYTES = 1 << 20
MAX_PAYLOAD_BYTES = 64 << 20


def encode_frame(header: dict, payload: bytes = b"") -> bytes:
    """Serialize one frame with a canonical JSON header."""
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if len(raw) > MAX_HEADER_BYTES:
        raise ProtocolViolation(f"header of {len(raw)} bytes exceeds cap")
    if len(payload) > MAX_PAYLOAD_BYTES:
        raise ProtocolViolation(f"payload of {len(payload)} bytes exceeds cap")
    return (
        MAGIC
        + struct.pack("<I", len(raw))
        + raw
        + struct.pack("<I", len(payload))
        + payload
    )


def encode_tensor(x: np.ndarray) -> bytes:
    """Row-major float32 little-endian bytes."""
    return np.ascontiguousarray(x, dtype="<f4").tobytes()


def decode_tensor(payload: bytes, shape) -> np.ndarray:
    expect = int(np.prod(shape)) * 4
    if len(payload) != expect:
        raise ProtocolViolation(
            f"payload holds {len(payload)} bytes, shape {tuple(shape)} needs {expect}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(tuple(shape)).astype(np.float32)


class FrameDecoder:
    """Incremental frame reassembler for stream transports.

    Feed arbitrary byte chunks; complete (header, payload) pairs come out.
    Raises ProtocolViolation on bad magic or oversized declared lengths.
    """

    def __init__(self):
        self._buf = bytearray()

    def feed(self, chunk: bytes):
        self._buf.extend(chunk)
        out = []
        while True:
            frame = self._try_take()
            if frame is None:
                return out
            out.append(frame)

    def _try_take(self):
        buf = self._buf
        if len(buf) < 8:
            return None
        if bytes(buf[:4]) != MAGIC:
            raise ProtocolViolation(f"bad magic {bytes(buf[:4])!r}")
        hlen = struct.unpack_from("<I", buf, 4)[0]
        if hlen > MAX_HEADER_BYTES:
            raise ProtocolViolation(f"declared header length {hlen} exceeds cap")
        if len(buf) < 8 + hlen + 4:
            return None
        plen = struct.unpack_from("<I", buf, 8 + hlen)[0]
        if plen > MAX_PAYLOAD_BYTES:
            raise ProtocolViolation(f"declared payload length {plen} exceeds cap")
        total = 8 + hlen + 4 + plen
        if len(buf) < total:
            return None
        try:
            header = json.loads(bytes(buf[8 : 8 + hlen]).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolViolation(f"undecodable header: {exc}")
        if not isinstance(header, dict):
            raise ProtocolViolation("header must be a JSON object")
        payload = bytes(buf[8 + hlen + 4 : total])
        del buf[:total]
        return header, payload


class _SocketStream:
    def __init__(self, sock):
        self.sock = sock

    def send(self, data: bytes):
        self.sock.sendall(data)

    def recv(self, n: int) -> bytes:
        return self.sock.recv(n)

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class _StdioStream:
    """Talks to a subprocess over its stdin/stdout."""

    def __init__(self, argv):
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )

    def send(self, data: bytes):
        self.proc.stdin.write(data)
        self.proc.stdin.flush()

    def recv(self, n: int) -> bytes:
        return self.proc.stdout.read1(n)

    def close(self):
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        self.proc.terminate()
        self.proc.wait(timeout=5)


def _connect(address: str):
    """Open a stream to an address.

    Forms: "host:port" for TCP, "stdio:<command line>" to spawn a child
    process speaking frames on stdin/stdout.
    """
    if address.startswith("stdio:"):
        import shlex

        return _StdioStream(shlex.split(address[len("stdio:"):]))
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise TransportError(0, f"unusable address {address!r}")
    try:
        return _SocketStream(socket.create_connection((host, int(port)), timeout=30))
    except OSError as exc:
        raise TransportError(0, f"connect to {address} failed: {exc}")


class Client:
    """One CDN1 connection with a single request in flight."""

    def __init__(self, address: str, connect=None):
        self._stream = (connect or _connect)(address)
        self._decoder = FrameDecoder()
        self._pending = []

    def close(self):
        self._stream.close()

    def _round_trip(self, header: dict, payload: bytes):
        rid = header["request_id"]
        try:
            self._stream.send(encode_frame(header, payload))
            while not self._pending:
                chunk = self._stream.recv(65536)
                if not chunk:
                    raise TransportError(rid, "connection closed mid-response")
                self._pending.extend(self._decoder.feed(chunk))
        except OSError as exc:
            raise TransportError(rid, f"i/o failure: {exc}")
        reply, reply_payload = self._pending.pop(0)
        if reply.get("op") == "error":
            raise ProtocolViolation(
                f"server error for request {reply.get('request_id')}: "
                f"{reply.get('reason', 'unspecified')}"
            )
        if reply.get("request_id") != rid:
            raise ProtocolViolation(
                f"response id {reply.get('request_id')} does not match request {rid}"
            )
        if reply.get("op") != header["op"] + "_result":
            raise ProtocolViolation(f"unexpected response op {reply.get('op')!r}")
        return reply, reply_payload

    def hello(self, shape, T: int, request_id: int = 0) -> dict:
        """Negotiate patch shape and step count; returns the server's terms."""
        header = {
            "request_id": request_id,
            "op": "hello",
            "t": T,
            "shape": list(shape),
            "condition": "",
        }
        reply, _ = self._round_trip(header, b"")
        if list(reply.get("shape", [])) != list(shape) or reply.get("t") != T:
            raise ProtocolViolation(
                f"server negotiated shape {reply.get('shape')} T {reply.get('t')}, "
                f"engine needs shape {list(shape)} T {T}"
            )
        return reply

    def eps(self, latent: np.ndarray, t: int, condition: str, request_id: int) -> np.ndarray:
        header = {
            "request_id": request_id,
            "op": "eps",
            "t": t,
            "shape": list(latent.shape),
            "condition": condition,
        }
        reply, payload = self._round_trip(header, encode_tensor(latent))
        return decode_tensor(payload, reply.get("shape", latent.shape))

    def echo(self, payload: bytes, request_id: int = 0) -> bytes:
        header = {
            "request_id": request_id,
            "op": "echo",
            "t": 0,
            "shape": [0, 0, 0],
            "condition": "",
        }
        _, reply_payload = self._round_trip(header, payload)
        return reply_payload

    def decode(self, latent: np.ndarray, request_id: int = 0) -> bytes:
        header = {
            "request_id": request_id,
            "op": "decode",
            "t": 0,
            "shape": list(latent.shape),
            "condition": "",
        }
        _, reply_payload = self._round_trip(header, encode_tensor(latent))
        return reply_payload
