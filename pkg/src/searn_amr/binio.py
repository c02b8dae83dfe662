"""Little-endian, length-prefixed binary records for the model file."""

import struct


class FormatError(ValueError):
    pass


class Writer:
    def __init__(self):
        self.parts = []

    def u32(self, x):
        self.parts.append(struct.pack("<I", x))

    def u64(self, x):
        self.parts.append(struct.pack("<Q", x))

    def f64(self, x):
        self.parts.append(struct.pack("<d", x))

    def raw(self, b: bytes):
        self.parts.append(b)

    def blob(self, b: bytes):
        self.u64(len(b))
        self.parts.append(b)

    def text(self, s: str):
        self.blob(s.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise FormatError(f"truncated model file (wanted {n} bytes at offset {self.pos})")
        out = self.data[self.pos:self.pos + n].tobytes()
        self.pos += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def u64(self):
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self):
        return struct.unpack("<d", self.take(8))[0]

    def blob(self) -> bytes:
        return self.take(self.u64())

    def text(self) -> str:
        try:
            return self.blob().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"corrupt string at offset {self.pos}") from exc

    def at_end(self) -> bool:
        return self.pos == len(self.data)
