"""Chain structure of the four repeater protocols.

P1: encoded links everywhere, co-located swaps.
P2: encoded links on every other segment, remaining segments carry the
    electron pairs that mediate the swaps.
P3 / P4: unencoded counterparts of P1 / P2.
"""

from __future__ import annotations

from enum import Enum


class Protocol(str, Enum):
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper()
        if text.isdigit():
            text = "P" + text
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown protocol {value!r}") from None

    @property
    def encoded(self) -> bool:
        return self in (Protocol.P1, Protocol.P2)

    @property
    def code_size(self) -> int:
        return 3 if self.encoded else 1

    @property
    def remote_mediator(self) -> bool:
        """Swaps use an electron pair spanning a full segment (P2, P4)."""
        return self in (Protocol.P2, Protocol.P4)

    def memory_links(self, n: int) -> int:
        """Segments whose entanglement is stored in nuclear spins."""
        return 2**n if not self.remote_mediator else 2 ** (n - 1)

    def link_pairs(self, n: int) -> int:
        """Bell pairs that must all be ready before swapping (M for T1)."""
        return self.code_size * self.memory_links(n)

    def mediator_pairs(self, n: int) -> int:
        """Electron pairs established during the swap stage (M' for T2)."""
        m = self.code_size
        if self.remote_mediator:
            return m * 2 ** (n - 1)
        return m * (2**n - 1)

    def nv_count(self, n: int) -> int:
        return {
            Protocol.P1: 6 * 2**n,
            Protocol.P2: 3 * (2**n + 1),
            Protocol.P3: 2 ** (n + 1),
            Protocol.P4: 2**n + 1,
        }[self]
