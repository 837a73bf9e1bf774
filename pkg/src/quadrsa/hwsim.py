"""Cycle-level model of the quad-core RSA processor.

Top FSM::

    IDLE --sel=01--> LOAD_KEY (3*n/32 cycles) --> IDLE
    IDLE --sel=10--> LOAD_DATA (n/32 cycles)  --> IDLE
    IDLE --sel=11--> MONT1 -> MONT2 -> {MONT3 -> MONT4}* -> MONT5 -> DONE (n/32 output cycles)

Every MONTx state runs one Montgomery product through the Mont block, whose
own FSM spends one INIT cycle, ``n / word_radix_bits`` WORK cycles and one
DONE cycle.  A ``sel`` command is accepted at the clock edge ending the
previous cycle, so commands themselves cost no cycles and::

    total = 3n/32 + n/32 + ops * (t + 2) + n/32

At n = 1024 that is 96 + 32 + ops * 130 + 32.

Key bus layout (least significant word first): exponent, modulus, then
``2^(2n) mod M``.  The quotient constant Mprime is derived from the low word
of M as it is latched rather than sent on the bus.
"""

from __future__ import annotations

import csv
from array import array
from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from math import lcm
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from quadrsa.bigint import BigUint, mod_reduce
from quadrsa.errors import DomainError, InvariantError, ProtocolError
from quadrsa.montgomery import DEFAULT_CONFIG, ParallelConfig, precompute_digit_multiples

BUS_BITS = 32
HANDSHAKE_CYCLES = 2  # Mont INIT + DONE around the WORK phase
START_OVERHEAD_CYCLES = 0


class TopState(IntEnum):
    IDLE = 0
    LOAD_KEY = 1
    LOAD_DATA = 2
    MONT1 = 3
    MONT2 = 4
    MONT3 = 5
    MONT4 = 6
    MONT5 = 7
    DONE = 8


class MontState(IntEnum):
    IDLE = 0
    INIT = 1
    WORK = 2
    DONE = 3


class Sel(IntEnum):
    LOAD_KEY = 0b01
    LOAD_DATA = 0b10
    START = 0b11


T = TopState
TOP_TRANSITIONS = frozenset({
    (T.IDLE, T.LOAD_KEY), (T.IDLE, T.LOAD_DATA), (T.IDLE, T.MONT1),
    (T.LOAD_KEY, T.IDLE), (T.LOAD_DATA, T.IDLE),
    (T.MONT1, T.MONT2),
    (T.MONT2, T.MONT3), (T.MONT2, T.MONT4), (T.MONT2, T.MONT5),
    (T.MONT3, T.MONT4),
    (T.MONT4, T.MONT3), (T.MONT4, T.MONT4), (T.MONT4, T.MONT5),
    (T.MONT5, T.DONE),
})
MONT_TRANSITIONS = frozenset({
    (MontState.IDLE, MontState.INIT),
    (MontState.INIT, MontState.WORK),
    (MontState.WORK, MontState.DONE),
    (MontState.DONE, MontState.INIT),
    (MontState.DONE, MontState.IDLE),
})
del T

# Register groups used by the CSV export.
IO_REGISTERS = ("exponent", "modulus", "r2", "mprime", "plaintext", "ciphertext")
ACC_REGISTERS = ("p_acc", "r_acc")


def register_names(partitions_k: int) -> tuple[str, ...]:
    cores = tuple(f"core{j}" for j in range(partitions_k))
    return IO_REGISTERS + ("x_m",) + cores + ACC_REGISTERS


class SimRecord(NamedTuple):
    cycle: int
    top_state: TopState
    mont_state: MontState
    toggles: dict
    toggles_total: int


class SimTrace:
    """Per-cycle states and per-register toggle counts, stored column-wise."""

    def __init__(self, registers: Sequence[str]):
        self.registers = tuple(registers)
        self.top_states = array("B")
        self.mont_states = array("B")
        self.columns = {r: array("I") for r in self.registers}

    def append(self, top: TopState, mont: MontState, toggles: dict) -> int:
        unknown = set(toggles) - set(self.registers)
        if unknown:
            raise DomainError(f"unknown registers {sorted(unknown)}")
        self.top_states.append(top)
        self.mont_states.append(mont)
        for r, col in self.columns.items():
            v = toggles.get(r, 0)
            if v < 0:
                raise InvariantError("negative toggle count")
            col.append(v)
        return len(self.top_states) - 1

    @classmethod
    def from_toggle_counts(cls, counts: Sequence[int], register: str = "x_m") -> SimTrace:
        """Hand-built trace: idle states, all activity attributed to one register."""
        tr = cls(register_names(4))
        for c in counts:
            tr.append(TopState.IDLE, MontState.IDLE, {register: c})
        return tr

    def __len__(self) -> int:
        return len(self.top_states)

    def record(self, i: int) -> SimRecord:
        if i < 0:
            i += len(self)
        toggles = {r: col[i] for r, col in self.columns.items()}
        return SimRecord(i, TopState(self.top_states[i]), MontState(self.mont_states[i]),
                         toggles, sum(toggles.values()))

    def __iter__(self) -> Iterator[SimRecord]:
        return (self.record(i) for i in range(len(self)))

    def column(self, name: str) -> np.ndarray:
        return np.frombuffer(self.columns[name], dtype=np.uint32).astype(np.int64)

    def group_total(self, names: Sequence[str]) -> np.ndarray:
        out = np.zeros(len(self), dtype=np.int64)
        for n in names:
            out += self.column(n)
        return out

    def toggles_total(self) -> np.ndarray:
        return self.group_total(self.registers)

    def write_csv(self, path: str | Path) -> None:
        cores = [r for r in self.registers if r.startswith("core")]
        header = (["cycle", "top_state", "mont_state", "toggles_total"]
                  + [f"toggles_{c}" for c in cores] + ["toggles_xm", "toggles_acc", "toggles_io"])
        total = self.toggles_total()
        core_cols = [self.column(c) for c in cores]
        xm = self.column("x_m")
        acc = self.group_total(ACC_REGISTERS)
        io = self.group_total(IO_REGISTERS)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(len(self)):
                w.writerow([i, TopState(self.top_states[i]).name, MontState(self.mont_states[i]).name,
                            int(total[i])] + [int(c[i]) for c in core_cols]
                           + [int(xm[i]), int(acc[i]), int(io[i])])


@dataclass(frozen=True)
class MontOp:
    index: int
    name: str
    bit_index: int
    start: int
    end: int  # exclusive


class RunResult(NamedTuple):
    ciphertext: int
    total_cycles: int
    mont_op_count: int
    trace: SimTrace
    op_log: list


def int_to_bus_words(value: int, n_bits: int, bus_bits: int = BUS_BITS) -> list[int]:
    if value < 0 or value >> n_bits:
        raise DomainError(f"value does not fit in {n_bits} bits")
    return list(BigUint(value, n_bits, bus_bits).words)


def key_bus_words(exponent: int, modulus: int, n_bits: int, bus_bits: int = BUS_BITS) -> list[int]:
    """The LOAD_KEY word stream: exponent, modulus, 2^(2n) mod modulus."""
    r2 = mod_reduce(BigUint.from_int(1 << (2 * n_bits)), BigUint.from_int(modulus)).value
    return (int_to_bus_words(exponent, n_bits, bus_bits)
            + int_to_bus_words(modulus, n_bits, bus_bits)
            + int_to_bus_words(r2, n_bits, bus_bits))


def block_bits_for(*values: int, cfg: ParallelConfig = DEFAULT_CONFIG, bus_bits: int = BUS_BITS) -> int:
    """Smallest block width holding every value and divisible by bus and radix."""
    step = lcm(bus_bits, cfg.word_radix_bits)
    need = max(1, max(v.bit_length() for v in values))
    return -(-need // step) * step


def derive_mprime(low_word: int, w: int) -> int:
    """-m^-1 mod 2^w from the low bits of m (Newton iteration seeded with m itself)."""
    mask = (1 << w) - 1
    m0 = low_word & mask
    x, bits = m0, 3  # m*m == 1 (mod 8) for odd m
    while bits < w:
        x = (x * (2 - m0 * x)) & mask
        bits *= 2
    return -x & mask


class RsaMachine:
    """The top-level processor: registers, top FSM, Mont block and k cores."""

    def __init__(self, n_bits: int = 1024, cfg: ParallelConfig = DEFAULT_CONFIG, bus_bits: int = BUS_BITS):
        if n_bits % bus_bits:
            raise DomainError(f"block width {n_bits} is not a multiple of the {bus_bits}-bit bus")
        if cfg.word_radix_bits > bus_bits:
            raise DomainError("word radix wider than the bus cannot derive Mprime from one word")
        self.n_bits = n_bits
        self.cfg = cfg
        self.bus_bits = bus_bits
        self.work_cycles = cfg.iterations(n_bits)
        self.reg_words = n_bits // bus_bits
        self.key_words = 3 * self.reg_words
        self.data_words = self.reg_words
        self.output_cycles = self.reg_words
        self.registers_order = register_names(cfg.partitions_k)
        self.reset()

    # -- state -----------------------------------------------------------------

    def reset(self) -> None:
        self.regs = dict.fromkeys(self.registers_order, 0)
        self.top = TopState.IDLE
        self.mont = MontState.IDLE
        self.trace = SimTrace(self.registers_order)
        self.transitions: Counter = Counter()
        self.op_log: list[MontOp] = []
        self.output_words: list[int] = []
        self.key_loaded = False
        self.data_loaded = False
        self.halted = False
        self._pending = None
        self._words: list[int] = []
        self._pos = 0

    @property
    def registers(self) -> dict:
        return dict(self.regs)

    def _set_top(self, new: TopState) -> None:
        if (self.top, new) not in TOP_TRANSITIONS:
            raise InvariantError(f"illegal top transition {self.top.name} -> {new.name}")
        self.transitions[(self.top, new)] += 1
        self.top = new

    def _set_mont(self, new: MontState) -> None:
        if (self.mont, new) not in MONT_TRANSITIONS:
            raise InvariantError(f"illegal Mont transition {self.mont.name} -> {new.name}")
        self.transitions[(self.mont, new)] += 1
        self.mont = new

    def _write(self, name: str, value: int, toggles: dict) -> None:
        old = self.regs[name]
        if old != value:
            toggles[name] = toggles.get(name, 0) + (old ^ value).bit_count()
            self.regs[name] = value

    # -- commands ----------------------------------------------------------------

    def command(self, sel: Sel, words: Sequence[int] | None = None) -> None:
        """Drive ``sel`` (and the bus stream for loads); takes effect next cycle."""
        if self.halted:
            raise ProtocolError("machine is DONE; reset before issuing commands")
        if self.top != TopState.IDLE or self._pending is not None:
            raise ProtocolError(f"command {Sel(sel).name} issued while {self.top.name}")
        sel = Sel(sel)
        if sel == Sel.START:
            if not (self.key_loaded and self.data_loaded):
                raise ProtocolError("START requires both key and data to be loaded")
            m = self.regs["modulus"]
            if m < 3 or not m & 1:
                raise DomainError("loaded modulus must be odd and at least 3")
            if self.regs["plaintext"] >= m or self.regs["r2"] >= m:
                raise DomainError("plaintext and r2 registers must be below the modulus")
            self._pending = (sel, [])
            return
        expected = self.key_words if sel == Sel.LOAD_KEY else self.data_words
        words = list(words or [])
        if len(words) != expected:
            raise ProtocolError(f"{sel.name} needs {expected} bus words, got {len(words)}")
        if any(not 0 <= w < (1 << self.bus_bits) for w in words):
            raise ProtocolError("bus word out of range")
        self._pending = (sel, words)

    def step(self) -> SimRecord:
        """Advance exactly one clock cycle and return its record."""
        i = self._tick()
        return self.trace.record(i)

    def _tick(self) -> int:
        if self.halted:
            raise ProtocolError("machine is DONE; reset before stepping")
        toggles: dict = {}
        if self.top == TopState.IDLE and self._pending is not None:
            self._accept()
        top, mont = self.top, self.mont
        if top == TopState.IDLE:
            pass
        elif top in (TopState.LOAD_KEY, TopState.LOAD_DATA):
            self._load_cycle(toggles)
        elif top == TopState.DONE:
            self._output_cycle(toggles)
        else:
            self._mont_cycle(toggles)
        return self.trace.append(top, mont, toggles)

    def _accept(self) -> None:
        sel, words = self._pending
        self._pending = None
        if sel == Sel.START:
            self._exp_bits = self.regs["exponent"].bit_length()
            self._bit = 0
            self._op_index = 0
            self._begin_op(TopState.MONT1)
            return
        self._words, self._pos = words, 0
        self._set_top(TopState.LOAD_KEY if sel == Sel.LOAD_KEY else TopState.LOAD_DATA)

    # -- load / output ---------------------------------------------------------------

    def _load_cycle(self, toggles: dict) -> None:
        word, pos = self._words[self._pos], self._pos
        if self.top == TopState.LOAD_KEY:
            name = ("exponent", "modulus", "r2")[pos // self.reg_words]
            slot = pos % self.reg_words
        else:
            name, slot = "plaintext", pos
        shift = slot * self.bus_bits
        cleared = self.regs[name] & ~(((1 << self.bus_bits) - 1) << shift)
        self._write(name, cleared | (word << shift), toggles)
        if name == "modulus" and slot == 0:
            self._write("mprime", derive_mprime(word, self.cfg.word_radix_bits), toggles)
        self._pos += 1
        if self._pos == len(self._words):
            if self.top == TopState.LOAD_KEY:
                self.key_loaded = True
            else:
                self.data_loaded = True
            self._set_top(TopState.IDLE)

    def _output_cycle(self, toggles: dict) -> None:
        ct = self.regs["ciphertext"]
        self.output_words.append(ct & ((1 << self.bus_bits) - 1))
        self._write("ciphertext", ct >> self.bus_bits, toggles)
        if len(self.output_words) == self.output_cycles:
            self.halted = True

    # -- Montgomery ----------------------------------------------------------------

    def _operands(self, op: TopState) -> tuple[int, int, str]:
        r = self.regs
        return {
            TopState.MONT1: (r["r2"], r["plaintext"], "p_acc"),
            TopState.MONT2: (r["r2"], 1, "r_acc"),
            TopState.MONT3: (r["r_acc"], r["p_acc"], "r_acc"),
            TopState.MONT4: (r["p_acc"], r["p_acc"], "p_acc"),
            TopState.MONT5: (1, r["r_acc"], "ciphertext"),
        }[op]

    def _begin_op(self, op: TopState) -> None:
        self._set_top(op)
        self._set_mont(MontState.INIT)
        self._op_start = len(self.trace)

    def _mont_cycle(self, toggles: dict) -> None:
        cfg = self.cfg
        k = cfg.partitions_k
        if self.mont == MontState.INIT:
            x, y, dest = self._operands(self.top)
            self._dest = dest
            self._mults = [precompute_digit_multiples(y, j, cfg) for j in range(k)]
            self._write("x_m", x, toggles)
            for j in range(k):
                self._write(f"core{j}", 0, toggles)
            self._work = 0
            self._set_mont(MontState.WORK)
        elif self.mont == MontState.WORK:
            self._work_cycle(toggles)
            self._work += 1
            if self._work == self.work_cycles:
                self._set_mont(MontState.DONE)
        else:
            self._done_cycle(toggles)

    def _work_cycle(self, toggles: dict) -> None:
        regs = self.regs
        m, mp = regs["modulus"], regs["mprime"]
        w, d = self.cfg.word_radix_bits, self.cfg.digit_bits
        wmask, dmask = (1 << w) - 1, (1 << d) - 1
        xm = regs["x_m"]
        for j in range(self.cfg.partitions_k):
            name = f"core{j}"
            s = regs[name]
            a = s + self._mults[j][(xm >> (d * j)) & dmask]
            q = ((a & wmask) * mp) & wmask
            u = a + q * m
            if u & wmask:
                raise InvariantError(f"core {j}: low bits nonzero before shift")
            new = u >> w
            if new != s:
                toggles[name] = (new ^ s).bit_count()
                regs[name] = new
        self._write("x_m", xm >> w, toggles)

    def _done_cycle(self, toggles: dict) -> None:
        regs = self.regs
        m, k = regs["modulus"], self.cfg.partitions_k
        total = 0
        for j in range(k):
            z = regs[f"core{j}"]
            total += z - m if z >= m else z
        subs = 0
        while total >= m:
            total -= m
            subs += 1
        if subs > k - 1:
            raise InvariantError(f"{subs} final subtractions with k={k}")
        self._write(self._dest, total, toggles)
        op = self.top
        bit = self._bit
        self.op_log.append(MontOp(self._op_index, op.name, bit, self._op_start, len(self.trace) + 1))
        self._op_index += 1
        nxt = self._next_op(op)
        if nxt is None:
            self._set_mont(MontState.IDLE)
            self._set_top(TopState.DONE)
        else:
            self._set_top(nxt)
            self._set_mont(MontState.INIT)
            self._op_start = len(self.trace) + 1

    def _next_op(self, op: TopState) -> TopState | None:
        e = self.regs["exponent"]
        if op == TopState.MONT4:
            self._bit += 1
        if op in (TopState.MONT2, TopState.MONT4):
            if self._bit >= self._exp_bits:
                return TopState.MONT5
            return TopState.MONT3 if (e >> self._bit) & 1 else TopState.MONT4
        if op == TopState.MONT1:
            return TopState.MONT2
        if op == TopState.MONT3:
            return TopState.MONT4
        return None

    # -- high level ------------------------------------------------------------------

    def _run_command(self, sel: Sel, words: Sequence[int] | None = None) -> int:
        self.command(sel, words)
        start = len(self.trace)
        self._tick()
        while self.top != TopState.IDLE and not self.halted:
            self._tick()
        return len(self.trace) - start

    def load_key(self, words: Sequence[int]) -> int:
        """Stream the key words; returns the cycles spent in LOAD_KEY."""
        return self._run_command(Sel.LOAD_KEY, words)

    def load_data(self, words: Sequence[int]) -> int:
        return self._run_command(Sel.LOAD_DATA, words)

    def run_rsa(self) -> RunResult:
        self._run_command(Sel.START)
        ct = BigUint.from_words(self.output_words, self.bus_bits).value
        return RunResult(ct, len(self.trace), len(self.op_log), self.trace, list(self.op_log))


def expected_total_cycles(mont_ops: int, n_bits: int = 1024, cfg: ParallelConfig = DEFAULT_CONFIG,
                          bus_bits: int = BUS_BITS) -> int:
    words = n_bits // bus_bits
    return (3 * words + words + mont_ops * (cfg.iterations(n_bits) + HANDSHAKE_CYCLES)
            + words + START_OVERHEAD_CYCLES)


def op_windows(op_log: Sequence[MontOp]) -> dict[int, tuple[int, int]]:
    return {op.index: (op.start, op.end) for op in op_log}


def simulate_rsa(exponent: int, modulus: int, plaintext: int, n_bits: int | None = None,
                 cfg: ParallelConfig = DEFAULT_CONFIG) -> RunResult:
    """Load key and data into a fresh machine and run one exponentiation."""
    if n_bits is None:
        n_bits = block_bits_for(modulus, exponent, cfg=cfg)
    machine = RsaMachine(n_bits, cfg)
    machine.load_key(key_bus_words(exponent, modulus, n_bits))
    machine.load_data(int_to_bus_words(plaintext, n_bits))
    return machine.run_rsa()
