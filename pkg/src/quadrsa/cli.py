"""Command-line front end.  Every subcommand writes CSV or key=value text.

Exit codes: 0 success, 1 I/O or other failure, 2 parse error, 3 domain
error, 4 simulator protocol error, 5 a check failed (attack did not recover
the key, randomness test failed).
"""

from __future__ import annotations

import argparse
import csv
import random
import secrets
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

from quadrsa import cpa, hwsim, rsa, sidechannel
from quadrsa.bigint import BigUint
from quadrsa.errors import DomainError, KeyGenerationError, ParseError, ProtocolError
from quadrsa.montgomery import (
    MontContext,
    ParallelConfig,
    mmp_partition,
    mont_parallel,
    mont_radix2,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_DOMAIN = 3
EXIT_PROTOCOL = 4
EXIT_CHECK_FAILED = 5


@dataclass
class Config:
    partitions_k: int = 4
    digit_bits: int = 2
    constant_time: bool = False
    n_bits: int | None = None
    noise_amplitude: float | None = None
    noise_ratio: float = sidechannel.DEFAULT_NOISE_RATIO
    noise_distribution: str = "uniform"
    n_traces: int = 100
    seed: int = 0
    power_unit: float = 1.0
    power_baseline: float = 0.0

    def validate(self) -> Config:
        self.parallel  # noqa: B018 - raises on a bad shape
        sidechannel.NoiseDistribution(self.noise_distribution)
        if self.noise_amplitude is not None and self.noise_amplitude < 0:
            raise DomainError("noise_amplitude must be >= 0")
        if self.noise_ratio < 0:
            raise DomainError("noise_ratio must be >= 0")
        if self.n_traces < 2:
            raise DomainError("n_traces must be at least 2")
        if self.n_bits is not None:
            if self.n_bits % hwsim.BUS_BITS:
                raise DomainError(f"n_bits must be a multiple of {hwsim.BUS_BITS}")
            self.parallel.iterations(self.n_bits)
        return self

    @property
    def parallel(self) -> ParallelConfig:
        return ParallelConfig(self.partitions_k, self.digit_bits, self.constant_time)


def _convert(name: str, typ, text: str):
    t = str(typ)
    if "bool" in t:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ParseError(f"{name}: expected a boolean, got {text!r}")
    if text.lower() in ("none", "auto", "") and "None" in t:
        return None
    try:
        if "int" in t:
            return int(text, 0)
        if "float" in t:
            return float(text)
    except ValueError:
        raise ParseError(f"{name}: cannot parse {text!r}") from None
    return text


def parse_config(text: str) -> Config:
    known = {f.name: f.type for f in fields(Config)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or key not in known:
            raise ParseError(f"config line {lineno}: unknown setting {key!r}")
        values[key] = _convert(key, known[key], value)
    return Config(**values).validate()


def load_config(path: str | None) -> Config:
    if path is None:
        return Config().validate()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}") from None
    return parse_config(text)


def _seed(text: str) -> int:
    if text == "auto":
        return secrets.randbits(32)
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer or 'auto', got {text!r}") from None


def _hex(text: str) -> int:
    return BigUint.from_hex(text).value


def _read_key(path, private: bool):
    try:
        return rsa.read_private_key(path) if private else rsa.read_public_key(path)
    except OSError as exc:
        raise ParseError(f"cannot read key file: {exc}") from None


def _emit(lines: dict, out=None) -> None:
    text = "".join(f"{k}={v}\n" for k, v in lines.items())
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def _block_bits(cfg: Config, *values: int) -> int:
    return cfg.n_bits or hwsim.block_bits_for(*values, cfg=cfg.parallel)


# -- subcommands -----------------------------------------------------------------

def cmd_keygen(args, cfg: Config) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    pair = rsa.keygen_toy(args.bits, seed, args.d_bits)
    pub, priv = rsa.write_keypair(pair, args.out)
    probe = 0x5A % pair.public.modulus
    ok = rsa.decrypt(rsa.encrypt(probe, pair.public, cfg.parallel), pair.private, cfg.parallel) == probe
    _emit({"public_key": pub, "private_key": priv, "bits": pair.public.modulus.bit_length(),
           "roundtrip": "ok" if ok else "FAILED"})
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_encrypt(args, cfg: Config) -> int:
    key = _read_key(args.key, private=False)
    sys.stdout.write(format(rsa.encrypt(_hex(args.message), key, cfg.parallel), "x") + "\n")
    return EXIT_OK


def cmd_decrypt(args, cfg: Config) -> int:
    key = _read_key(args.key, private=True)
    sys.stdout.write(format(rsa.decrypt(_hex(args.message), key, cfg.parallel), "x") + "\n")
    return EXIT_OK


def cmd_bench_mont(args, cfg: Config) -> int:
    rng = random.Random(cfg.seed if args.seed is None else args.seed)
    rows = []
    for n in args.sizes:
        m = rng.getrandbits(n) | (1 << (n - 1)) | 1
        operands = [(rng.randrange(m), rng.randrange(m)) for _ in range(args.reps)]
        ref_ctx = MontContext.create(m, 8, n)
        expected = [mont_radix2(x, y, ref_ctx) for x, y in operands]
        for d in args.digit_bits:
            pc = ParallelConfig(args.partitions, d)
            ctx = MontContext.create(m, pc.word_radix_bits, n)
            steps: list = []
            mmp_partition(0, operands[0][0], operands[0][1], ctx, pc, trace=steps)
            t0 = time.perf_counter()
            got = [mont_parallel(x, y, ctx, pc) for x, y in operands]
            elapsed = (time.perf_counter() - t0) / len(operands)
            rows.append([n, pc.partitions_k, d, pc.word_radix_bits, len(steps), args.reps,
                         f"{elapsed:.6e}", int(got == expected)])
    header = ["n", "partitions_k", "digit_bits", "word_radix_bits", "iterations", "reps",
              "seconds_per_mult", "agrees_radix2"]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_CHECK_FAILED


def cmd_simulate(args, cfg: Config) -> int:
    key = _read_key(args.key, private=args.use_private)
    if args.use_private:
        exponent = key.d
    else:
        exponent = key.exponent
    if args.exponent is not None:
        exponent = _hex(args.exponent)
    modulus, msg = key.modulus, _hex(args.message)
    n_bits = _block_bits(cfg, modulus, exponent)
    machine = hwsim.RsaMachine(n_bits, cfg.parallel)
    load_key = machine.load_key(hwsim.key_bus_words(exponent, modulus, n_bits))
    load_data = machine.load_data(hwsim.int_to_bus_words(msg, n_bits))
    run = machine.run_rsa()
    if args.out:
        run.trace.write_csv(args.out)
    ctx = MontContext.for_config(modulus, cfg.parallel)
    library = rsa.mod_exp_mont(msg, exponent, ctx, cfg.parallel)
    match = library.value == run.ciphertext and library.mont_ops == run.mont_op_count
    _emit({
        "ciphertext": format(run.ciphertext, "x"),
        "n_bits": n_bits,
        "mont_ops": run.mont_op_count,
        "total_cycles": run.total_cycles,
        "expected_cycles": hwsim.expected_total_cycles(run.mont_op_count, n_bits, cfg.parallel),
        "load_key_cycles": load_key,
        "load_data_cycles": load_data,
        "work_cycles_per_op": machine.work_cycles,
        "output_cycles": machine.output_cycles,
        "library_match": "yes" if match else "NO",
    })
    return EXIT_OK if match else EXIT_CHECK_FAILED


def cmd_traces(args, cfg: Config) -> int:
    key = _read_key(args.key, private=True)
    seed = cfg.seed if args.seed is None else args.seed
    n_traces = cfg.n_traces if args.n_traces is None else args.n_traces
    if n_traces < 2:
        raise DomainError("need at least two traces")
    n_bits = _block_bits(cfg, key.modulus, key.d)
    ts = sidechannel.collect_traces(key.d, key.modulus, n_traces, seed, n_bits, cfg.parallel,
                                    cfg.power_unit, cfg.power_baseline)
    info = {"traces": n_traces, "samples": ts.traces.shape[1], "n_bits": n_bits, "protected": 0}
    if args.protected:
        dist = sidechannel.NoiseDistribution(cfg.noise_distribution)
        if cfg.noise_amplitude is None:
            noise = sidechannel.calibrate_noise(ts, seed, cfg.noise_ratio, dist)
        else:
            noise = sidechannel.NoiseConfig(seed, cfg.noise_amplitude, dist)
        ts = sidechannel.protect_traceset(ts, noise)
        info.update(protected=1, noise_amplitude=f"{noise.amplitude:.6g}",
                    noise_distribution=dist.value)
    sidechannel.write_traceset_csv(ts, args.out)
    _emit(info)
    return EXIT_OK


def cmd_attack(args, cfg: Config) -> int:
    key = _read_key(args.key, private=False)
    n_bits = _block_bits(cfg, key.modulus)
    ts = sidechannel.read_traceset_csv(args.traceset, n_bits, cfg.parallel)
    result = cpa.attack_exponent(ts, key.modulus, args.bits, n_bits, cfg.parallel)
    truth = None
    if args.truth_key:
        truth = _read_key(args.truth_key, private=True).d
    if args.out:
        cpa.write_report_csv(result, args.out, truth)
    info = {"recovered": format(result.recovered, "x"), "bits": args.bits,
            "best_correlation": f"{result.best_correlation:.6f}",
            "failed_bits": len(result.failed_bits), "protected": int(ts.protected)}
    if truth is not None:
        info["accuracy"] = f"{result.accuracy(truth):.4f}"
    _emit(info)
    if result.failed_bits or (truth is not None and result.accuracy(truth) < 1.0):
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_randtest(args, cfg: Config) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    bits = sidechannel.random_bitstream(seed, args.length)
    res = sidechannel.randomness_tests(bits, args.alpha)
    info = {"seed": seed, "length": args.length}
    for name, r in res.items():
        info[f"{name}_statistic"] = f"{r.statistic:.6g}"
        info[f"{name}_p_value"] = f"{r.p_value:.6g}"
        info[f"{name}_result"] = "pass" if r.passed else "fail"
    _emit(info)
    return EXIT_OK if all(r.passed for r in res.values()) else EXIT_CHECK_FAILED


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadrsa", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a toy RSA key pair")
    p.add_argument("bits", type=int)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--d-bits", type=int, help="draw a short private exponent of this size")
    p.add_argument("--out", required=True, help="output prefix; writes PREFIX.pub and PREFIX.key")
    p.set_defaults(func=cmd_keygen)

    for name, func, what in (("encrypt", cmd_encrypt, "public"), ("decrypt", cmd_decrypt, "private")):
        p = sub.add_parser(name, help=f"raw RSA with a {what} key")
        p.add_argument("--key", required=True)
        p.add_argument("message", help="hex integer")
        p.set_defaults(func=func)

    p = sub.add_parser("bench-mont", help="Montgomery iteration counts and timing")
    p.add_argument("--sizes", type=_int_list, default=[64, 256, 1024])
    p.add_argument("--digit-bits", type=_int_list, default=[2, 4])
    p.add_argument("--partitions", type=int, default=4)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench_mont)

    p = sub.add_parser("simulate", help="run one exponentiation on the cycle model")
    p.add_argument("--key", required=True)
    p.add_argument("--use-private", action="store_true", help="exponentiate with d from a private key")
    p.add_argument("--exponent", help="override the exponent (hex)")
    p.add_argument("--msg", dest="message", required=True, help="hex integer")
    p.add_argument("--out", help="per-cycle trace CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("traces", help="generate a power trace set for the private exponent")
    p.add_argument("--key", required=True, help="private key file")
    p.add_argument("--n-traces", type=int)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--protected", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_traces)

    p = sub.add_parser("attack", help="CPA on a trace set")
    p.add_argument("traceset")
    p.add_argument("--key", required=True, help="public key file")
    p.add_argument("--truth-key", help="private key file for scoring")
    p.add_argument("--bits", type=int, default=16)
    p.add_argument("--out", help="report CSV")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("randtest", help="monobit and runs tests on the noise generator")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--length", type=int, default=20000)
    p.add_argument("--alpha", type=float, default=sidechannel.SIGNIFICANCE)
    p.set_defaults(func=cmd_randtest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ParseError as exc:
        print(f"quadrsa: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DomainError as exc:
        print(f"quadrsa: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ProtocolError as exc:
        print(f"quadrsa: protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (KeyGenerationError, OSError) as exc:
        print(f"quadrsa: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
