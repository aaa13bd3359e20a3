import numpy as np
import pytest

from mdvsim.funcexec import FunctionalMachine, exec_convert, interpret, to_bits
from mdvsim.isa import (
    DTYPES,
    Opcode,
    arith,
    cfg,
    load,
    store,
)
from mdvsim.memory import Memory

LANES = 64  # small machine keeps the per-lane oracle cheap


def machine(width=32):
    m = FunctionalMachine(memory=Memory(1 << 16), total_lanes=LANES)
    m.run([cfg(Opcode.VSETWIDTH, width), cfg(Opcode.VSETDIMC, 1),
           cfg(Opcode.VSETDIML, 0, LANES)])
    return m


def fill(m, reg, values, dtype):
    m.registers[reg] = to_bits(np.asarray(values), DTYPES[dtype]).copy()
    if len(m.registers[reg]) != m.total_lanes:
        full = np.zeros(m.total_lanes, dtype=np.uint64)
        full[: len(values)] = m.registers[reg]
        m.registers[reg] = full


# --- scalar per-lane reference (independent oracle) ---------------------------


def scalar_ref(op, dtype, a, b, n):
    mask = (1 << n) - 1

    def sx(v):
        v &= mask
        return v - (1 << n) if dtype.is_signed and v >> (n - 1) else v

    if op is Opcode.VADD:
        return (a + b) & mask
    if op is Opcode.VSUB:
        return (a - b) & mask
    if op is Opcode.VMUL:
        return (a * b) & mask
    if op is Opcode.VXOR:
        return (a ^ b) & mask
    if op is Opcode.VMIN:
        return (a if sx(a) <= sx(b) else b) & mask
    if op is Opcode.VMAX:
        return (a if sx(a) >= sx(b) else b) & mask
    if op is Opcode.VSHRL:
        return (a << (b & mask) % n) & mask
    if op is Opcode.VSHRR:
        amt = (b & mask) % n
        return (sx(a) >> amt) & mask if dtype.is_signed else ((a & mask) >> amt)
    raise AssertionError(op)


INT_DTYPES = ["b", "w", "dw", "qw", "ub", "uw", "udw", "uqw"]
BIN_OPS = [Opcode.VADD, Opcode.VSUB, Opcode.VMUL, Opcode.VXOR, Opcode.VMIN,
           Opcode.VMAX, Opcode.VSHRL, Opcode.VSHRR]


@pytest.mark.parametrize("dtype", INT_DTYPES)
@pytest.mark.parametrize("op", BIN_OPS)
def test_integer_ops_match_scalar_reference(op, dtype):
    dt = DTYPES[dtype]
    n = dt.width_bits
    rng = np.random.default_rng(hash((op.value, dtype)) % (1 << 32))
    a = rng.integers(0, 1 << min(n, 63), size=LANES, dtype=np.int64).astype(np.uint64)
    b = rng.integers(0, 1 << min(n, 63), size=LANES, dtype=np.int64).astype(np.uint64)
    m = machine(n)
    m.registers[0] = a.copy()
    m.registers[1] = b.copy()
    m.step(arith(op, dt, 2, 0, 1))
    got = m.registers[2]
    for lane in range(LANES):
        want = scalar_ref(op, dt, int(a[lane]), int(b[lane]), n)
        assert int(got[lane]) == want, f"lane {lane}: {op.value}.{dtype}"


def test_add_wraps_unsigned_byte():
    m = machine(8)
    fill(m, 0, [200] * LANES, "ub")
    fill(m, 1, [100] * LANES, "ub")
    m.step(arith(Opcode.VADD, DTYPES["ub"], 2, 0, 1))
    assert int(m.registers[2][0]) == 44


def test_mul_and_disabled_lane_keeps_value():
    m = machine(32)
    fill(m, 0, [3] * LANES, "dw")
    fill(m, 1, [5] * LANES, "dw")
    fill(m, 2, [99] * LANES, "dw")
    m.run([cfg(Opcode.VSETDIMC, 2), cfg(Opcode.VSETDIML, 0, LANES // 4),
           cfg(Opcode.VSETDIML, 1, 4), cfg(Opcode.VUNSETMASK, 0)])
    m.step(arith(Opcode.VMUL, DTYPES["dw"], 2, 0, 1))
    got = m.registers[2]
    assert (got[: LANES // 4] == 99).all()  # masked-off element 0 untouched
    assert (got[LANES // 4 :] == 15).all()


def test_shift_register_per_lane_amounts():
    m = machine(16)
    fill(m, 0, [8] * LANES, "w")
    fill(m, 1, list(range(4)) * (LANES // 4), "w")
    m.step(arith(Opcode.VSHRR, DTYPES["w"], 2, 0, 1))
    assert m.registers[2][:4].tolist() == [8, 4, 2, 1]


def test_shift_amounts_reduce_modulo_width():
    m = machine(16)
    fill(m, 0, [0x8000] * LANES, "uw")
    m.step(arith(Opcode.VSHIL, DTYPES["uw"], 1, 0, imm=17))  # 17 mod 16 == 1
    assert int(m.registers[1][0]) == 0x0000
    m.step(arith(Opcode.VSHIL, DTYPES["uw"], 1, 0, imm=16))  # full width: identity
    assert int(m.registers[1][0]) == 0x8000


def test_rotate():
    m = machine(8)
    fill(m, 0, [0b1000_0001] * LANES, "ub")
    m.step(arith(Opcode.VROTIL, DTYPES["ub"], 1, 0, imm=1))
    assert int(m.registers[1][0]) == 0b0000_0011
    m.step(arith(Opcode.VROTIR, DTYPES["ub"], 2, 0, imm=1))
    assert int(m.registers[2][0]) == 0b1100_0000


def test_vsetdup_broadcast_and_negative():
    m = machine(32)
    m.step(arith(Opcode.VSETDUP, DTYPES["dw"], 0, imm=-1))
    assert (m.registers[0] == 0xFFFFFFFF).all()


def test_vsub_equals_add_of_negated():
    rng = np.random.default_rng(7)
    for dtype in INT_DTYPES:
        dt = DTYPES[dtype]
        n = dt.width_bits
        m = machine(n)
        a = rng.integers(0, 1 << min(n, 63), size=LANES, dtype=np.int64).astype(np.uint64)
        b = rng.integers(0, 1 << min(n, 63), size=LANES, dtype=np.int64).astype(np.uint64)
        m.registers[0], m.registers[1] = a.copy(), b.copy()
        m.step(arith(Opcode.VSUB, dt, 2, 0, 1))
        # two's-complement construction: a + (~b + 1)
        mask = np.uint64((1 << n) - 1) if n < 64 else np.uint64(2**64 - 1)
        m.registers[3] = ((~b + np.uint64(1)) & mask).copy()
        m.step(arith(Opcode.VADD, dt, 4, 0, 3))
        assert (m.registers[2] == m.registers[4]).all(), dtype


def test_float_ops():
    m = machine(32)
    dt = DTYPES["f"]
    fill(m, 0, np.array([1.5, -2.0, 3.25, 0.0] * (LANES // 4), dtype=np.float32), "f")
    fill(m, 1, np.array([0.5, 0.25, -1.0, 7.0] * (LANES // 4), dtype=np.float32), "f")
    m.step(arith(Opcode.VMUL, dt, 2, 0, 1))
    got = interpret(m.registers[2], dt)[:4]
    np.testing.assert_array_equal(got, np.float32([0.75, -0.5, -3.25, 0.0]))
    m.step(arith(Opcode.VMIN, dt, 3, 0, 1))
    assert interpret(m.registers[3], dt)[:4].tolist() == [0.5, -2.0, -1.0, 0.0]


def test_fp16_precision_rounding():
    m = machine(16)
    dt = DTYPES["hf"]
    fill(m, 0, np.array([1.0] * LANES, dtype=np.float16), "hf")
    fill(m, 1, np.array([2.0 ** -11] * LANES, dtype=np.float16), "hf")
    m.step(arith(Opcode.VADD, dt, 2, 0, 1))
    # the sum rounds back to 1.0 at half precision
    assert interpret(m.registers[2], dt)[0] == np.float16(1.0)


# --- compares and the tag latch -----------------------------------------------


def test_compare_sets_tag_and_masks_add():
    m = machine(32)
    dt = DTYPES["dw"]
    fill(m, 0, [5, 1] * (LANES // 2), "dw")
    fill(m, 1, [3, 3] * (LANES // 2), "dw")
    m.step(arith(Opcode.VGT, dt, None, 0, 1))
    assert m.tag_enabled
    assert m.tag[:4].tolist() == [True, False, True, False]
    fill(m, 2, [0] * LANES, "dw")
    fill(m, 3, [7] * LANES, "dw")
    m.step(arith(Opcode.VADD, dt, 2, 3, 3))
    got = m.registers[2]
    assert got[0] == 14 and got[1] == 0  # tag-disabled lane unchanged


def test_compare_all_equal_gives_full_tag():
    m = machine(32)
    fill(m, 0, list(range(LANES)), "dw")
    m.registers[1] = m.registers[0].copy()
    m.step(arith(Opcode.VEQ, DTYPES["dw"], None, 0, 1))
    assert m.tag.all()


def test_new_compare_overwrites_tag_and_config_clears_it():
    m = machine(32)
    dt = DTYPES["dw"]
    fill(m, 0, [1] * LANES, "dw")
    fill(m, 1, [2] * LANES, "dw")
    m.step(arith(Opcode.VGT, dt, None, 0, 1))
    assert not m.tag.any()
    m.step(arith(Opcode.VLT, dt, None, 0, 1))
    assert m.tag.all()
    m.step(cfg(Opcode.VSETDIMC, 1))
    assert not m.tag_enabled


def test_comparisons_listing():
    m = machine(32)
    dt = DTYPES["dw"]
    fill(m, 0, [5] * LANES, "dw")
    fill(m, 1, [5] * LANES, "dw")
    for op, expected in [(Opcode.VGTE, True), (Opcode.VLTE, True),
                         (Opcode.VNEQ, False), (Opcode.VLT, False)]:
        m.step(arith(op, dt, None, 0, 1))
        assert bool(m.tag[0]) is expected
        m.step(cfg(Opcode.VSETDIMC, 1))
        m.step(cfg(Opcode.VSETDIML, 0, LANES))


# --- moves and conversions -----------------------------------------------------


def test_vcpy_masked():
    m = machine(32)
    fill(m, 0, list(range(LANES)), "dw")
    fill(m, 1, [0] * LANES, "dw")
    m.run([cfg(Opcode.VSETDIMC, 2), cfg(Opcode.VSETDIML, 0, LANES // 2),
           cfg(Opcode.VSETDIML, 1, 2), cfg(Opcode.VUNSETMASK, 1)])
    m.step(arith(Opcode.VCPY, DTYPES["dw"], 1, 0))
    got = m.registers[1]
    assert got[: LANES // 2].tolist() == list(range(LANES // 2))
    assert (got[LANES // 2 :] == 0).all()


def test_convert_examples():
    ub, dw, b, f, w = (DTYPES[s] for s in ["ub", "dw", "b", "f", "w"])
    # zero-extension of unsigned bytes
    assert int(exec_convert(dw, ub, np.array([255], dtype=np.uint64))[0]) == 255
    # sign extension of signed bytes
    got = exec_convert(dw, b, np.array([0x80], dtype=np.uint64))
    assert int(got[0]) == 0xFFFFFF80
    # narrowing truncates
    assert int(exec_convert(b, dw, np.array([300], dtype=np.uint64))[0]) == 300 & 0xFF
    # float -> int rounds ties to even
    bits = to_bits(np.array([2.5], dtype=np.float32), f)
    assert int(interpret(exec_convert(w, f, bits), w)[0]) == 2
    bits = to_bits(np.array([3.5], dtype=np.float32), f)
    assert int(interpret(exec_convert(w, f, bits), w)[0]) == 4
    # int -> float and half/single interchange
    fbits = exec_convert(f, dw, np.array([7], dtype=np.uint64))
    assert interpret(fbits, f)[0] == np.float32(7.0)
    hf = DTYPES["hf"]
    hbits = exec_convert(hf, f, to_bits(np.array([0.1], dtype=np.float32), f))
    assert interpret(hbits, hf)[0] == np.float16(np.float32(0.1))


# --- memory movement -----------------------------------------------------------


def test_load_store_round_trip_identity():
    m = machine(32)
    dt = DTYPES["dw"]
    payload = np.arange(LANES, dtype=np.int32)
    m.memory.write_array(0x400, payload)
    m.step(load(Opcode.VSLD, dt, 0, 0x400, 1))
    m.step(store(Opcode.VSST, dt, 0, 0x400, 1))
    got = m.memory.read_array(0x400, LANES, np.int32)
    np.testing.assert_array_equal(got, payload)


def test_replicated_load_then_sequential_store():
    m = machine(32)
    dt = DTYPES["dw"]
    m.memory.write_array(0x400, np.array([42], dtype=np.int32))
    m.step(load(Opcode.VSLD, dt, 0, 0x400, 0))
    m.step(store(Opcode.VSST, dt, 0, 0x800, 1))
    got = m.memory.read_array(0x800, LANES, np.int32)
    assert (got == 42).all()


def test_masked_store_reduction_pattern():
    m = machine(32)
    dt = DTYPES["dw"]
    payload = np.arange(LANES, dtype=np.int32)
    m.memory.write_array(0x400, payload)
    m.step(load(Opcode.VSLD, dt, 0, 0x400, 1))
    half = LANES // 2
    m.run([cfg(Opcode.VSETDIMC, 2), cfg(Opcode.VSETDIML, 0, half),
           cfg(Opcode.VSETDIML, 1, 2), cfg(Opcode.VUNSETMASK, 0)])
    m.step(store(Opcode.VSST, dt, 0, 0x800, 1, 2))
    got = m.memory.read_array(0x800, LANES, np.int32)
    assert (got[:half] == 0).all()  # first half untouched
    np.testing.assert_array_equal(got[half:], payload[half:])


def test_masked_lanes_generate_no_memory_traffic():
    m = machine(32)
    dt = DTYPES["dw"]
    m.run([cfg(Opcode.VSETDIMC, 2), cfg(Opcode.VSETDIML, 0, 4),
           cfg(Opcode.VSETDIML, 1, 2), cfg(Opcode.VUNSETMASK, 1)])
    plan = m.plan_for(load(Opcode.VSLD, dt, 0, 0x400, 1, 2))
    assert plan.lanes.tolist() == [0, 1, 2, 3]


def test_masking_commutes_with_flattening():
    # masking top element e disables exactly lanes [e*block, (e+1)*block)
    m = machine(32)
    block, top = 8, LANES // 8
    m.run([cfg(Opcode.VSETDIMC, 2), cfg(Opcode.VSETDIML, 0, block),
           cfg(Opcode.VSETDIML, 1, top), cfg(Opcode.VUNSETMASK, 3)])
    enable = m.lane_enable()
    expected = np.ones(LANES, dtype=bool)
    expected[3 * block : 4 * block] = False
    np.testing.assert_array_equal(enable, expected)


def test_store_duplicate_addresses_last_lane_wins():
    m = machine(32)
    dt = DTYPES["dw"]
    fill(m, 0, list(range(LANES)), "dw")
    m.step(store(Opcode.VSST, dt, 0, 0x400, 0))  # all lanes to one address
    got = m.memory.read_array(0x400, 1, np.int32)
    assert got[0] == LANES - 1
