import math

import pytest

from mdvsim.isa import DTYPES, Opcode
from mdvsim.timing import (
    SchemeModel,
    ac_latency,
    bh_lanes,
    bh_latency,
    bp_lanes,
    bp_latency,
    bs_latency,
    TimingError,
)

WIDTHS = [8, 16, 32, 64]
LINEAR = [Opcode.VADD, Opcode.VXOR, Opcode.VCPY, Opcode.VCVT, Opcode.VSETDUP,
          Opcode.VSHIL, Opcode.VSHIR, Opcode.VROTIL, Opcode.VROTIR,
          Opcode.VGT, Opcode.VGTE, Opcode.VLT, Opcode.VLTE, Opcode.VEQ, Opcode.VNEQ]


def test_bs_table_values():
    assert bs_latency(Opcode.VADD, 32) == 32
    assert bs_latency(Opcode.VSUB, 16) == 32
    assert bs_latency(Opcode.VMUL, 8) == 104
    assert bs_latency(Opcode.VMUL, 32) == 1184
    assert bs_latency(Opcode.VSHRL, 32) == 32 * 5


@pytest.mark.parametrize("n", WIDTHS)
def test_bs_full_table(n):
    for op in LINEAR:
        assert bs_latency(op, n) == n
    for op in (Opcode.VSUB, Opcode.VMIN, Opcode.VMAX):
        assert bs_latency(op, n) == 2 * n
    assert bs_latency(Opcode.VMUL, n) == n * n + 5 * n
    for op in (Opcode.VSHRL, Opcode.VSHRR):
        assert bs_latency(op, n) == n * math.ceil(math.log2(n))


def test_bs_rejects_bad_width():
    with pytest.raises(TimingError):
        bs_latency(Opcode.VADD, 24)


def test_bp_scaling():
    assert bp_latency(Opcode.VADD, 32) == 1
    assert bp_lanes(32) == 8
    assert bp_latency(Opcode.VMUL, 32) == math.ceil(1184 / 32)  # 37
    assert bp_lanes(32) * 32 == 256  # full machine: 32 arrays x 8 lanes


def test_bh_degenerates_to_bs_and_bp():
    for n in WIDTHS:
        for op in LINEAR + [Opcode.VSUB, Opcode.VMUL, Opcode.VSHRL]:
            assert bh_latency(op, n, p=1) == bs_latency(op, n)
            assert bh_latency(op, n, p=n) == bp_latency(op, n)
        assert bh_lanes(n, p=1) == 256
        assert bh_lanes(n, p=n) == bp_lanes(n)


def test_bh_example():
    assert bh_latency(Opcode.VADD, 32, p=4) == 8
    assert bh_lanes(32, p=4) == 64
    with pytest.raises(TimingError):
        bh_latency(Opcode.VADD, 32, p=5)


def test_ac_values():
    assert ac_latency(Opcode.VADD, 8) == 66
    assert ac_latency(Opcode.VXOR, 8) == 2
    assert ac_latency(Opcode.VXOR, 64) == 2
    assert ac_latency(Opcode.VMUL, 8) == 8 * 66
    assert ac_latency(Opcode.VMIN, 16) == (8 * 16 + 2) + 16


def test_ac_addition_slowdown_ratio():
    # associative adds run 8x+ slower than bit-serial at every width
    for n in WIDTHS:
        ratio = ac_latency(Opcode.VADD, n) / bs_latency(Opcode.VADD, n)
        assert 8.0 < ratio <= 8.25


def test_latency_monotone_in_width():
    for scheme in ("bs", "ac"):
        model = SchemeModel(scheme=scheme)
        for op in LINEAR + [Opcode.VSUB, Opcode.VMUL, Opcode.VSHRL]:
            lats = [model.latency(op, DTYPES[s]) for s in ("b", "w", "dw", "qw")]
            assert lats == sorted(lats), (scheme, op)


def test_all_latencies_at_least_one_cycle():
    for scheme in ("bs", "bp", "bh", "ac"):
        model = SchemeModel(scheme=scheme)
        for op in LINEAR + [Opcode.VSUB, Opcode.VMUL, Opcode.VSHRL]:
            for s in ("b", "w", "dw", "qw"):
                assert model.latency(op, DTYPES[s]) >= 1


def test_throughput_equivalence_add():
    # elements per cycle for additions matches between bs and bp per array
    for n in WIDTHS:
        bs_rate = 256 / bs_latency(Opcode.VADD, n)
        bp_rate = bp_lanes(n) / bp_latency(Opcode.VADD, n)
        assert bs_rate == bp_rate


def test_scheme_model_lanes():
    assert SchemeModel(scheme="bs").lanes_per_array(32) == 256
    assert SchemeModel(scheme="bp").lanes_per_array(32) == 8
    assert SchemeModel(scheme="bh").lanes_per_array(32) == 64
    assert SchemeModel(scheme="ac").lanes_per_array(32) == 256
    assert SchemeModel(scheme="ac", ac_lanes_per_array=128).lanes_per_array(32) == 128


def test_latency_overrides():
    model = SchemeModel(scheme="bs", overrides={("vmul", 32): 999})
    assert model.latency(Opcode.VMUL, DTYPES["dw"]) == 999
    assert model.latency(Opcode.VMUL, DTYPES["w"]) == 16 * 16 + 5 * 16


def test_float_latencies():
    model = SchemeModel(scheme="bs")
    f = DTYPES["f"]
    assert model.latency(Opcode.VADD, f) == 4 * 32 + 32 * 5
    assert model.latency(Opcode.VMUL, f) == 23 * 23 + 5 * 23 + 3 * 8
    hf = DTYPES["hf"]
    assert model.latency(Opcode.VMUL, hf) == 10 * 10 + 5 * 10 + 3 * 5
    # copies move raw bit slices
    assert model.latency(Opcode.VCPY, f) == 32
