"""The shipped corpus: canonical fixtures and random-instance validity."""

import math
from random import Random

import pytest

from contensor.compiler import compile_program
from contensor.executor import run
from contensor.kernels import KERNELS, build_genomic_grid, get, random_genomic
from contensor.lang import validate
from contensor.oracle import evaluate, outputs_match


def run_kernel(name, binds, **kw):
    return run(compile_program(get(name).program(), binds, **kw))


def test_registry_lookup():
    assert get("dot_integral").name == "dot_integral"
    with pytest.raises(KeyError):
        get("nope")


def test_every_kernel_source_validates():
    for k in KERNELS.values():
        assert validate(k.program()) == [], k.name


def test_dot_integral_canonical_value():
    res = run_kernel("dot_integral", get("dot_integral").canonical())
    assert math.isclose(res.output, 4.5, rel_tol=1e-12)


def test_dot_sum_canonical_value():
    # shared pins at 2.5 and 6.0: 4*5 + 8*3
    res = run_kernel("dot_sum", get("dot_sum").canonical())
    assert res.output == 44.0


def test_masked_conv_canonical_pins():
    res = run_kernel("masked_conv", get("masked_conv").canonical())
    got = {p[0].start.val: v for p, v in res.output.pieces()}
    assert got == {0.0: 3.0, 2.5: 6.0}


def test_radius_count_canonical_is_three():
    res = run_kernel("radius_count", get("radius_count").canonical())
    assert res.output == 3.0


def test_box_and_radius_search_canonical_ids():
    res = run_kernel("box_search", get("box_search").canonical())
    assert [i for (i,), v in res.output.pieces() if v] == [1, 3]
    res = run_kernel("radius_search", get("radius_search").canonical())
    assert [i for (i,), v in res.output.pieces() if v] == [1, 3]


def test_trilinear_canonical_partition_of_unity():
    res = run_kernel("trilinear", get("trilinear").canonical())
    assert all(abs(v - 1.0) <= 1e-12 for v in res.output.values)


def test_genomic_canonical_query_two_hits_ids_three_and_four():
    binds = get("genomic_overlap_grid").canonical()
    naive = run_kernel("genomic_overlap", {k: binds[k] for k in ("Query", "Data")})
    grid = run_kernel("genomic_overlap_grid", binds)
    assert list(naive.output.pieces()) == list(grid.output.pieces())
    hit = {p[1].start.val: v for p, v in naive.output.pieces()}
    assert hit == {1.0: True, 2.0: True}


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_random_instances_match_oracle(name):
    k = get(name)
    prog = k.program()
    for seed in range(12):
        binds = k.random_instance(Random(seed))
        ex = run(compile_program(prog, binds)).output
        orc = evaluate(prog, binds)
        assert outputs_match(ex, orc, rel=k.rel), (name, seed)


def test_grid_builder_covers_every_data_interval():
    rng = Random(7)
    binds = random_genomic(rng, nchr=3, per_chr=8)
    grid = build_genomic_grid(binds["Data"])
    # every stored data interval must appear in at least one cell it touches
    cells = {}
    for path, v in grid.pieces():
        if v:
            cells.setdefault(path[0], []).append((path[1], path[2].start.val))
    for path, v in binds["Data"].pieces():
        if not v:
            continue
        chrno, jd, iv = path[0], path[1].start.val, path[2]
        assert any(
            jd == member and not cell.intersect(iv).is_empty
            for cell, member in cells.get(chrno, [])), path


def test_grid_builder_accelerated_equivalence_on_random_datasets():
    for seed in range(10):
        binds = random_genomic(Random(seed))
        binds["Grid"] = build_genomic_grid(binds["Data"])
        naive = run_kernel("genomic_overlap", {k: binds[k] for k in ("Query", "Data")})
        grid = run_kernel("genomic_overlap_grid", binds)
        assert list(naive.output.pieces()) == list(grid.output.pieces()), seed
