"""
Tests for the relaxation builders, side constraints and the Delsarte LP.

Code-derived points must be feasible in every relaxation: a concrete code
is a witness that the relaxation's optimum bounds at least its size.
"""

import itertools
import json
import math
import os
import sys
import tempfile
from fractions import Fraction

import numpy as np

from app.models.report import PartitionCell
from app.models.sdp import BoundKind
from app.services.formulations import (
    FormulationError,
    assign_cells,
    bound_from_y,
    build_lp_primal,
    build_sdp0,
    build_sdp0_antipodal,
    build_sdpa,
    build_sdpa_subset,
    build_sdphat,
    cap_count_constraint,
    cap_thresholds,
    cell_pair_interval,
    greedy_spherical_code,
    hemisphere_lp_bound,
    linear_constraint,
    lp_dual_bound,
    lp_polynomial_bound,
    make_partition,
    one_sided_partition,
    polynomial_sign_witness,
    polynomial_upper_bound,
    pfender_constraint,
    render_ad,
    sdp0_dual_polynomial,
    sdp0_point_from_code,
    sdpa_point_from_code,
    sdpa_subset_point_from_code,
    sdphat_point_from_code,
    solve_bound,
    whole_space_partition,
)
from app.services.sdpmodel import ModelError, is_feasible
from app.services.spaces import gegenbauer_family, hamming, krawtchouk_family, pairwise_tau, sphere
from app.utils.serialization import (
    SerializationError,
    model_from_dict,
    model_hash,
    model_to_dict,
    read_model,
    write_model,
)


KISSING = (Fraction(-1), Fraction(1, 2))


def _greedy_codes(n, count, seed, hemisphere=False, attempts=200):
    rng = np.random.default_rng(seed)
    codes = []
    while len(codes) < count:
        points = greedy_spherical_code(n, "pi/3", attempts, rng, hemisphere=hemisphere)
        if len(points) >= 2:
            codes.append(points)
    return codes


def _greedy_binary_codes(n, d, count, seed):
    """Random greedy codes of minimum distance d in hamming(n), as 0/1 rows."""
    rng = np.random.default_rng(seed)
    words = np.array(list(itertools.product((0, 1), repeat=n)))
    codes = []
    while len(codes) < count:
        kept = []
        order = rng.permutation(len(words))[:int(rng.integers(2, len(words) + 1))]
        for index in order:
            index = int(index)
            if all(bin(index ^ other).count("1") >= d for other in kept):
                kept.append(index)
        if len(kept) >= 2:
            codes.append(words[kept])
    return codes


def _monomials_to_zonal(family, monomials):
    """Exact f_k with sum_k f_k Phi_k equal to the given ascending monomial coefficients."""
    remaining = [Fraction(v) for v in monomials]
    f = [Fraction(0)] * len(remaining)
    for k in range(len(remaining) - 1, -1, -1):
        f[k] = remaining[k] / family.coefficient(k, k)
        for d in range(k + 1):
            remaining[d] -= f[k] * family.coefficient(k, d)
    return f


def test_sdp0_structure():
    family = gegenbauer_family(8, 7)
    model = build_sdp0(family, *KISSING, 4)
    assert model.variables == ("y", "x1", "x2", "x3", "x4", "x5", "x6", "x7")
    assert len(model.blocks) == 10
    assert model.total_block_dimension == 19
    assert model.bound_kind is BoundKind.RECIPROCAL
    assert model.metadata["interval"] == ["-1/1", "1/2"]
    print("✅ sdp0 structure")


def test_sdp0_rejects_bad_input():
    family = gegenbauer_family(4, 5)
    for args in ((Fraction(-1), Fraction(1, 2), 4), (Fraction(-1), Fraction(1), 3),
                 (Fraction(1, 2), Fraction(-1), 3), (Fraction(-2), Fraction(1, 2), 3)):
        try:
            build_sdp0(family, *args)
        except FormulationError:
            continue
        raise AssertionError(f"expected FormulationError for {args}")
    print("✅ sdp0 input validation")


def test_sdp0_code_points_feasible():
    family = gegenbauer_family(4, 5)
    model = build_sdp0(family, *KISSING, 3)
    for points in _greedy_codes(4, 25, seed=1):
        point = sdp0_point_from_code(pairwise_tau(sphere(4), points), 3)
        assert is_feasible(model, point, tol=1e-9), len(points)
    print("✅ Greedy codes give feasible sdp0 points")


def test_sdp0_bound_covers_sampled_spherical_codes():
    model = build_sdp0(gegenbauer_family(4, 5), *KISSING, 3)
    report, result = solve_bound(model)
    assert result.is_optimal, result.message
    assert report.bound >= 24 - 1e-6, report.bound
    codes = _greedy_codes(4, 1000, seed=11, attempts=60)
    for points in codes:
        point = sdp0_point_from_code(pairwise_tau(sphere(4), points), 3)
        assert is_feasible(model, point, tol=1e-9), len(points)
        assert report.bound >= len(points) - 1e-6, (report.bound, len(points))
    print(f"✅ {len(codes)} greedy kissing configurations feasible, all within {report.bound:.4f}")


def test_sdp0_antipodal_drops_odd_constraints():
    family = gegenbauer_family(4, 7)
    model = build_sdp0_antipodal(family, Fraction(-1), Fraction(1, 2), 4)
    assert model.variables == ("y", "x2", "x4", "x6")
    phi_labels = [block.label for block in model.blocks if block.label.startswith("phi")]
    assert phi_labels == ["phi[2]", "phi[4]", "phi[6]"]
    # the 24-cell
    point = {"y": 1 / 23, "x2": 5 / 23, "x4": 2 / 23, "x6": 5 / 92}
    assert is_feasible(model, point, tol=1e-9)
    try:
        build_sdp0_antipodal(family, Fraction(-1, 2), Fraction(1, 2), 3)
        raise AssertionError("expected FormulationError for a > -1")
    except FormulationError:
        pass
    print("✅ Antipodal sdp0 structure and 24-cell point")


def test_sdp0_antipodal_24_cell_bound():
    family = gegenbauer_family(4, 7)
    report, result = solve_bound(build_sdp0_antipodal(family, Fraction(-1), Fraction(1, 2), 4))
    assert result.is_optimal, result.message
    assert abs(report.bound - 24) < 1e-3, report.bound
    print(f"✅ Antipodal bound in dimension 4: {report.bound:.6f}")


def test_bound_from_y():
    assert bound_from_y(Fraction(1, 239)) == 240
    try:
        bound_from_y(0)
        raise AssertionError("expected FormulationError")
    except FormulationError:
        pass
    print("✅ bound_from_y")


def test_cap_thresholds():
    values = cap_thresholds("pi/3", 2)
    assert abs(values[0] - math.sqrt(3) / 2) < 1e-15
    assert abs(values[1] - math.sqrt(2 / 3)) < 1e-15
    for bad in (("0", 1), ("pi/3", 0)):
        try:
            cap_thresholds(*bad)
        except FormulationError:
            continue
        raise AssertionError(f"expected FormulationError for {bad}")
    print("✅ Cap thresholds")


def test_sdpa_structure():
    family = gegenbauer_family(4, 5)
    model = build_sdpa(family, *KISSING, None, [], 3)
    assert model.variables[:2] == ("c", "z")
    assert len(model.variables) == 8
    assert [block.label for block in model.blocks][:2] == ["gamma", "phi[1]"]
    assert len(model.blocks) == 1 + 5 + 3
    assert len(model.equalities) == 1
    assert model.formulation == "sdpa"
    assert model.bound_kind is BoundKind.DIRECT
    print("✅ sdpa structure")


def _side_constraint_breakpoints():
    cap = -cap_thresholds("pi/3", 1)[0]
    pfender = -math.sqrt(0.5)
    return [Fraction(-1), cap, pfender, Fraction(1, 2)]


def test_sdpa_code_points_with_side_constraints():
    family = gegenbauer_family(4, 5)
    breakpoints = _side_constraint_breakpoints()
    ad = [pfender_constraint("pi/3"), cap_count_constraint("pi/3", 1)]
    model = build_sdpa(family, *KISSING, breakpoints, ad, 3)
    assert len([block for block in model.blocks if block.label.startswith("ad:")]) == 2
    assert len(model.variables) == 2 + 3 * 6
    for points in _greedy_codes(4, 25, seed=2):
        point = sdpa_point_from_code(pairwise_tau(sphere(4), points), breakpoints, 3)
        assert is_feasible(model, point, tol=1e-7), len(points)
    print("✅ Greedy codes satisfy sdpa with Pfender and cap-count constraints")


def test_render_ad_needs_breakpoint():
    try:
        render_ad(pfender_constraint("pi/3"), [-1, 0.5], lambda i, k: f"x[{i + 1},{k}]")
    except FormulationError as e:
        assert "breakpoint" in str(e)
        print("✅ Missing breakpoint reported")
        return
    raise AssertionError("expected FormulationError")


def test_linear_custom_constraint():
    family = gegenbauer_family(4, 5)
    model = build_sdpa(family, *KISSING, None, [linear_constraint({"c": -1}, 30, "c_le_30")], 3)
    block = model.block("ad:c_le_30")
    assert block.exact_matrix({"c": Fraction(30)}) == [[Fraction(0)]]
    try:
        build_sdpa(family, *KISSING, None, [linear_constraint({"w": 1})], 3)
        raise AssertionError("expected FormulationError for unknown variable")
    except FormulationError:
        pass
    print("✅ Custom linear side constraints")


def test_sdpa_subset_without_anchors_is_sdpa():
    family = gegenbauer_family(4, 5)
    plain = build_sdpa(family, *KISSING, None, [], 3)
    subset = build_sdpa_subset(family, *KISSING, (), (), [], 3)
    assert [block.label for block in plain.blocks] == [block.label for block in subset.blocks]
    assert plain.variables == subset.variables
    print("✅ sdpa_subset with no anchors equals sdpa")


def test_sdpa_subset_hemisphere_points_feasible():
    family = gegenbauer_family(4, 5)
    model = build_sdpa_subset(family, *KISSING, ((Fraction(1),),), ((Fraction(0), Fraction(1)),), [], 3)
    assert model.formulation == "sdpa_subset"
    assert len(model.equalities) == 2
    for points in _greedy_codes(4, 20, seed=3, hemisphere=True):
        tau = pairwise_tau(sphere(4), points)
        point = sdpa_subset_point_from_code(tau, points[:, 0].reshape(1, -1), [-1.0, 0.5], 3)
        assert is_feasible(model, point, tol=1e-7), len(points)
    print("✅ Hemisphere codes satisfy sdpa_subset")


def test_sdpa_subset_anchor_validation():
    family = gegenbauer_family(4, 5)
    for anchors, intervals in (
        (((Fraction(1),),), ()),
        (((Fraction(1),),), ((Fraction(1), Fraction(0)),)),
        (((Fraction(1, 2),),), ((Fraction(0), Fraction(1)),)),
        (((Fraction(1), Fraction(0)), (Fraction(1, 2), Fraction(1))), ((0, 1), (0, 1))),
    ):
        try:
            build_sdpa_subset(family, *KISSING, anchors, intervals, [], 3)
        except FormulationError:
            continue
        raise AssertionError(f"expected FormulationError for {anchors}, {intervals}")
    print("✅ Anchor validation")


def test_one_sided_partition_intervals():
    partition = one_sided_partition(3)
    assert partition.r == 1 and partition.d == 3
    assert partition.pair_intervals[(0, 0)] == (Fraction(0), Fraction(1, 2))
    low, high = partition.pair_intervals[(0, 2)]
    assert abs(low + math.sqrt(0.5)) < 1e-12
    assert high == Fraction(1, 2)
    alpha, beta = partition.cells[0].anchor_intervals[0]
    assert abs(alpha - math.sqrt(0.5)) < 1e-12 and beta == 1
    print("✅ One-sided partition pair intervals")


def test_cell_pair_interval():
    cap = PartitionCell("0", "pi/6", ())
    band = PartitionCell("pi/2", "2*pi/3", ())
    low, high = cell_pair_interval(cap, band, *KISSING)
    assert high == Fraction(1, 2)
    assert abs(low + math.sqrt(3) / 2) < 1e-12

    wide = PartitionCell("0", "pi/3", ())
    assert cell_pair_interval(wide, wide, *KISSING, same=True) == (Fraction(-1, 2), Fraction(1, 2))

    # every pair of these two thin neighbours is closer than 60 degrees
    inner, outer = PartitionCell("0", "pi/12", ()), PartitionCell("pi/12", "pi/6", ())
    assert cell_pair_interval(inner, outer, *KISSING) is None
    print("✅ Pair intervals between cells")


def test_sdphat_one_sided_size():
    family = gegenbauer_family(3, 11)
    model = build_sdphat(family, *KISSING, one_sided_partition(3), [], 6)
    assert model.total_block_dimension == 217
    assert len(model.variables) == 111
    assert len(model.equalities) == 3
    print("✅ One-sided sdphat at m = 6: dimension 217, 111 variables")


def test_sdphat_hemisphere_points_feasible():
    family = gegenbauer_family(4, 5)
    partition = one_sided_partition(4)
    model = build_sdphat(family, *KISSING, partition, [], 3)
    for points in _greedy_codes(4, 20, seed=4, hemisphere=True):
        cells = assign_cells(points, partition)
        point = sdphat_point_from_code(pairwise_tau(sphere(4), points), points[:, 0], cells, 3, 3)
        assert is_feasible(model, point, tol=1e-7), len(points)
    print("✅ Hemisphere codes satisfy the one-sided sdphat")


def test_sdphat_rejects_unsupported_input():
    family = gegenbauer_family(4, 5)
    try:
        build_sdphat(family, *KISSING, one_sided_partition(4), [pfender_constraint("pi/3")], 3)
        raise AssertionError("expected FormulationError for Pfender on a partition")
    except FormulationError:
        pass

    narrow = make_partition((), [PartitionCell(0, "pi/10", ())], *KISSING)
    assert narrow.pair_intervals[(0, 0)] is None
    try:
        build_sdphat(family, *KISSING, narrow, [], 3)
        raise AssertionError("expected FormulationError for an empty pair interval")
    except FormulationError:
        pass
    print("✅ sdphat rejects Pfender and empty pair intervals")


def test_sdphat_whole_space():
    family = gegenbauer_family(4, 5)
    model = build_sdphat(family, *KISSING, whole_space_partition(family, *KISSING), [], 3)
    assert model.variables[0] == "c[1]"
    assert model.equalities == ()
    for points in _greedy_codes(4, 5, seed=5):
        point = sdphat_point_from_code(pairwise_tau(sphere(4), points), np.zeros((0, len(points))),
                                       [0] * len(points), 1, 3)
        assert is_feasible(model, point, tol=1e-7)
    print("✅ Single-cell sdphat")


def test_lp_dual_bound_e8():
    report = lp_dual_bound(gegenbauer_family(8, 7), *KISSING, 7)
    assert report.formulation == "lp"
    assert abs(report.bound - 240) < 0.01, report.bound
    assert report.bound >= 240 - 1e-6
    print(f"✅ LP bound in dimension 8: {report.bound:.6f}")


def test_lp_dual_bound_hamming_code():
    # A(7, 3) = 16, attained by the Hamming code
    report = lp_dual_bound(krawtchouk_family(7, 7), 3, 7, 7)
    assert abs(report.bound - 16) < 1e-6, report.bound
    print("✅ LP bound A(7, 3) <= 16")


def test_lp_polynomial_bound_e8_exact():
    family = gegenbauer_family(8, 6)
    # (t + 1)(t + 1/2)^2 t^2 (t - 1/2) = t^6 + 3/2 t^5 + 1/4 t^4 - 3/8 t^3 - 1/8 t^2
    monomials = [0, 0, Fraction(-1, 8), Fraction(-3, 8), Fraction(1, 4), Fraction(3, 2), 1]
    f = _monomials_to_zonal(family, monomials)
    assert f[0] == Fraction(3, 320)
    assert lp_polynomial_bound(family, f, *KISSING) == 240
    print("✅ Exact Delsarte polynomial bound 240")


def test_lp_polynomial_bound_rejections():
    family = gegenbauer_family(4, 3)
    for coefficients in ([1, 1], [1, -1, 1], [0, 1]):
        try:
            lp_polynomial_bound(family, coefficients, *KISSING)
        except FormulationError:
            continue
        raise AssertionError(f"expected FormulationError for {coefficients}")
    print("✅ Invalid Delsarte polynomials rejected")


def test_sdp0_dual_polynomial_e8():
    family = gegenbauer_family(8, 7)
    model = build_sdp0(family, *KISSING, 4)
    report, result = solve_bound(model)
    assert result.is_optimal
    f = sdp0_dual_polynomial(family, model, result)
    bound = lp_polynomial_bound(family, f, *KISSING)
    assert 240 - 1e-9 <= bound <= 240.05, float(bound)
    print(f"✅ sdp0 dual gives a valid polynomial with bound {float(bound):.6f}")


def test_lp_primal_hamming():
    family = krawtchouk_family(3, 3)
    model = build_lp_primal(family, [3], 3)
    assert model.bound_kind is BoundKind.PLUS_ONE
    report, result = solve_bound(model)
    assert result.is_optimal
    assert abs(report.bound - 2) < 1e-6
    try:
        build_lp_primal(family, [0, 3], 3)
        raise AssertionError("expected FormulationError for tau0 in the point set")
    except FormulationError:
        pass
    print("✅ Distance-distribution LP for hamming(3)")


def test_hamming_relaxations_accept_codes():
    family = krawtchouk_family(7, 3)
    space = hamming(7)
    models = {
        "sdp0": build_sdp0(family, 3, 7, 2),
        "sdpa": build_sdpa(family, 3, 7, None, [], 2),
        "sdphat": build_sdphat(family, 3, 7, whole_space_partition(family, 3, 7), [], 2),
    }
    assert models["sdp0"].variables == ("y", "x1", "x2", "x3")
    assert models["sdpa"].formulation == "sdpa" and models["sdphat"].formulation == "sdphat"
    for code in _greedy_binary_codes(7, 3, 100, seed=7):
        tau = pairwise_tau(space, code)
        c = len(code)
        points = {
            "sdp0": sdp0_point_from_code(tau, 2),
            "sdpa": sdpa_point_from_code(tau, [3, 7], 2),
            "sdphat": sdphat_point_from_code(tau, np.zeros((0, c)), [0] * c, 1, 2),
        }
        for name, model in models.items():
            assert is_feasible(model, points[name], tol=1e-6), (name, c)
    print("✅ Hamming sdp0, sdpa and sdphat built and satisfied by codes")


def test_hamming_bound_covers_sampled_codes():
    family = krawtchouk_family(7, 3)
    model = build_sdp0(family, 3, 7, 2)
    report, result = solve_bound(model)
    assert result.is_optimal, result.message
    # the Hamming code has 16 words
    assert report.bound >= 16 - 1e-6, report.bound
    codes = _greedy_binary_codes(7, 3, 1000, seed=8)
    for code in codes:
        point = sdp0_point_from_code(pairwise_tau(hamming(7), code), 2)
        assert is_feasible(model, point, tol=1e-6), len(code)
        assert report.bound >= len(code) - 1e-6, (report.bound, len(code))
    print(f"✅ {len(codes)} sampled codes feasible, all within the bound {report.bound:.4f}")


def test_polynomial_upper_bound_irrational_peak():
    # t - t^3 peaks at 1/sqrt(3) with value 2 / (3 sqrt(3))
    coefficients = [Fraction(0), Fraction(1), Fraction(0), Fraction(-1)]
    peak = 2 / (3 * math.sqrt(3))
    bound = polynomial_upper_bound(coefficients, 0, 1)
    assert isinstance(bound, Fraction)
    assert peak <= bound <= peak + 1e-9, (float(bound), peak)
    # the peak lies strictly between the points of a coarse grid
    assert polynomial_upper_bound(coefficients, Fraction(1, 2), Fraction(3, 5)) >= peak
    assert polynomial_upper_bound([Fraction(-1), Fraction(2)], 0, Fraction(1, 4)) == Fraction(-1, 2)
    print("✅ Exact polynomial maximum covers an irrational critical point")


def test_polynomial_sign_witness():
    assert polynomial_sign_witness([Fraction(-1), Fraction(0), Fraction(1)], Fraction(-1, 2), Fraction(1, 2)) is None
    witness = polynomial_sign_witness([Fraction(-1, 10), Fraction(0), Fraction(1)], -1, 1)
    assert witness is not None and witness * witness > Fraction(1, 10)
    print("✅ Sign witnesses found by root isolation")


def test_lp_dual_bound_violation_is_exact():
    report = lp_dual_bound(gegenbauer_family(4, 7), *KISSING, 7, grid_points=201)
    assert report.bound >= 24, report.bound
    for note in report.notes:
        if note.startswith("f0_inflated_by="):
            assert 0 < float(note.split("=", 1)[1]) < 1, note
    assert report.variables["f0"] <= 1.0
    print(f"✅ Coarse-grid LP bound {report.bound:.4f} in dimension 4 stays valid")


def test_hemisphere_lp_bound_circle_case():
    report = hemisphere_lp_bound(3)
    assert report.formulation == "lp_hemisphere"
    assert report.bound == 9.0, report.bound
    assert abs(report.variables["equator_lp"] - 2 * math.pi / math.acos(1 / math.sqrt(3))) < 1e-12
    assert "mirror=9" in report.notes
    try:
        hemisphere_lp_bound(2)
        raise AssertionError("expected FormulationError")
    except FormulationError:
        pass
    print("✅ Hemisphere LP bound 9 in dimension 3")


def _round_trip_models():
    breakpoints = _side_constraint_breakpoints()
    ad = [pfender_constraint("pi/3"), cap_count_constraint("pi/3", 1)]
    return {
        "sdp0": build_sdp0(gegenbauer_family(8, 7), *KISSING, 4),
        "sdpa": build_sdpa(gegenbauer_family(4, 5), *KISSING, breakpoints, ad, 3),
        "sdphat": build_sdphat(gegenbauer_family(4, 5), *KISSING, one_sided_partition(4), [], 3),
        "hamming sdp0": build_sdp0(krawtchouk_family(7, 3), 3, 7, 2),
    }


def _numbers_are_strings(document):
    values = list(document["objective"]["coeffs"].values())
    for block in document["blocks"]:
        for entries in [block["constant"]] + list(block["terms"].values()):
            assert all(isinstance(i, int) and isinstance(j, int) for i, j, _ in entries)
            values += [v for _, _, v in entries]
    for equality in document["equalities"]:
        values += [equality["constant"]] + list(equality["coeffs"].values())
    return all(isinstance(v, str) for v in values)


def test_model_documents_round_trip():
    with tempfile.TemporaryDirectory() as directory:
        for name, model in _round_trip_models().items():
            document = json.loads(json.dumps(model_to_dict(model)))
            assert set(document["objective"]) == {"sense", "coeffs"}, name
            assert _numbers_are_strings(document), name
            restored = model_from_dict(document)
            assert restored == model, name
            assert model_to_dict(restored) == document, name
            assert model_hash(restored) == model_hash(model), name

            path = os.path.join(directory, f"{name.replace(' ', '_')}.json")
            write_model(model, path)
            assert read_model(path) == model, name
    print("✅ sdp0, sdpa and sdphat models survive the model file bit for bit")


def test_model_document_rejections():
    document = model_to_dict(build_sdp0(gegenbauer_family(4, 5), *KISSING, 3))
    broken = [
        dict(document, format="something-else"),
        {key: value for key, value in document.items() if key != "objective"},
        dict(document, objective={"sense": "min", "coeffs": {"y": 1}}),
        dict(document, objective={"sense": "sideways", "coeffs": {"y": "1/1"}}),
        dict(document, equalities=[{"label": "e", "constant": "zero", "coeffs": {}}]),
    ]
    for bad in broken:
        try:
            model_from_dict(bad)
        except SerializationError:
            continue
        raise AssertionError(f"expected SerializationError for {bad.get('objective')}")

    unknown = dict(document, objective={"sense": "min", "coeffs": {"w": "1/1"}})
    try:
        model_from_dict(unknown)
        raise AssertionError("expected ModelError for an undeclared variable")
    except ModelError:
        pass
    try:
        read_model("/nonexistent/model.json")
        raise AssertionError("expected SerializationError for a missing file")
    except SerializationError:
        pass
    print("✅ Malformed model documents rejected")


def test_greedy_codes_respect_angle():
    for points in _greedy_codes(5, 5, seed=6, hemisphere=True):
        tau = pairwise_tau(sphere(5), points)
        off = tau[~np.eye(len(points), dtype=bool)]
        assert off.max() <= 0.5 + 1e-12
        assert points[:, 0].min() >= 0
    assert hamming(3).tau0 == 0
    print("✅ Greedy codes are theta-codes")


def main():
    print("=" * 70)
    print("FORMULATION TESTS")
    print("=" * 70)
    test_sdp0_structure()
    test_sdp0_rejects_bad_input()
    test_sdp0_code_points_feasible()
    test_sdp0_bound_covers_sampled_spherical_codes()
    test_sdp0_antipodal_drops_odd_constraints()
    test_sdp0_antipodal_24_cell_bound()
    test_bound_from_y()
    test_cap_thresholds()
    test_sdpa_structure()
    test_sdpa_code_points_with_side_constraints()
    test_render_ad_needs_breakpoint()
    test_linear_custom_constraint()
    test_sdpa_subset_without_anchors_is_sdpa()
    test_sdpa_subset_hemisphere_points_feasible()
    test_sdpa_subset_anchor_validation()
    test_one_sided_partition_intervals()
    test_cell_pair_interval()
    test_sdphat_one_sided_size()
    test_sdphat_hemisphere_points_feasible()
    test_sdphat_rejects_unsupported_input()
    test_sdphat_whole_space()
    test_lp_dual_bound_e8()
    test_lp_dual_bound_hamming_code()
    test_lp_polynomial_bound_e8_exact()
    test_lp_polynomial_bound_rejections()
    test_sdp0_dual_polynomial_e8()
    test_lp_primal_hamming()
    test_hamming_relaxations_accept_codes()
    test_hamming_bound_covers_sampled_codes()
    test_polynomial_upper_bound_irrational_peak()
    test_polynomial_sign_witness()
    test_lp_dual_bound_violation_is_exact()
    test_hemisphere_lp_bound_circle_case()
    test_model_documents_round_trip()
    test_model_document_rejections()
    test_greedy_codes_respect_angle()
    print("\n✅ All formulation tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
