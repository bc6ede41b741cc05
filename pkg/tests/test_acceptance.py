"""Acceptance gate for the package, one test per promised property.

Every check here treats the library as a black box: expected energies come
from mean-based recomputation (helpers.py), brute-force enumeration, or hand
calculation, never from the formulas under test. Each test finishes by
printing a one-line verdict so a plain `pytest -s` run reads as a checklist.
"""

import time

import numpy as np
import pytest

from helpers import (energy_by_means, labeled_energy, random_dataset,
                     random_labels, random_move_instance)
from khcluster.baselines import (KMeansConfig, is_lloyd_fixed_point,
                                 kmeans_sequence, lloyd)
from khcluster.cli import main
from khcluster.core import ClusterStats, Dataset, Partition
from khcluster.kh_engine import (build_sequence, correct_pairs,
                                 correct_tuples, merge_step, split_step,
                                 verify_stability)
from khcluster.oracle import global_min
from khcluster.otsu1d import build_histogram, curve, optimal_thresholds
from khcluster.reclass import (alpha, delta_e_correct, delta_e_merge,
                               gap_identity, merge_many)
from khcluster.segment import GrayImage, SegmentMap, segment_curve, write_pgm

SUITE_SEED = 970311
N_MOVE_INSTANCES = 10_000

_cache: dict = {}


def move_suite():
    """10 000 frozen random move instances with independently computed deltas.

    Each entry: (sub, donor, acceptor stats, E before the move, exact
    delta of a partial move, exact delta of a full merge).
    """
    if "moves" not in _cache:
        rng = np.random.default_rng(SUITE_SEED)
        out = []
        for _ in range(N_MOVE_INSTANCES):
            donor_pts, acceptor_pts, sub_idx = random_move_instance(rng)
            don = ClusterStats.from_points(donor_pts)
            acc = ClusterStats.from_points(acceptor_pts)
            sub = ClusterStats.from_points(donor_pts[sub_idx])
            e_before = energy_by_means(donor_pts) + energy_by_means(acceptor_pts)
            kept = np.delete(donor_pts, sub_idx, axis=0)
            moved = np.vstack([acceptor_pts, donor_pts[sub_idx]])
            exact_correct = (energy_by_means(kept) + energy_by_means(moved)) - e_before
            exact_merge = energy_by_means(np.vstack([donor_pts, acceptor_pts])) - e_before
            out.append((sub, don, acc, e_before, exact_correct, exact_merge))
        _cache["moves"] = out
    return _cache["moves"]


def test_c01_reclass_formulas_match_recomputation():
    t0 = time.perf_counter()
    suite = move_suite()
    for sub, don, acc, e, exact_correct, exact_merge in suite:
        tol = 1e-9 * (1.0 + e)
        assert abs(delta_e_correct(sub, don, acc) - exact_correct) <= tol
        assert abs(delta_e_merge(don, acc) - exact_merge) <= tol

    rng = np.random.default_rng(SUITE_SEED + 1)
    for _ in range(N_MOVE_INSTANCES):
        l = int(rng.integers(2, 6))
        d = int(rng.integers(1, 5))
        groups = [np.round(rng.uniform(-8, 8, d) + rng.normal(0, 1, (int(rng.integers(1, 12)), d)), 3)
                  for _ in range(l)]
        e_parts = sum(energy_by_means(g) for g in groups)
        exact = energy_by_means(np.vstack(groups)) - e_parts
        got = merge_many([ClusterStats.from_points(g) for g in groups])
        assert abs(got - exact) <= 1e-9 * (1.0 + e_parts)

    dt = time.perf_counter() - t0
    assert dt < 10.0
    print(f"C1 formula vs recomputation on {len(suite)} move and "
          f"{N_MOVE_INSTANCES} merge instances ({dt:.1f}s): PASS")


def test_c02_gap_identity_and_sign():
    for sub, don, acc, _e, _ec, _em in move_suite():
        gap = delta_e_merge(don, acc) - delta_e_correct(sub, don, acc)
        ident = gap_identity(sub, don, acc)
        assert gap >= -1e-12
        assert abs(gap - ident) <= 1e-9 * (1.0 + abs(ident))
    print("C2 merge-correct gap is the closed-form square and never negative: PASS")


def test_c03_merge_decomposition():
    for sub, don, acc, _e, _ec, _em in move_suite():
        dc = delta_e_correct(sub, don, acc)
        via_merges = delta_e_merge(don, acc) - delta_e_merge(don - sub, acc + sub)
        assert abs(dc - via_merges) <= 1e-9 * (1.0 + abs(dc))
    print("C3 partial move decomposes into two merges: PASS")


def test_c04_kmeans_surpassed():
    ds = Dataset([0.0, 6.0] + [10.0] * 100)
    km = lloyd(ds, KMeansConfig(m=2, init_centers=np.array([[3.0], [10.0]])))
    assert km.converged
    assert is_lloyd_fixed_point(km.partition)
    assert km.partition.total_e == pytest.approx(18.0, abs=1e-9)

    kh = correct_pairs(km.partition)
    target = 1600.0 / 101.0  # clusters {0} | {6, 10 x 100}
    assert abs(kh.partition.total_e - target) <= 1e-6
    assert abs((kh.partition.total_e - 18.0) - (target - 18.0)) <= 1e-6

    rng = np.random.default_rng(404)
    improved = 0
    for _ in range(500):
        n = int(rng.integers(4, 101))
        d = int(rng.integers(1, 5))
        m = min(int(rng.integers(2, 9)), n)
        ds = random_dataset(rng, n, d)
        centers = ds.points[rng.choice(n, size=m, replace=False)]
        base = lloyd(ds, KMeansConfig(m=m, init_centers=centers)).partition
        after = correct_pairs(base).partition
        assert after.total_e <= base.total_e
        if after.total_e < base.total_e:
            improved += 1
    assert improved > 0
    print(f"C4 k-means surpassed: fixed point 18 -> {target:.6f}, "
          f"500 random instances never worse ({improved} strictly better): PASS")


def test_c05_corrections_end_stable():
    rng = np.random.default_rng(505)
    outputs = []
    for _ in range(60):
        n = int(rng.integers(4, 16))
        d = int(rng.integers(1, 4))
        m = min(int(rng.integers(2, 7)), n - 1)
        ds = random_dataset(rng, n, d)
        part = Partition.from_labels(ds, random_labels(rng, n, m), m)
        outputs.append(correct_pairs(part).partition)
        outputs.append(correct_tuples(part, min(3, part.m)).partition)
        outputs.append(merge_step(part))
        outputs.append(split_step(part))
    for _ in range(40):
        n = int(rng.integers(20, 101))
        d = int(rng.integers(1, 5))
        m = min(int(rng.integers(2, 9)), n - 1)
        ds = random_dataset(rng, n, d)
        base = lloyd(ds, KMeansConfig(m=m, init_labels=random_labels(rng, n, m))).partition
        outputs.append(correct_pairs(base).partition)
        outputs.append(merge_step(base))
    for part in outputs:
        report = verify_stability(part)
        assert report.stable, f"unstable output with {len(report.violations)} violations"
    print(f"C5 all {len(outputs)} correction outputs verify stable: PASS")


def test_c06_otsu_matches_oracle():
    rng = np.random.default_rng(606)
    for _ in range(500):
        n = int(rng.integers(2, 11))
        vals = np.round(rng.normal(0.0, 5.0, n), 2)
        ds = Dataset(vals)
        v = ds.unique_rows().shape[0]
        m = int(rng.integers(1, v + 1))
        _thr, e_dp = optimal_thresholds(build_histogram(ds), m)
        e_oracle = global_min(ds, m).best_e
        assert abs(e_dp - e_oracle) <= 1e-9 * (1.0 + e_oracle)

    _thr, e = optimal_thresholds(build_histogram(Dataset([0.0, 1.0, 9.0, 10.0])), 2)
    assert e == pytest.approx(1.0, rel=1e-9)
    print("C6 threshold search equals exhaustive minimum on 500 instances: PASS")


def test_c07_oracle_minima_are_stable():
    rng = np.random.default_rng(707)
    checked = 0
    for _ in range(60):
        n = int(rng.integers(3, 9))
        d = int(rng.integers(1, 4))
        m = min(int(rng.integers(1, 5)), n)
        ds = random_dataset(rng, n, d)
        res = global_min(ds, m)
        part = Partition.from_labels(ds, np.asarray(res.best_labels, dtype=np.int64), m)
        assert verify_stability(part).stable
        checked += 1
    print(f"C7 every global minimum over {checked} small instances is stable: PASS")


def one_dim_ordering(ds: Dataset):
    v = ds.unique_rows().shape[0]
    mm = min(5, v)
    km = kmeans_sequence(ds, mm)
    kh = build_sequence(ds, mm)
    oc = curve(build_histogram(ds), mm)
    rows = 0
    for m in range(1, mm + 1):
        e_otsu, e_kh, e_km = oc[m - 1].error, kh.energy(m), km.energy(m)
        tol = 1e-9 * (1.0 + e_km)
        assert e_otsu <= e_kh + tol, f"m={m}: otsu {e_otsu} above kh {e_kh}"
        assert e_kh <= e_km + tol, f"m={m}: kh {e_kh} above kmeans {e_km}"
        rows += 1
    return rows


def test_c08_one_dim_method_ordering():
    rows = one_dim_ordering(Dataset([0.0, 1.0, 9.0, 10.0]))
    rows += one_dim_ordering(Dataset([0.0, 6.0] + [10.0] * 100))
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(3, 16))
        rows += one_dim_ordering(Dataset(np.round(rng.normal(0.0, 5.0, n), 1)))
    print(f"C8 otsu <= kh <= kmeans on {rows} one-dimensional curve points: PASS")


def quadrant_image(seed: int) -> GrayImage:
    """64x64 four-quadrant image with an inset square and gaussian noise."""
    rng = np.random.default_rng(seed)
    arr = np.zeros((64, 64))
    arr[:32, :32] = 40.0
    arr[:32, 32:] = 120.0
    arr[32:, :32] = 200.0
    arr[32:, 32:] = 90.0
    arr[24:40, 24:40] = 160.0
    return GrayImage.from_array(np.clip(np.round(arr + rng.normal(0.0, 4.0, arr.shape)), 0, 255))


def component_count(lab2d: np.ndarray) -> int:
    """Number of 4-connected same-label components, by sparse-graph BFS."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    h, w = lab2d.shape
    idx = np.arange(h * w).reshape(h, w)
    hz = lab2d[:, :-1] == lab2d[:, 1:]
    vt = lab2d[:-1, :] == lab2d[1:, :]
    rows = np.concatenate([idx[:, :-1][hz], idx[:-1, :][vt]])
    cols = np.concatenate([idx[:, 1:][hz], idx[1:, :][vt]])
    g = coo_matrix((np.ones(rows.size, dtype=bool), (rows, cols)), shape=(h * w, h * w))
    return connected_components(g, directed=False, return_labels=False)


def test_c09_segmentation_dominance_and_connectivity():
    t0 = time.perf_counter()
    img = quadrant_image(0)
    res = segment_curve(img, m_min=1)

    assert res.merge_only[0].count == img.n_pixels
    for cor, raw in zip(res.corrected, res.merge_only):
        assert cor.count == raw.count
        assert cor.error <= raw.error, f"count {cor.count}: {cor.error} > {raw.error}"

    # independent re-drive with a full connectivity audit at every count
    shape = (img.height, img.width)
    by_count = {False: {r.count: r.error for r in res.merge_only},
                True: {r.count: r.error for r in res.corrected}}
    for correct in (False, True):
        sm = SegmentMap.from_image(img, "pixels")
        while True:
            assert component_count(sm.labels.reshape(shape)) == sm.segment_count
            ref = by_count[correct][sm.segment_count]
            assert abs(sm.total_e - ref) <= 1e-12 * (1.0 + ref)
            if sm.segment_count == 1:
                break
            sm.merge_best()
            if correct:
                sm.correct_boundaries()

    dt = time.perf_counter() - t0
    assert dt < 60.0
    print(f"C9 corrected curve dominates and all segments stay 4-connected "
          f"over {len(res.corrected)} counts ({dt:.1f}s): PASS")


def test_c10_alpha_bounds():
    for n1 in range(1, 51):
        for n2 in range(1, 51):
            prev = None
            for k in range(1, n1 + 1):
                a = alpha(k, n1, n2)
                assert 0.0 <= a < 1.0
                if k == n1:
                    assert a == 0.0
                if prev is not None:
                    assert a < prev
                prev = a
    print("C10 alpha in [0,1), zero at k=n1, strictly decreasing in k: PASS")


def test_c11_cli_determinism(tmp_path):
    data = tmp_path / "pts.csv"
    rng = np.random.default_rng(111)
    vals = np.round(rng.normal(0.0, 4.0, 10), 2)
    data.write_text("\n".join(repr(float(v)) for v in vals) + "\n")

    arr = np.zeros((6, 6))
    arr[:3, :3], arr[:3, 3:], arr[3:, :3], arr[3:, 3:] = 10.0, 60.0, 110.0, 160.0
    arr += np.round(np.random.default_rng(7).normal(0.0, 2.0, arr.shape))
    pgm = tmp_path / "img.pgm"
    write_pgm(GrayImage.from_array(np.clip(arr, 0, 255)), pgm)

    pairs = []
    for tag in ("one", "two"):
        out_c = tmp_path / f"cluster_{tag}"
        assert main(["cluster", "--input", str(data), "--m-max", "3",
                     "--methods", "kmeans,kh,otsu,oracle", "--out", str(out_c)]) == 0
        out_s = tmp_path / f"segment_{tag}"
        assert main(["segment", "--input", str(pgm), "--m-max", "2",
                     "--out", str(out_s)]) == 0
        pairs.append((out_c, out_s))

    (c1, s1), (c2, s2) = pairs
    compared = 0
    for a, b in ((c1 / "report.json", c2 / "report.json"),
                 (c1 / "comparison.csv", c2 / "comparison.csv"),
                 (s1 / "segment_curve.csv", s2 / "segment_curve.csv")):
        assert a.read_bytes() == b.read_bytes()
        compared += 1
    for name in sorted(p.name for p in s1.glob("*.pgm")):
        assert (s1 / name).read_bytes() == (s2 / name).read_bytes()
        compared += 1
    assert compared >= 5
    print(f"C11 identical runs produced {compared} byte-identical outputs: PASS")
