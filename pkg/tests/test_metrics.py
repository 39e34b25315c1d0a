import numpy as np
import pytest

from scankit.metrics import (
    METRIC_COLUMNS,
    QuantizationGrid,
    RecurrenceConfig,
    compute_report,
    cross_recurrence,
    dtw_metric,
    frechet,
    hausdorff,
    human_baseline,
    levenshtein,
    pairwise_eval,
    quantize,
    random_baseline,
    scanmatch,
    tde,
)
from scankit.sphere import GazePoint, Scanpath, ScanpathSet, spherical_distance


def random_path(T, rng, hz=1.0):
    v = rng.normal(size=(T, 3))
    return Scanpath(v / np.linalg.norm(v, axis=1, keepdims=True), hz)


def path_from_latlon(lats_deg, lons_deg):
    return Scanpath.from_latlon(np.radians(lats_deg), np.radians(lons_deg))


# -- oracles ---------------------------------------------------------------


def naive_levenshtein(a, b):
    if len(a) == 0:
        return len(b)
    if len(b) == 0:
        return len(a)
    sub = naive_levenshtein(a[:-1], b[:-1]) + (a[-1] != b[-1])
    return min(sub, naive_levenshtein(a[:-1], b) + 1, naive_levenshtein(a, b[:-1]) + 1)


def enumerate_alignment_scores(sa, sb, score_fn, gap):
    """Best global-alignment score by exhaustive enumeration."""
    best = -np.inf

    def rec(i, j, acc):
        nonlocal best
        if i == len(sa) and j == len(sb):
            best = max(best, acc)
            return
        if i < len(sa) and j < len(sb):
            rec(i + 1, j + 1, acc + score_fn(sa[i], sb[j]))
        if i < len(sa):
            rec(i + 1, j, acc + gap)
        if j < len(sb):
            rec(i, j + 1, acc + gap)

    rec(0, 0, 0.0)
    return best


def brute_recurrence(r, min_line):
    n = r.shape[0]
    c = int(r.sum())
    if c == 0:
        return 0.0, 0.0, 0.0, 0.0

    def run_len(i, j, di, dj):
        length = 1
        ii, jj = i - di, j - dj
        while 0 <= ii < n and 0 <= jj < n and r[ii, jj]:
            length += 1
            ii, jj = ii - di, jj - dj
        ii, jj = i + di, j + dj
        while 0 <= ii < n and 0 <= jj < n and r[ii, jj]:
            length += 1
            ii, jj = ii + di, jj + dj
        return length

    det_cells = lam_cells = 0
    corm_sum = 0
    for i in range(n):
        for j in range(n):
            if not r[i, j]:
                continue
            corm_sum += j - i
            if run_len(i, j, 1, 1) >= min_line:
                det_cells += 1
            if run_len(i, j, 0, 1) >= min_line or run_len(i, j, 1, 0) >= min_line:
                lam_cells += 1
    rec = 100.0 * c / n**2
    det = 100.0 * det_cells / c
    lam = 100.0 * lam_cells / c
    corm = 100.0 * corm_sum / ((n - 1) * c) if n > 1 else 0.0
    return rec, det, lam, corm


# -- quantization and string metrics ----------------------------------------


class TestQuantize:
    def test_single_bin_constant_string(self):
        sp = path_from_latlon([1, 2, 3, 4], [5, 6, 7, 8])
        s = quantize(sp, QuantizationGrid(9, 18))
        assert len(set(s.tolist())) == 1
        assert len(s) == 4

    def test_1x1_grid(self):
        rng = np.random.default_rng(0)
        s = quantize(random_path(10, rng), QuantizationGrid(1, 1))
        assert np.all(s == 0)

    def test_hand_placed_2x4(self):
        grid = QuantizationGrid(2, 4)
        # lat 45N -> row 0; lat 45S -> row 1; lon -135, -45, +45 -> cols 0, 1, 2.
        sp = path_from_latlon([45, -45, 45], [-135, -45, 45])
        assert quantize(sp, grid).tolist() == [0, 5, 2]


class TestLevenshtein:
    def test_identical_zero(self):
        rng = np.random.default_rng(1)
        sp = random_path(8, rng)
        assert levenshtein(sp, sp) == 0

    def test_disjoint_alphabets(self):
        a = path_from_latlon([80] * 6, [0] * 6)
        b = path_from_latlon([-80] * 6, [0] * 6)
        assert levenshtein(a, b) == 6

    def test_matches_naive_recursion(self):
        rng = np.random.default_rng(2)
        grid = QuantizationGrid(3, 6)
        for _ in range(50):
            a = random_path(int(rng.integers(1, 7)), rng)
            b = random_path(int(rng.integers(1, 7)), rng)
            expected = naive_levenshtein(quantize(a, grid).tolist(), quantize(b, grid).tolist())
            assert levenshtein(a, b, grid) == expected

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        a, b = random_path(6, rng), random_path(9, rng)
        assert levenshtein(a, b) == levenshtein(b, a)


class TestScanMatch:
    def test_identical_is_one(self):
        rng = np.random.default_rng(4)
        sp = random_path(7, rng)
        assert scanmatch(sp, sp) == pytest.approx(1.0)

    def test_zero_scores_give_zero(self):
        rng = np.random.default_rng(5)
        a, b = random_path(4, rng), random_path(5, rng)
        assert scanmatch(a, b, score_fn=lambda x, y: 0.0, gap_penalty=0.0) == 0.0

    def test_matches_alignment_enumeration(self):
        rng = np.random.default_rng(6)
        grid = QuantizationGrid(3, 6)
        centers = grid.bin_center_unit(np.arange(grid.n_bins))

        def score_fn(x, y):
            return 1.0 - spherical_distance(centers[x], centers[y]) / np.pi

        for gap in (0.0, -0.2, 0.1):
            for _ in range(10):
                a = random_path(4, rng)
                b = random_path(4, rng)
                expected = enumerate_alignment_scores(
                    quantize(a, grid).tolist(), quantize(b, grid).tolist(), score_fn, gap
                ) / (1.0 * 4)
                got = scanmatch(a, b, grid, gap_penalty=gap, score_fn=score_fn)
                assert got == pytest.approx(expected, abs=1e-12)


# -- curve and time-series metrics -------------------------------------------


class TestHausdorffFrechet:
    def test_identical_zero(self):
        rng = np.random.default_rng(7)
        sp = random_path(6, rng)
        assert hausdorff(sp, sp) == 0.0
        assert frechet(sp, sp) == 0.0

    def test_single_points(self):
        a = Scanpath(np.array([[1.0, 0.0, 0.0]]))
        b = Scanpath(np.array([[0.0, 0.0, 1.0]]))
        assert hausdorff(a, b) == pytest.approx(np.pi / 2)
        assert frechet(a, b) == pytest.approx(np.pi / 2)

    def test_hausdorff_double_loop_oracle(self):
        rng = np.random.default_rng(8)
        a, b = random_path(5, rng), random_path(7, rng)
        d = spherical_distance(a.points[:, None, :], b.points[None, :, :])
        expected = max(d.min(axis=1).max(), d.min(axis=0).max())
        assert hausdorff(a, b) == pytest.approx(expected)

    def test_frechet_recursive_oracle(self):
        import functools

        rng = np.random.default_rng(9)
        a, b = random_path(4, rng), random_path(4, rng)
        d = spherical_distance(a.points[:, None, :], b.points[None, :, :])

        @functools.lru_cache(maxsize=None)
        def rec(i, j):
            if i == 0 and j == 0:
                return d[0, 0]
            options = []
            if i > 0:
                options.append(rec(i - 1, j))
            if j > 0:
                options.append(rec(i, j - 1))
            if i > 0 and j > 0:
                options.append(rec(i - 1, j - 1))
            return max(min(options), d[i, j])

        assert frechet(a, b) == pytest.approx(rec(3, 3))

    def test_frechet_dominates_hausdorff(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            a = random_path(int(rng.integers(1, 9)), rng)
            b = random_path(int(rng.integers(1, 9)), rng)
            assert frechet(a, b) >= hausdorff(a, b) - 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        a, b = random_path(5, rng), random_path(8, rng)
        assert hausdorff(a, b) == pytest.approx(hausdorff(b, a))
        assert frechet(a, b) == pytest.approx(frechet(b, a))
        assert dtw_metric(a, b) == pytest.approx(dtw_metric(b, a))


class TestTde:
    def test_identical_zero(self):
        rng = np.random.default_rng(12)
        sp = random_path(8, rng)
        for k in (1, 3, 8):
            assert tde(sp, sp, k) == 0.0

    def test_full_length_window_is_hausdorff(self):
        rng = np.random.default_rng(13)
        a, b = random_path(5, rng), random_path(5, rng)
        assert tde(a, b, k=5) == pytest.approx(hausdorff(a, b))

    def test_triple_loop_oracle(self):
        rng = np.random.default_rng(14)
        a, b = random_path(6, rng), random_path(7, rng)
        k, stride = 3, 2
        vals = []
        for ia in range(0, len(a) - k + 1, stride):
            wa = Scanpath(a.points[ia : ia + k])
            vals.append(
                min(
                    hausdorff(wa, Scanpath(b.points[ib : ib + k]))
                    for ib in range(0, len(b) - k + 1)
                )
            )
        assert tde(a, b, k, stride) == pytest.approx(np.mean(vals))

    def test_asymmetric_by_construction(self):
        a = path_from_latlon([0, 0, 0, 0, 0, 0], [0, 10, 20, 30, 40, 50])
        b = path_from_latlon([0, 0, 0], [0, 10, 20])
        assert tde(a, b, k=3) != pytest.approx(tde(b, a, k=3))

    def test_k_validation(self):
        rng = np.random.default_rng(15)
        a, b = random_path(4, rng), random_path(4, rng)
        with pytest.raises(ValueError):
            tde(a, b, k=5)


# -- recurrence ---------------------------------------------------------------


class TestCrossRecurrence:
    def test_self_comparison_full_diagonal(self):
        # Spread-out path: only the diagonal recurs at a tight radius.
        sp = path_from_latlon([0] * 6, [-150, -90, -30, 30, 90, 150])
        rec = cross_recurrence(sp, sp, RecurrenceConfig(radius=0.1, min_line=2))
        assert rec.rec == pytest.approx(100.0 * 6 / 36)
        assert rec.det == pytest.approx(100.0)
        assert rec.lam == 0.0
        assert rec.corm == 0.0

    def test_disjoint_paths_all_zero(self):
        a = path_from_latlon([80] * 5, [0] * 5)
        b = path_from_latlon([-80] * 5, [0] * 5)
        rec = cross_recurrence(a, b, RecurrenceConfig(radius=1e-6, min_line=2))
        assert rec == (0.0, 0.0, 0.0, 0.0)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(16)
        for radius in (0.4, 0.9, 1.6):
            for _ in range(30):
                a = random_path(8, rng)
                b = random_path(8, rng)
                cfg = RecurrenceConfig(radius=radius, min_line=2)
                got = cross_recurrence(a, b, cfg)
                r = spherical_distance(a.points[:, None, :], b.points[None, :, :]) <= radius
                expected = brute_recurrence(r, cfg.min_line)
                assert got == pytest.approx(expected)

    def test_min_line_three_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            a = random_path(8, rng)
            b = random_path(8, rng)
            cfg = RecurrenceConfig(radius=1.2, min_line=3)
            got = cross_recurrence(a, b, cfg)
            r = spherical_distance(a.points[:, None, :], b.points[None, :, :]) <= 1.2
            assert got == pytest.approx(brute_recurrence(r, 3))

    def test_unequal_lengths_resampled(self):
        rng = np.random.default_rng(18)
        a, b = random_path(9, rng), random_path(5, rng)
        rec = cross_recurrence(a, b)
        assert all(np.isfinite(rec))

    def test_rotation_invariance(self):
        rng = np.random.default_rng(19)
        a, b = random_path(7, rng), random_path(7, rng)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        ra = Scanpath(a.points @ q.T / np.linalg.norm(a.points @ q.T, axis=1, keepdims=True))
        rb = Scanpath(b.points @ q.T / np.linalg.norm(b.points @ q.T, axis=1, keepdims=True))
        assert cross_recurrence(a, b) == pytest.approx(cross_recurrence(ra, rb))


# -- protocols ----------------------------------------------------------------


class TestProtocols:
    def test_pairwise_singletons(self):
        rng = np.random.default_rng(20)
        a, b = random_path(5, rng), random_path(5, rng)
        gen = ScanpathSet((a,), "img")
        gt = ScanpathSet((b,), "img")
        assert pairwise_eval(gen, gt, dtw_metric) == pytest.approx(dtw_metric(a, b))

    def test_pairwise_identical_lev_zero(self):
        rng = np.random.default_rng(21)
        p = random_path(5, rng)
        s = ScanpathSet((p, p), "img")
        assert pairwise_eval(s, s, levenshtein) == 0.0

    def test_pairwise_singleton_self_is_zero(self):
        rng = np.random.default_rng(28)
        s = ScanpathSet((random_path(6, rng),), "img")
        for metric in (dtw_metric, hausdorff, frechet, levenshtein):
            assert pairwise_eval(s, s, metric) == 0.0

    def test_pairwise_hand_average(self):
        rng = np.random.default_rng(22)
        gen = ScanpathSet(tuple(random_path(4, rng) for _ in range(3)), "img")
        gt = ScanpathSet(tuple(random_path(4, rng) for _ in range(2)), "img")
        expected = np.mean([dtw_metric(g, t) for g in gen for t in gt])
        assert pairwise_eval(gen, gt, dtw_metric) == pytest.approx(expected)

    def test_human_baseline_identical_pair(self):
        rng = np.random.default_rng(23)
        p = random_path(5, rng)
        assert human_baseline(ScanpathSet((p, p), "img"), levenshtein) == 0.0

    def test_human_baseline_singleton_rejected(self):
        rng = np.random.default_rng(24)
        with pytest.raises(ValueError):
            human_baseline(ScanpathSet((random_path(4, rng),), "img"), levenshtein)

    def test_human_baseline_ordered_pairs(self):
        rng = np.random.default_rng(25)
        sps = tuple(random_path(4, rng) for _ in range(3))
        gt = ScanpathSet(sps, "img")
        expected = np.mean(
            [dtw_metric(sps[i], sps[j]) for i in range(3) for j in range(3) if i != j]
        )
        assert human_baseline(gt, dtw_metric) == pytest.approx(expected)


class TestRandomBaseline:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            random_baseline(30, 0, seed=1)

    def test_deterministic(self):
        s1 = random_baseline(30, 5, seed=7)
        s2 = random_baseline(30, 5, seed=7)
        for a, b in zip(s1, s2):
            assert np.array_equal(a.points, b.points)

    def test_latitude_uniform_chi2(self):
        from scipy.stats import chisquare

        sps = random_baseline(100, 1000, seed=8)
        lats = np.concatenate([sp.latlon().lat for sp in sps])
        counts, _ = np.histogram(lats, bins=20, range=(-np.pi / 2, np.pi / 2))
        _, p = chisquare(counts)
        assert p > 1e-4  # uniform in lat, not uniform on the sphere

    def test_longitude_uniform_chi2(self):
        from scipy.stats import chisquare

        sps = random_baseline(100, 1000, seed=9)
        lons = np.concatenate([sp.latlon().lon for sp in sps])
        counts, _ = np.histogram(lons, bins=20, range=(-np.pi, np.pi))
        _, p = chisquare(counts)
        assert p > 1e-4


class TestReport:
    def test_report_round_trip(self):
        rng = np.random.default_rng(26)
        gen = ScanpathSet(tuple(random_path(6, rng) for _ in range(2)), "scene")
        gt = ScanpathSet(tuple(random_path(6, rng) for _ in range(2)), "scene")
        rep = compute_report(gen, gt)
        assert set(rep.values) == set(METRIC_COLUMNS)
        doc = rep.to_json_dict()
        assert list(doc["metrics"]) == list(METRIC_COLUMNS)
        text = rep.to_text()
        assert text.startswith("image_id=scene\n")
        for k in METRIC_COLUMNS:
            assert f"{k}=" in text
        assert "config.recurrence_radius_rad=0.25" in text

    def test_human_protocol(self):
        rng = np.random.default_rng(27)
        gt = ScanpathSet(tuple(random_path(5, rng) for _ in range(3)), "scene")
        rep = compute_report(gt, gt, protocol="human")
        assert rep.values["LEV"] == pytest.approx(human_baseline(gt, levenshtein))
        assert rep.config["protocol"] == "human"
