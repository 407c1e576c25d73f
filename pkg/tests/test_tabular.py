import json
import math
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maddaudit.tabular import (
    FEATURES,
    DataError,
    Dataset,
    SplitError,
    binarize_poverty,
    discrete_mi,
    discretize,
    group_proportions,
    load_generic_csv,
    load_oulad,
    minmax,
    mutual_information,
    normalize_split,
    preprocess,
    stratified_split,
)
from synthetic_oulad import INFO_HEADER, REG_HEADER, VLE_HEADER, write_csv


def info_row(sid, result="Pass", imd="20-30%", gender="M", course="AAA", pres="2013J", credits=60,
             age="0-35", edu="A Level or Equivalent", prev=0, dis="N"):
    return [course, pres, sid, gender, "Region", edu, imd, age, prev, credits, dis, result]


def write_dir(path, info, vle, reg=True):
    write_csv(path / "studentInfo.csv", INFO_HEADER, info)
    write_csv(path / "studentVle.csv", VLE_HEADER, vle)
    if reg:
        write_csv(path / "studentRegistration.csv", REG_HEADER, [[r[0], r[1], r[2], -5, ""] for r in info])
    return path


def toy_dataset(y, s=None, seed=0):
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    s = rng.integers(0, 2, y.size) if s is None else np.asarray(s)
    X = np.column_stack([s, rng.random(y.size)])
    return Dataset("T", ("gender", "x"), X, y, ("gender",), tuple(str(i) for i in range(y.size)))


class TestLoadOulad:
    def test_sum_click(self, tmp_path):
        info = [info_row(1), info_row(2), info_row(3)]
        vle = [["AAA", "2013J", 1, 9, 3, 5], ["AAA", "2013J", 1, 9, 4, 7], ["AAA", "2013J", 2, 9, 4, 1]]
        raw = load_oulad(write_dir(tmp_path, info, vle))
        clicks = dict(zip(raw["student_id"], raw["sum_click"]))
        assert clicks == {"1": 12, "2": 1, "3": 0}
        assert dict(zip(raw["student_id"], raw["n_vle_records"])) == {"1": 2, "2": 1, "3": 0}

    def test_clicks_stay_within_presentation(self, tmp_path):
        info = [info_row(1, pres="2013J"), info_row(1, pres="2014J")]
        vle = [["AAA", "2013J", 1, 9, 3, 5], ["AAA", "2014J", 1, 9, 4, 7]]
        raw = load_oulad(write_dir(tmp_path, info, vle))
        assert sorted(raw["sum_click"]) == [5, 7]

    def test_empty_vle(self, tmp_path):
        raw = load_oulad(write_dir(tmp_path, [info_row(1), info_row(2)], []))
        assert raw["sum_click"].tolist() == [0, 0]

    def test_header_only_vle(self, tmp_path):
        write_dir(tmp_path, [info_row(1)], [])
        (tmp_path / "studentVle.csv").write_text("")
        assert load_oulad(tmp_path)["sum_click"].tolist() == [0]

    @pytest.mark.parametrize("name", ["studentInfo.csv", "studentVle.csv"])
    def test_missing_file(self, tmp_path, name):
        write_dir(tmp_path, [info_row(1)], [])
        (tmp_path / name).unlink()
        with pytest.raises(DataError, match=name):
            load_oulad(tmp_path)

    def test_registration_not_required(self, tmp_path):
        assert len(load_oulad(write_dir(tmp_path, [info_row(1)], [], reg=False))) == 1

    def test_malformed_info_line(self, tmp_path):
        write_dir(tmp_path, [info_row(1), info_row(2), info_row(3)], [])
        lines = (tmp_path / "studentInfo.csv").read_text().splitlines()
        lines[3] = lines[3].rsplit(",", 2)[0]
        (tmp_path / "studentInfo.csv").write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError, match="line 4"):
            load_oulad(tmp_path)

    def test_malformed_result(self, tmp_path):
        write_dir(tmp_path, [info_row(1), info_row(2, result="Maybe")], [])
        with pytest.raises(DataError, match="line 3.*Maybe"):
            load_oulad(tmp_path)

    def test_malformed_vle_line(self, tmp_path):
        vle = [["AAA", "2013J", 1, 9, 3, 5], ["AAA", "2013J", 1, 9, 3, "lots"]]
        with pytest.raises(DataError, match="studentVle.csv, line 3"):
            load_oulad(write_dir(tmp_path, [info_row(1)], vle))

    def test_missing_imd_retained(self, tmp_path):
        raw = load_oulad(write_dir(tmp_path, [info_row(1, imd=""), info_row(2)], []))
        assert raw["imd_band"].tolist() == ["", "20-30%"]

    def test_synthetic_directory(self, oulad_dir):
        raw = load_oulad(oulad_dir)
        assert len(raw) == 1200
        assert set(raw["course_id"]) == {"AAA", "BBB", "FFF"}
        vle = pd.read_csv(oulad_dir / "studentVle.csv")
        assert raw["sum_click"].sum() == vle["sum_click"].sum()


class TestPreprocess:
    def test_filtering(self, tmp_path):
        info = [info_row(1), info_row(2, result="Withdrawn"), info_row(3, imd=""),
                info_row(4, result="Fail"), info_row(5, result="Distinction")]
        vle = [["AAA", "2013J", i, 9, 3, 10 * i] for i in range(1, 6)]
        d = preprocess(load_oulad(write_dir(tmp_path, info, vle)), "AAA")
        assert len(d) == 3
        assert d.y.tolist() == [1, 0, 1]
        assert d.stats["dropped"]["withdrawn"] == 1 and d.stats["dropped"]["missing_poverty"] == 1

    def test_minmax_clicks(self, tmp_path):
        info = [info_row(i) for i in (1, 2, 3)]
        vle = [["AAA", "2013J", 2, 9, 3, 50], ["AAA", "2013J", 3, 9, 3, 100], ["AAA", "2013J", 1, 9, 3, 0]]
        d = preprocess(load_oulad(write_dir(tmp_path, info, vle)), "AAA")
        assert d.column("sum_click").tolist() == [0.0, 0.5, 1.0]

    def test_require_vle(self, tmp_path):
        info = [info_row(1), info_row(2)]
        raw = load_oulad(write_dir(tmp_path, info, [["AAA", "2013J", 1, 9, 3, 4]]))
        assert len(preprocess(raw, "AAA")) == 1
        assert len(preprocess(raw, "AAA", require_vle=False)) == 2

    def test_encodings(self, tmp_path):
        info = [info_row(1, gender="F", imd="0-10%", age="0-35", edu="No Formal quals", dis="Y"),
                info_row(2, gender="M", imd="40-50%", age="35-55", edu="HE Qualification"),
                info_row(3, gender="M", imd="90-100%", age="55<=", edu="Post Graduate Qualification")]
        vle = [["AAA", "2013J", i, 9, 3, 1] for i in (1, 2, 3)]
        d = preprocess(load_oulad(write_dir(tmp_path, info, vle)), "AAA")
        assert d.feature_names == FEATURES
        assert d.column("gender").tolist() == [0, 1, 1]
        assert d.column("disability").tolist() == [1, 0, 0]
        assert d.column("poverty").tolist() == [0, 0, 1]
        assert d.column("age").tolist() == [0.0, 0.5, 1.0]
        assert d.column("highest_education").tolist() == [0.0, 0.75, 1.0]
        # constant columns scale to zeros
        assert d.column("studied_credits").tolist() == [0.0, 0.0, 0.0]
        assert d.student_ids == ("AAA/2013J/1", "AAA/2013J/2", "AAA/2013J/3")

    def test_boundary_band_flag(self):
        bands = ["0-10%", "30-40%", "40-50%", "50-60%", "10-20"]
        assert binarize_poverty(bands).tolist() == [0, 0, 0, 1, 0]
        assert binarize_poverty(bands, boundary_band_group=1).tolist() == [0, 0, 1, 1, 0]
        with pytest.raises(DataError):
            binarize_poverty(["lots"])

    def test_course_not_found(self, oulad_dir):
        with pytest.raises(DataError, match="ZZZ"):
            preprocess(load_oulad(oulad_dir), "ZZZ")

    def test_invariants(self, oulad_dir):
        raw = load_oulad(oulad_dir)
        for course in ("AAA", "BBB", "FFF"):
            d = preprocess(raw, course)
            assert np.all((d.X >= 0) & (d.X <= 1))
            for s in d.sensitive_names:
                assert set(np.unique(d.column(s))) <= {0.0, 1.0}
            assert set(np.unique(d.y)) <= {0, 1}
            assert len(set(d.student_ids)) == len(d)

    def test_pooled(self, oulad_dir):
        raw = load_oulad(oulad_dir)
        pooled = preprocess(raw, None)
        assert len(pooled) == sum(len(preprocess(raw, c)) for c in ("AAA", "BBB", "FFF"))
        kept = raw[(raw["final_result"] != "Withdrawn") & (raw["imd_band"] != "") & (raw["n_vle_records"] > 0)]
        assert len(pooled) == len(kept)

    def test_renormalizing_is_idempotent(self, oulad_dir):
        d = preprocess(load_oulad(oulad_dir), "BBB")
        for j in range(d.X.shape[1]):
            col = d.X[:, j]
            again = minmax(col, name="c") if col.max() > col.min() else col
            np.testing.assert_array_equal(again, col)

    def test_round_trip(self, oulad_dir, tmp_path):
        d = preprocess(load_oulad(oulad_dir), "FFF")
        csv_path, json_path = d.write(tmp_path)
        back = Dataset.read(csv_path)
        np.testing.assert_array_equal(back.X, d.X)
        assert back.student_ids == d.student_ids and back.y.tolist() == d.y.tolist()
        side = json.loads(json_path.read_text())
        assert set(side["normalization"]) == {"age", "highest_education", "num_of_prev_attempts",
                                              "studied_credits", "sum_click"}
        assert "dropped" in side and "ordinal_maps" in side

    def test_dataset_is_immutable(self, oulad_dir):
        d = preprocess(load_oulad(oulad_dir), "AAA")
        with pytest.raises(ValueError):
            d.X[0, 0] = 5.0


class TestGenericCsv:
    def test_load(self, tmp_path):
        p = tmp_path / "g.csv"
        pd.DataFrame({"id": ["a", "b", "c", "d"], "f": [2.0, 4.0, 6.0, 10.0], "s": [0, 1, 0, 1],
                      "y": [1, 0, 1, 1]}).to_csv(p, index=False)
        d = load_generic_csv(p, "y", ["s"])
        assert d.feature_names == ("f", "s") and d.course_id == "g"
        assert d.column("f").tolist() == [0.0, 0.25, 0.5, 1.0]
        assert d.student_ids == ("a", "b", "c", "d")

    def test_non_binary_sensitive(self, tmp_path):
        p = tmp_path / "g.csv"
        pd.DataFrame({"f": [1, 2, 3], "s": [0, 2, 1], "y": [1, 0, 1]}).to_csv(p, index=False)
        with pytest.raises(DataError, match="line 3"):
            load_generic_csv(p, "y", ["s"])

    def test_missing(self, tmp_path):
        with pytest.raises(DataError):
            load_generic_csv(tmp_path / "nope.csv", "y", ["s"])


class TestStratifiedSplit:
    def test_ten_rows(self):
        sp = stratified_split(toy_dataset([1] * 6 + [0] * 4), 0.7, seed=1)
        assert (int(sp.train.y.sum()), int((sp.train.y == 0).sum())) == (4, 3)
        assert len(sp.test) == 3

    def test_deterministic(self):
        d = toy_dataset(np.random.default_rng(0).integers(0, 2, 101))
        a, b = stratified_split(d, 0.7, 5), stratified_split(d, 0.7, 5)
        assert a.train.student_ids == b.train.student_ids and a.test.student_ids == b.test.student_ids
        assert stratified_split(d, 0.7, 6).test.student_ids != a.test.student_ids

    def test_errors(self):
        with pytest.raises(SplitError):
            stratified_split(toy_dataset([1, 1, 1, 0]), 0.7)
        with pytest.raises(SplitError):
            stratified_split(toy_dataset([1, 1, 0, 0]), 1.0)

    @settings(max_examples=60)
    @given(st.integers(2, 200), st.integers(2, 200), st.floats(0.1, 0.9), st.integers(0, 2**32 - 1))
    def test_partition_and_stratification(self, n1, n0, ratio, seed):
        d = toy_dataset([1] * n1 + [0] * n0)
        sp = stratified_split(d, ratio, seed)
        tr, te = set(sp.train.student_ids), set(sp.test.student_ids)
        assert not tr & te and tr | te == set(d.student_ids)
        n = n1 + n0
        n_test = min(max(math.floor(n * (1 - ratio) + 0.5), 2), n - 2)
        assert len(te) == n_test
        gap = abs(sp.train.y.mean() - sp.test.y.mean())
        assert gap <= 1 / min(len(tr), len(te)) + 1e-12

    def test_train_only_normalization(self):
        d = toy_dataset([1] * 10 + [0] * 10, seed=3)
        sp = normalize_split(stratified_split(d, 0.7, 0), ["x"])
        x_train = sp.train.column("x")
        assert x_train.min() == 0.0 and x_train.max() == 1.0
        assert np.all((sp.test.column("x") >= 0) & (sp.test.column("x") <= 1))


class TestDiagnostics:
    def test_proportions(self):
        d = toy_dataset([1, 0, 1, 0, 1], s=[0, 0, 0, 1, 1])
        assert group_proportions(d, "gender") == (Fraction(3, 5), Fraction(2, 5))
        d0 = toy_dataset([1, 0, 1], s=[0, 0, 0])
        assert group_proportions(d0, "gender") == (1, 0)

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=50))
    def test_proportions_sum_to_one(self, s):
        p0, p1 = group_proportions(toy_dataset([0] * len(s), s=s), "gender")
        assert p0 + p1 == 1

    def test_mi_self_is_entropy(self):
        s = np.array([0, 1, 1, 0, 1, 1, 1, 0])
        p = s.mean()
        entropy = -(p * math.log(p) + (1 - p) * math.log(1 - p))
        assert discrete_mi(s, s) == pytest.approx(entropy, abs=1e-12)
        X = np.column_stack([s, s])
        d = Dataset("C", ("gender", "copy"), X, s, ("gender",), tuple(map(str, range(8))))
        assert mutual_information(d, "gender").values[("C", "gender", "copy")] == pytest.approx(entropy, abs=1e-12)

    def test_mi_independent(self):
        s = np.repeat([0, 1], 20)
        f = np.tile(np.arange(4), 10)
        assert discrete_mi(s, f) == pytest.approx(0.0, abs=1e-12)

    def test_mi_degenerate_sensitive(self, caplog):
        d = toy_dataset([1, 0, 1, 0], s=[1, 1, 1, 1])
        assert mutual_information(d, "gender").values == {("T", "gender", "x"): 0.0}
        assert "single group" in caplog.text

    def test_discretize(self):
        assert discretize([0.0, 0.5, 0.5, 1.0]).tolist() == [0, 1, 1, 2]
        codes = discretize(np.arange(1000) / 999, q=10)
        assert np.bincount(codes).tolist() == [100] * 10

    def test_mi_matches_sklearn(self):
        from sklearn.metrics import mutual_info_score

        rng = np.random.default_rng(4)
        a, b = rng.integers(0, 3, 300), rng.integers(0, 5, 300)
        assert discrete_mi(a, b) == pytest.approx(mutual_info_score(a, b), abs=1e-12)

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 6)), min_size=1, max_size=80))
    def test_mi_symmetric_nonnegative(self, pairs):
        a = [x for x, _ in pairs]
        b = [y for _, y in pairs]
        assert discrete_mi(a, b) >= 0
        assert discrete_mi(a, b) == pytest.approx(discrete_mi(b, a), abs=1e-12)

    def test_mi_synthetic_gender_correlation(self, oulad_dir):
        raw = load_oulad(oulad_dir)
        scores = {c: mutual_information(preprocess(raw, c), "gender") for c in ("AAA", "BBB", "FFF")}
        for c, sc in scores.items():
            assert all(v >= 0 for v in sc.values.values())
            assert len(sc.values) == len(FEATURES) - 1
