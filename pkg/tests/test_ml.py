import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logforge.engine import _data_file
from logforge.ml import (
    DataTable,
    MLError,
    anomaly_detect,
    classification_stats,
    confusion_matrix,
    cross_entropy_grad,
    cross_entropy_loss,
    fit_logreg,
    fit_pca,
    load_model,
    save_model,
)


def numeric_table(rng, n=50, d=4):
    rows = [[float(v) for v in rng.normal(size=d)] for _ in range(n)]
    return DataTable([f"f{i}" for i in range(d)], rows)


class TestPca:
    def test_rank_one_data_has_zero_second_component(self):
        t = DataTable(["x", "y"], [[i, 2 * i] for i in range(20)])
        model, out = fit_pca(t, ["x", "y"], 2)
        ev = model.explained_variance
        assert ev[1] < 1e-9 * ev[0]
        pc2 = out.col_index("PC_2")
        assert all(abs(row[pc2]) < 1e-9 for row in out.rows)

    def test_full_basis_reconstructs_exactly(self):
        rng = np.random.default_rng(1)
        t = numeric_table(rng, n=30, d=3)
        model, out = fit_pca(t, t.columns, 3)
        X = np.array([r[:3] for r in t.rows], dtype=float)
        scores = np.array([[r[out.col_index(f"PC_{i+1}")] for i in range(3)]
                           for r in out.rows])
        rebuilt = scores @ np.array(model.components) + np.array(model.means)
        assert np.abs(rebuilt - X).max() < 1e-9

    def test_components_match_svd_oracle(self):
        rng = np.random.default_rng(7)
        t = numeric_table(rng, n=50, d=4)
        model, _ = fit_pca(t, t.columns, 4)
        X = np.array([r[:4] for r in t.rows], dtype=float)
        centered = X - X.mean(axis=0)
        _, svals, vt = np.linalg.svd(centered, full_matrices=False)
        for i, component in enumerate(np.array(model.components)):
            oracle = vt[i]
            if oracle[np.argmax(np.abs(oracle))] < 0:
                oracle = -oracle
            assert np.abs(component - oracle).max() < 1e-6
        oracle_var = svals ** 2 / (X.shape[0] - 1)
        assert np.abs(np.array(model.explained_variance) - oracle_var).max() < 1e-6

    def test_orthonormal_components_descending_variance(self):
        rng = np.random.default_rng(3)
        t = numeric_table(rng, n=40, d=5)
        model, _ = fit_pca(t, t.columns, 5)
        C = np.array(model.components)
        assert np.abs(C @ C.T - np.eye(5)).max() < 1e-8
        ev = model.explained_variance
        assert all(a >= b - 1e-12 for a, b in zip(ev, ev[1:]))

    def test_k_above_feature_count_rejected(self):
        t = DataTable(["x", "y"], [[1, 2], [3, 4], [5, 6]])
        with pytest.raises(MLError):
            fit_pca(t, ["x", "y"], 3)

    def test_categorical_fields_are_encoded(self):
        t = DataTable(["svc"], [["a"], ["a"], ["b"], ["b"], ["c"], ["a"]])
        model, out = fit_pca(t, ["svc"], 2)
        assert "PC_1" in out.columns and "PC_2" in out.columns

    def test_apply_reproduces_fit_outputs(self):
        rng = np.random.default_rng(5)
        t = numeric_table(rng, n=25, d=3)
        model, fitted = fit_pca(t, t.columns, 2)
        applied = model.apply(t)
        for col in ("PC_1", "PC_2"):
            i, j = fitted.col_index(col), applied.col_index(col)
            assert all(fitted.rows[r][i] == applied.rows[r][j]
                       for r in range(len(t.rows)))


def separable_table(n=200, margin=0.5, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        sign = 1 if i % 2 == 0 else -1
        x = sign * (margin + float(rng.uniform(0, 2.5)))
        y = float(rng.uniform(-1, 1))
        rows.append([f"{x:.6f}", f"{y:.6f}", "pos" if sign > 0 else "neg"])
    return DataTable(["x", "y", "label"], rows)


class TestLogReg:
    def test_separable_data_perfect_holdout(self):
        model, stats = fit_logreg(separable_table(), "label", ["x", "y"], seed=42)
        assert stats.accuracy == 1.0

    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            n, d, c = int(rng.integers(5, 25)), int(rng.integers(2, 5)), int(rng.integers(2, 4))
            X = rng.normal(size=(n, d))
            Y = np.zeros((n, c))
            Y[np.arange(n), rng.integers(0, c, n)] = 1.0
            W = rng.normal(size=(c, d)) * 0.7
            grad = cross_entropy_grad(W, X, Y)
            eps = 1e-6
            worst = 0.0
            for i in range(c):
                for j in range(d):
                    up, down = W.copy(), W.copy()
                    up[i, j] += eps
                    down[i, j] -= eps
                    numeric = (cross_entropy_loss(up, X, Y) -
                               cross_entropy_loss(down, X, Y)) / (2 * eps)
                    denom = max(abs(numeric), abs(grad[i, j]), 1e-8)
                    worst = max(worst, abs(grad[i, j] - numeric) / denom)
            assert worst < 1e-4

    def test_noise_labels_near_chance(self):
        rng = np.random.default_rng(42)
        rows = [[f"{rng.normal():.6f}", f"{rng.normal():.6f}",
                 "a" if i % 2 == 0 else "b"] for i in range(200)]
        rng.shuffle(rows)
        t = DataTable(["x", "y", "label"], rows)
        _, stats = fit_logreg(t, "label", ["x", "y"], seed=42)
        assert 0.35 <= stats.accuracy <= 0.65

    def test_seeded_determinism(self):
        t = separable_table(seed=9)
        m1, s1 = fit_logreg(t, "label", ["x", "y"], seed=5)
        m2, s2 = fit_logreg(t, "label", ["x", "y"], seed=5)
        assert m1.weights == m2.weights
        assert s1.accuracy == s2.accuracy

    def test_single_class_training_rejected(self):
        t = DataTable(["x", "label"], [[i, "same"] for i in range(10)])
        with pytest.raises(MLError):
            fit_logreg(t, "label", ["x"])

    def test_empty_predictors_rejected(self):
        with pytest.raises(MLError):
            fit_logreg(separable_table(), "label", [])

    def test_multiclass(self):
        rng = np.random.default_rng(2)
        rows = []
        centers = {"a": (0, 0), "b": (8, 0), "c": (0, 8)}
        for i in range(240):
            label = "abc"[i % 3]
            cx, cy = centers[label]
            rows.append([f"{cx + rng.normal(0, 0.5):.5f}",
                         f"{cy + rng.normal(0, 0.5):.5f}", label])
        t = DataTable(["x", "y", "label"], rows)
        _, stats = fit_logreg(t, "label", ["x", "y"], seed=0)
        assert stats.accuracy > 0.95

    def test_apply_names_predicted_column_exactly(self):
        t = separable_table(seed=3)
        model, _ = fit_logreg(t, "label", ["x", "y"])
        out = model.apply(t)
        assert "predicted(label)" in out.columns

    def test_apply_handles_unseen_category(self):
        rows = [["red", "yes"], ["red", "yes"], ["blue", "no"], ["blue", "no"],
                ["red", "yes"], ["blue", "no"], ["red", "yes"], ["blue", "no"]]
        t = DataTable(["color", "label"], rows)
        model, _ = fit_logreg(t, "label", ["color"], seed=1)
        novel = DataTable(["color", "label"], [["green", "?"]])
        out = model.apply(novel)
        assert out.rows[0][out.col_index("predicted(label)")] in ("yes", "no")

    def test_missing_model_field_names_it(self):
        model, _ = fit_logreg(separable_table(), "label", ["x", "y"])
        with pytest.raises(MLError, match="y"):
            model.apply(DataTable(["x"], [[1.0]]))

    def test_apply_matches_fit_time_predictions(self):
        t = separable_table(seed=13)
        model, _ = fit_logreg(t, "label", ["x", "y"], seed=8)
        assert model.predict(t) == model.predict(t)


class TestClassificationStats:
    def test_hand_worked_example(self):
        s = classification_stats(["A", "A", "B"], ["A", "B", "B"])
        assert s.accuracy == pytest.approx(2 / 3)
        assert s.per_class["A"]["precision"] == 1.0
        assert s.per_class["A"]["recall"] == 0.5
        assert s.per_class["B"]["precision"] == 0.5
        assert s.per_class["B"]["recall"] == 1.0

    def test_perfect_prediction_all_ones(self):
        s = classification_stats(["x", "y", "z"], ["x", "y", "z"])
        assert (s.precision, s.recall, s.accuracy, s.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_confusion_off_diagonals(self):
        s = classification_stats(["A", "A", "B"], ["A", "B", "B"])
        assert s.confusion_cell("A", "B") == 1
        assert s.confusion_cell("B", "A") == 0

    def test_accuracy_is_trace_over_total(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            labels = [str(v) for v in rng.integers(0, 4, 60)]
            preds = [str(v) for v in rng.integers(0, 4, 60)]
            s = classification_stats(labels, preds)
            trace = sum(s.confusion[i][i] for i in range(len(s.labels)))
            total = sum(map(sum, s.confusion))
            assert s.accuracy == pytest.approx(trace / total)

    def test_row_sums_equal_actual_counts(self):
        actual = ["a", "a", "b", "c", "c", "c"]
        predicted = ["a", "b", "b", "a", "c", "c"]
        labels, matrix = confusion_matrix(actual, predicted)
        for i, label in enumerate(labels):
            assert sum(matrix[i]) == actual.count(label)
        assert sum(map(sum, matrix)) == len(actual)

    def test_length_mismatch_rejected(self):
        with pytest.raises(MLError):
            classification_stats(["a"], ["a", "b"])

    def test_zero_denominators_count_as_zero(self):
        s = classification_stats(["a", "a"], ["b", "b"])
        assert s.per_class["a"]["precision"] == 0.0
        assert s.per_class["b"]["recall"] == 0.0
        assert s.accuracy == 0.0


class TestAnomaly:
    def test_nine_to_one_probabilities(self):
        t = DataTable(["service"], [["A"]] * 9 + [["B"]])
        rows = anomaly_detect(t, ["service"], threshold=0.2)
        assert rows[0].cells == ["B"]
        assert rows[0].probability == pytest.approx(0.1)
        assert rows[0].probable_cause == "service"
        assert rows[0].is_outlier == 1
        assert all(r.probability == pytest.approx(0.9) and r.is_outlier == 0
                   for r in rows[1:])

    def test_uniform_rows_have_no_outliers(self):
        t = DataTable(["service"], [["same"]] * 8)
        rows = anomaly_detect(t, ["service"])
        assert all(r.probability == 1.0 and r.is_outlier == 0 for r in rows)

    def test_multivariate_probability_is_product(self):
        t = DataTable(["service", "user"], [
            ["A", "u1"], ["A", "u1"], ["A", "u2"], ["B", "u1"],
        ])
        rows = anomaly_detect(t, ["service", "user"], threshold=0.01)
        by_cells = {tuple(r.cells): r.probability for r in rows}
        assert by_cells[("B", "u1")] == pytest.approx((1 / 4) * (3 / 4))
        assert by_cells[("A", "u2")] == pytest.approx((3 / 4) * (1 / 4))

    def test_output_sorted_ascending(self):
        t = DataTable(["f"], [["x"]] * 5 + [["y"]] * 2 + [["z"]])
        rows = anomaly_detect(t, ["f"])
        probs = [r.probability for r in rows]
        assert probs == sorted(probs)

    def test_outlier_iff_probable_cause(self):
        t = DataTable(["a", "b"], [["x", str(i % 3)] for i in range(30)] + [["y", "9"]])
        for row in anomaly_detect(t, ["a", "b"], threshold=0.3):
            assert (row.is_outlier == 1) == (row.probable_cause != "")

    def test_empty_table(self):
        assert anomaly_detect(DataTable(["a"], []), ["a"]) == []

    def test_missing_field_rejected(self):
        with pytest.raises(MLError):
            anomaly_detect(DataTable(["a"], [["x"]]), ["nope"])

    @given(st.lists(st.sampled_from("abcde"), min_size=1, max_size=60),
           st.lists(st.sampled_from("xyz"), min_size=1, max_size=60))
    @settings(max_examples=40)
    def test_multivariate_bounded_by_min_univariate(self, col_a, col_b):
        n = min(len(col_a), len(col_b))
        t = DataTable(["a", "b"], [[col_a[i], col_b[i]] for i in range(n)])
        multi = anomaly_detect(t, ["a", "b"], threshold=0.0)
        uni_a = {r.row_index: r.probability for r in anomaly_detect(t, ["a"], 0.0)}
        uni_b = {r.row_index: r.probability for r in anomaly_detect(t, ["b"], 0.0)}
        for row in multi:
            bound = min(uni_a[row.row_index], uni_b[row.row_index])
            assert row.probability <= bound + 1e-12
            assert 0 < row.probability <= 1

    def test_frequency_normalization(self):
        # Summing p over rows gives sum(count(v)^2) / N: each value v
        # contributes count(v) rows of probability count(v)/N.
        t = DataTable(["f"], [["a"]] * 3 + [["b"]] * 2 + [["c"]])
        rows = anomaly_detect(t, ["f"], threshold=0.0)
        total = sum(r.probability for r in rows)
        assert total == pytest.approx((9 + 4 + 1) / 6)
        assert all(0 < r.probability <= 1 for r in rows)


class TestShippedExamples:
    def load(self, name):
        with _data_file(name).open("r") as fh:
            header, *lines = fh.read().splitlines()
        return DataTable(header.split(","), [l.split(",") for l in lines])

    def descriptor(self):
        with _data_file("anomaly_examples.json").open("r") as fh:
            return json.load(fh)

    def test_service_example_flags_the_rare_row(self):
        spec = self.descriptor()["service_example"]
        t = self.load(spec["file"])
        rows = anomaly_detect(t, spec["fields"], spec["threshold"])
        flagged = [r for r in rows if r.is_outlier]
        assert len(flagged) == 1
        assert flagged[0].probability == pytest.approx(0.1)
        assert flagged[0].probable_cause == "service"

    def test_multifield_outliers_differ_from_univariate(self):
        spec = self.descriptor()["multifield_example"]
        t = self.load(spec["file"])
        uni = {r.row_index for r in anomaly_detect(t, spec["univariate_fields"],
                                                   spec["threshold"]) if r.is_outlier}
        multi = {r.row_index for r in anomaly_detect(t, spec["multivariate_fields"],
                                                     spec["threshold"]) if r.is_outlier}
        assert uni and multi
        assert uni != multi


class TestPersistence:
    def test_logreg_round_trip(self, tmp_path):
        t = separable_table(seed=21)
        model, stats = fit_logreg(t, "label", ["x", "y"], seed=2)
        save_model(model, tmp_path, "clf", extra={"holdout": {"accuracy": stats.accuracy}})
        restored = load_model(tmp_path, "clf")
        assert restored.predict(t) == model.predict(t)
        payload = json.loads((tmp_path / "clf.model.json").read_text())
        assert payload["type"] == "logreg" and payload["schema_version"] == 1

    def test_pca_round_trip(self, tmp_path):
        rng = np.random.default_rng(17)
        t = numeric_table(rng, n=20, d=3)
        model, fitted = fit_pca(t, t.columns, 2)
        save_model(model, tmp_path, "reducer")
        restored = load_model(tmp_path, "reducer")
        out = restored.apply(t)
        i, j = fitted.col_index("PC_1"), out.col_index("PC_1")
        assert all(math.isclose(fitted.rows[r][i], out.rows[r][j], rel_tol=1e-12)
                   for r in range(len(t.rows)))

    def test_missing_model_errors(self, tmp_path):
        with pytest.raises(MLError):
            load_model(tmp_path, "ghost")


class TestCsvIo:
    def test_round_trip(self, tmp_path):
        t = DataTable(["a", "b"], [["1", "x"], ["2", "y,z"]])
        path = tmp_path / "t.csv"
        t.to_csv(path)
        back = DataTable.from_csv(path)
        assert back.columns == t.columns
        assert back.rows == t.rows

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(MLError):
            DataTable.from_csv(path)
