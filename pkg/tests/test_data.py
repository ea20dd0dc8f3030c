import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dauc.data import (
    DataError,
    LabeledFeatures,
    LatentDataset,
    NormalizationStats,
    ParseError,
    load_features_csv,
    load_latent_csv,
    load_meta,
    save_features_csv,
    save_latent_csv,
    zscore_apply,
    zscore_fit,
)


def make_ds(latents, y_true, y_pred, num_classes=2, u=None):
    return LatentDataset(
        ids=tuple(f"x{i}" for i in range(len(latents))),
        latents=np.asarray(latents, dtype=float),
        y_true=y_true,
        y_pred=y_pred,
        num_classes=num_classes,
        u=u,
    )


def write_latent_file(tmp_path, lines, num_classes=2, dim=2, name="data.csv"):
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    (tmp_path / (p.stem + ".meta.json")).write_text(
        f'{{"num_classes": {num_classes}, "dim": {dim}, "split": "test"}}',
        encoding="utf-8",
    )
    return p


class TestLatentCsv:
    def test_basic_load(self, tmp_path):
        p = write_latent_file(
            tmp_path,
            [
                "id,y_true,y_pred,h0,h1",
                "a,0,0,1.5,2.0",
                "b,1,0,-1.0,0.25",
                "c,-1,1,0.0,3.5",
            ],
        )
        ds = load_latent_csv(p)
        assert ds.n == 3 and ds.dim == 2
        assert ds.u is None
        assert ds.ids == ("a", "b", "c")
        assert list(ds.y_true) == [0, 1, -1]
        assert ds.latents[1, 0] == -1.0

    def test_class_index_out_of_range_names_line(self, tmp_path):
        p = write_latent_file(
            tmp_path,
            [
                "id,y_true,y_pred,h0,h1",
                "a,0,0,1.0,2.0",
                "b,1,1,0.5,0.5",
                "c,1,7,0.0,0.0",
            ],
        )
        with pytest.raises(ParseError, match=r"class index out of range, line 4"):
            load_latent_csv(p)

    def test_ragged_row_names_line(self, tmp_path):
        p = write_latent_file(
            tmp_path,
            ["id,y_true,y_pred,h0,h1", "a,0,0,1.0,2.0", "b,1,1,0.5"],
        )
        with pytest.raises(ParseError, match=r"line 3"):
            load_latent_csv(p)

    def test_non_numeric_latent_names_line(self, tmp_path):
        p = write_latent_file(
            tmp_path,
            ["id,y_true,y_pred,h0,h1", "a,0,0,1.0,zap"],
        )
        with pytest.raises(ParseError, match=r"line 2"):
            load_latent_csv(p)

    def test_malformed_header(self, tmp_path):
        p = write_latent_file(tmp_path, ["id,label,pred,h0,h1", "a,0,0,1.0,2.0"])
        with pytest.raises(ParseError, match="malformed header"):
            load_latent_csv(p)

    def test_u_column_roundtrip_and_range(self, tmp_path):
        ds = make_ds([[1.0, 2.0]], [0], [1], u=[0.25])
        save_latent_csv(ds, tmp_path / "u.csv")
        back = load_latent_csv(tmp_path / "u.csv")
        assert back == ds
        p = write_latent_file(tmp_path, ["id,y_true,y_pred,u,h0,h1", "a,0,0,1.5,1.0,2.0"])
        with pytest.raises(ParseError, match=r"\[0, 1\], line 2"):
            load_latent_csv(p)

    def test_missing_meta(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("id,y_true,y_pred,h0\na,0,0,1.0\n", encoding="utf-8")
        with pytest.raises(ParseError, match="metadata"):
            load_latent_csv(p)

    def test_empty_dataset_roundtrip(self, tmp_path):
        ds = LatentDataset(
            ids=(),
            latents=np.empty((0, 3)),
            y_true=np.empty(0, dtype=int),
            y_pred=np.empty(0, dtype=int),
            num_classes=4,
        )
        save_latent_csv(ds, tmp_path / "empty.csv")
        text = (tmp_path / "empty.csv").read_text(encoding="utf-8")
        assert text == "id,y_true,y_pred,h0,h1,h2\n"
        assert load_latent_csv(tmp_path / "empty.csv") == ds

    def test_three_row_file_has_four_lines(self, tmp_path):
        ds = make_ds([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]], [0, 1, 0], [0, 1, 1])
        save_latent_csv(ds, tmp_path / "three.csv")
        lines = (tmp_path / "three.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 4

    def test_meta_split_recorded(self, tmp_path):
        ds = make_ds([[0.0, 1.0]], [0], [0])
        save_latent_csv(ds, tmp_path / "m.csv", split="val", meta_extra={"u_source": "entropy"})
        meta = load_meta(tmp_path / "m.csv")
        assert meta["split"] == "val" and meta["u_source"] == "entropy"

    @settings(max_examples=50, deadline=None)
    @given(
        data=st.lists(
            st.tuples(
                st.floats(allow_nan=False, allow_infinity=False, width=64),
                st.floats(allow_nan=False, allow_infinity=False, width=64),
                st.integers(min_value=-1, max_value=2),
                st.integers(min_value=0, max_value=2),
            ),
            min_size=1,
            max_size=20,
        )
    )
    def test_roundtrip_property(self, data, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("rt")
        ds = make_ds(
            [[a, b] for a, b, _, _ in data],
            [t for _, _, t, _ in data],
            [p for _, _, _, p in data],
            num_classes=3,
        )
        save_latent_csv(ds, tmp / "p.csv")
        assert load_latent_csv(tmp / "p.csv") == ds

    def test_ids_with_commas_and_quotes_roundtrip(self, tmp_path):
        ds = LatentDataset(
            ids=('a,b', 'c"d', "plain"),
            latents=np.array([[1.0], [2.0], [3.0]]),
            y_true=[0, 1, 0],
            y_pred=[0, 1, 0],
            num_classes=2,
        )
        save_latent_csv(ds, tmp_path / "q.csv")
        assert load_latent_csv(tmp_path / "q.csv") == ds


class TestFeaturesCsv:
    def test_roundtrip(self, tmp_path):
        feats = LabeledFeatures(
            ids=("a", "b"),
            x=np.array([[0.5, -1.0], [2.5, 3.5]]),
            y=np.array([0, -1]),
            num_classes=2,
        )
        save_features_csv(feats, tmp_path / "f.csv", split="train")
        assert load_features_csv(tmp_path / "f.csv") == feats

    def test_bad_label(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("id,y_true,x0\na,5,1.0\n", encoding="utf-8")
        (tmp_path / "f.meta.json").write_text(
            '{"num_classes": 2, "dim": 1, "split": "train"}', encoding="utf-8"
        )
        with pytest.raises(ParseError, match="line 2"):
            load_features_csv(p)


class TestInvariants:
    def test_y_pred_range_enforced(self):
        with pytest.raises(DataError):
            make_ds([[0.0, 0.0]], [0], [5])

    def test_y_true_sentinel_allowed(self):
        ds = make_ds([[0.0, 0.0]], [-1], [1])
        assert ds.y_true[0] == -1

    def test_u_range_enforced(self):
        with pytest.raises(DataError):
            make_ds([[0.0, 0.0]], [0], [0], u=[1.5])

    def test_non_finite_latents_rejected(self):
        with pytest.raises(DataError):
            make_ds([[np.nan, 0.0]], [0], [0])

    def test_immutable_arrays(self):
        ds = make_ds([[1.0, 2.0]], [0], [0])
        with pytest.raises(ValueError):
            ds.latents[0, 0] = 9.0

    def test_take_preserves_order(self):
        ds = make_ds([[0.0, 0], [1, 1], [2, 2]], [0, 1, 0], [0, 1, 1])
        sub = ds.take([2, 0])
        assert sub.ids == ("x2", "x0")
        sub2 = ds.take(np.array([True, False, True]))
        assert sub2.ids == ("x0", "x2")


class TestZscore:
    def test_analytic_two_points(self):
        ds = make_ds([[0.0], [2.0]], [0, 1], [0, 1])
        stats = zscore_fit(ds)
        assert stats.means[0] == 1.0
        assert stats.stds[0] == 1.0

    def test_constant_column_degeneracy(self):
        ds = make_ds([[5.0], [5.0]], [0, 1], [0, 1])
        stats = zscore_fit(ds)
        assert stats.means[0] == 5.0 and stats.stds[0] == 1.0

    def test_recompute_oracle_random(self):
        rng = np.random.Generator(np.random.PCG64(7))
        x = rng.standard_normal((100, 3)) * 3.0 + 5.0
        ds = make_ds(x, [0] * 100, [0] * 100)
        z = zscore_apply(ds, zscore_fit(ds))
        assert np.all(np.abs(z.latents.mean(axis=0)) <= 1e-9)
        assert np.all(np.abs(z.latents.std(axis=0) - 1.0) <= 1e-9)

    def test_identity_stats(self):
        ds = make_ds([[3.0, 4.0]], [0], [0])
        stats = NormalizationStats(np.zeros(2), np.ones(2))
        assert zscore_apply(ds, stats) == ds

    def test_single_row_at_means_is_zero(self):
        ds = make_ds([[7.0, -2.0]], [0], [0])
        z = zscore_apply(ds, zscore_fit(ds))
        assert np.all(z.latents == 0.0)

    def test_dim_mismatch(self):
        ds = make_ds([[1.0, 2.0]], [0], [0])
        with pytest.raises(DataError):
            zscore_apply(ds, NormalizationStats(np.zeros(3), np.ones(3)))

    def test_empty_fit_rejected(self):
        ds = LatentDataset(
            ids=(), latents=np.empty((0, 2)), y_true=[], y_pred=[], num_classes=2
        )
        with pytest.raises(DataError):
            zscore_fit(ds)
