"""Сетка абляций и экспорт таблицы результатов."""
from pathlib import Path

import pytest
from docx import Document
from openpyxl import load_workbook

from backend.ccc.loss import NEG_INFINITY
from backend.ccc.repro import (
    BASELINE_LABEL,
    CSV_HEADER,
    GridRow,
    baseline_cell,
    ccc_cell,
    clustering_cell,
    preset_cells,
    read_csv,
    run_grid,
    slug,
    write_csv,
    write_docx,
    write_xlsx,
)
from backend.ccc.trainer import make_synthetic


def _rows():
    return [
        GridRow("Baseline wav2vec 2.0", 4.1, 3.9, 0.25, 0.61),
        GridRow("CF (8), SF (-∞)", 4.0, 3.8, 0.27, None),
        GridRow("CCC - CF(16), SF(0.3) - pooled", error="MaskError: span"),
    ]


class TestPresets:
    def test_augmentation(self, train_config):
        labels = [c.label for c in preset_cells("augmentation", train_config)]
        assert labels == [BASELINE_LABEL, "Augmentation I", "Augmentation II (*)", "Augmentation II"]

    def test_clustering(self, train_config):
        cells = preset_cells("clustering", train_config)
        assert len(cells) == 13
        assert cells[1].label == "CF (8), SF (-∞)"
        assert cells[1].config.loss.sf is NEG_INFINITY
        assert cells[-1].label == "CF (24), SF (0.5)"

    def test_ccc(self, train_config):
        cells = preset_cells("ccc", train_config)
        labels = [c.label for c in cells]
        assert labels[:2] == ["Augmentation II", "CF (16), SF (0.3)"]
        assert "CCC - CF(16), SF(0.3) - pooled" in labels
        assert "CCC - CF(8), SF(0.5)" in labels
        assert len(cells) == 10

    def test_unknown(self, train_config):
        with pytest.raises(KeyError):
            preset_cells("speech", train_config)

    def test_cells_are_independent(self, train_config):
        cell = ccc_cell(train_config, 16, 0.3, True)
        assert cell.config.loss.clustering.cf == 16
        assert train_config.loss.clustering.cf == 1

    def test_slug(self):
        assert slug("CF (8), SF (-∞)") == "cf_8_sf_neg_inf"
        assert slug(BASELINE_LABEL) == "baseline_wav2vec_2_0"


class TestRunGrid:
    def test_single_cell_with_probe(self, train_config, tmp_path):
        corpus = make_synthetic(str(tmp_path / "corpus"), clips=9, seed=0, duration_s=0.5)
        rows = run_grid([baseline_cell(train_config)], str(tmp_path / "grid"), corpus_dir=corpus.out_dir)
        assert len(rows) == 1
        row = rows[0]
        assert not row.failed
        assert row.config_label == BASELINE_LABEL
        assert row.l_total is not None and 0.0 <= row.probe_accuracy <= 1.0
        assert (tmp_path / "grid" / "baseline_wav2vec_2_0" / "metrics.jsonl").exists()

    def test_cf_one_matches_baseline(self, train_config, clips, tmp_path):
        bypass = clustering_cell(train_config, 1, 0.3)
        assert bypass.label == BASELINE_LABEL
        a = run_grid([baseline_cell(train_config)], str(tmp_path / "a"), samples=clips, probe=False)
        b = run_grid([bypass], str(tmp_path / "b"), samples=clips, probe=False)
        assert a == b
        metrics = [Path(tmp_path / d / "baseline_wav2vec_2_0" / "metrics.jsonl").read_bytes() for d in ("a", "b")]
        assert metrics[0] == metrics[1]

    def test_failed_cell_does_not_stop_grid(self, train_config, clips, tmp_path):
        broken = clustering_cell(train_config, 8, 0.5)
        broken.config.model.mask.span_length = 100
        rows = run_grid([broken, baseline_cell(train_config)], str(tmp_path), samples=clips, probe=False)
        assert rows[0].failed and rows[0].error.startswith("MaskError")
        assert not rows[1].failed

    def test_small_subgrid(self, train_config, clips, tmp_path):
        cells = [ccc_cell(train_config, cf, sf, pooled=False) for cf in (4, 8) for sf in (0.3, NEG_INFINITY)]
        rows = run_grid(cells, str(tmp_path), samples=clips, probe=False)
        assert [r.config_label for r in rows] == [c.label for c in cells]
        assert not any(r.failed for r in rows)
        path = write_csv(rows, str(tmp_path / "ccc.csv"))
        assert Path(path).read_text(encoding="utf-8").splitlines()[0] == ",".join(CSV_HEADER)


    @pytest.mark.slow
    def test_clustering_table(self, train_config, clips, tmp_path):
        rows = run_grid(preset_cells("clustering", train_config), str(tmp_path), samples=clips, probe=False)
        assert len(rows) == 13
        assert not any(r.failed for r in rows)


class TestExports:
    def test_csv_round_trip(self, tmp_path):
        rows = _rows()
        back = read_csv(write_csv(rows, str(tmp_path / "t.csv")))
        assert [r.config_label for r in back] == [r.config_label for r in rows]
        assert back[0].l_total == 4.1
        assert back[1].probe_accuracy is None
        assert back[2].l_total is None

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,loss\nx,1\n", encoding="utf-8")
        with pytest.raises(ValueError):
            read_csv(str(path))

    def test_xlsx(self, tmp_path):
        path = write_xlsx(_rows(), str(tmp_path / "out" / "t.xlsx"))
        ws = load_workbook(path).active
        values = list(ws.values)
        assert values[0] == CSV_HEADER + ("error",)
        assert values[1][0] == "Baseline wav2vec 2.0"
        assert values[3][-1] == "MaskError: span"

    def test_docx(self, tmp_path):
        doc = Document(write_docx(_rows(), str(tmp_path / "t.docx")))
        table = doc.tables[0]
        assert len(table.rows) == 4
        assert table.rows[1].cells[1].text == "4.1000"
        assert table.rows[3].cells[1].text == "—"
        assert any("MaskError" in p.text for p in doc.paragraphs)
