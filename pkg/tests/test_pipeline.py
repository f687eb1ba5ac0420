import sys
import textwrap

import numpy as np
import pytest

from cxranomaly.errors import BackendError, InputError, ShapeError
from cxranomaly.lungmask import split_mask
from cxranomaly.manifest import CaseManifest, load_manifest
from cxranomaly.pgm import read_mask, read_pgm, write_mask, write_pgm
from cxranomaly.pipeline import BackendSpec, eval_dataset, prepare, run_test, translate
from cxranomaly.synthetic import generate_dataset


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    manifest_path, fixed_path, template_path = generate_dataset(
        root, seed=21, count=5, lesion_rate=0.6
    )
    cases = load_manifest(manifest_path)
    return {
        "cases": cases,
        "fixed_mask": read_mask(fixed_path),
        "fixed_path": fixed_path,
        "template": template_path,
        "root": root,
    }


def _stub_backend(tmp_path, body: str) -> str:
    script = tmp_path / "stub.py"
    script.write_text(textwrap.dedent(body))
    return f"{sys.executable} {script} {{in}} {{out}}"


COPY_BODY = """
    import shutil, sys
    shutil.copyfile(sys.argv[1], sys.argv[2])
"""


def test_prepare_counts(dataset, tmp_path):
    ds = prepare(dataset["cases"], dataset["fixed_mask"], tmp_path)
    n_abn = sum(1 for c in dataset["cases"] if c.abnormal)
    n_norm = len(dataset["cases"]) - n_abn
    assert len(ds.x_right) == len(ds.x_left) == 2 * n_abn
    assert len(ds.y_right) == len(ds.y_left) == n_norm
    assert not ds.skipped
    manifest = (tmp_path / "dataset_manifest.tsv").read_text()
    assert manifest.count("true") == 2 * n_abn


def test_prepare_outputs_stay_inside_fixed_sides(dataset, tmp_path):
    ds = prepare(dataset["cases"], dataset["fixed_mask"], tmp_path)
    fixed = split_mask(dataset["fixed_mask"])
    for name in ("Xr", "Xl", "Yr", "Yl"):
        for item in ds.subset(name):
            img = read_pgm(item["path"])
            side = fixed.side(item["side"])
            assert (img[side == 0] == 0).all()
            assert img[side > 0].any()


def test_prepare_skips_broken_case(dataset, tmp_path):
    img = np.full((256, 256), 90, dtype=np.uint8)
    solo = np.zeros((256, 256), dtype=np.uint8)
    solo[60:120, 100:160] = 1
    write_pgm(img, tmp_path / "broken.pgm")
    write_mask(solo, tmp_path / "broken_mask.pgm")
    broken = CaseManifest("broken", tmp_path / "broken.pgm", tmp_path / "broken_mask.pgm", "abnormal")
    ds = prepare([*dataset["cases"], broken], dataset["fixed_mask"], tmp_path / "out")
    assert [s["case_id"] for s in ds.skipped] == ["broken"]
    assert ds.skipped[0]["reason"] == "SPLIT"
    n_abn = sum(1 for c in dataset["cases"] if c.abnormal)
    assert len(ds.x_right) == 2 * n_abn


def test_prepare_parallel_matches_serial(dataset, tmp_path):
    one = prepare(dataset["cases"], dataset["fixed_mask"], tmp_path / "serial", jobs=1)
    two = prepare(dataset["cases"], dataset["fixed_mask"], tmp_path / "parallel", jobs=4)
    serial = (tmp_path / "serial" / "dataset_manifest.tsv").read_text()
    parallel = (tmp_path / "parallel" / "dataset_manifest.tsv").read_text()
    assert serial == parallel
    for item_a, item_b in zip(one.x_right, two.x_right):
        assert item_a["path"].read_bytes().split(b"\n", 2)[-1] == item_b["path"].read_bytes().split(b"\n", 2)[-1]


def test_translate_identity_and_template(dataset):
    img = read_pgm(dataset["cases"][0].image_path)
    out = translate(img, "l", BackendSpec(kind="identity"))
    assert np.array_equal(out, img) and out is not img

    fixed = split_mask(dataset["fixed_mask"])
    spec = BackendSpec(
        kind="template", template_left=dataset["template"], template_right=dataset["template"]
    )
    out = translate(img, "l", spec, side_mask=fixed.left)
    template = read_pgm(dataset["template"])
    assert np.array_equal(out, template * fixed.left)


def test_translate_template_dfor_wrong_size_rejected(dataset, tmp_path):
    img = read_pgm(dataset["cases"][0].image_path)
    small = tmp_path / "small.pgm"
    write_pgm(np.zeros((16, 16), dtype=np.uint8), small)
    spec = BackendSpec(kind="template", template_left=small, template_right=small)
    with pytest.raises(ShapeError):
        translate(img, "l", spec)


def test_prepare_fails_globally_on_bad_fixed_mask(dataset, tmp_path):
    solo = np.zeros((256, 256), dtype=np.uint8)
    solo[50:200, 60:180] = 1
    from cxranomaly.errors import SplitError

    with pytest.raises(SplitError):
        prepare(dataset["cases"], solo, tmp_path)


def test_translate_external_copy_stub(dataset, tmp_path):
    img = read_pgm(dataset["cases"][0].image_path)
    spec = BackendSpec(
        kind="external", command=_stub_backend(tmp_path, COPY_BODY), exchange_dir=tmp_path / "xch"
    )
    out = translate(img, "r", spec)
    assert np.array_equal(out, img)
    assert not list((tmp_path / "xch").glob("*.pgm"))


@pytest.mark.parametrize(
    "body,message",
    [
        ("import sys; sys.exit(3)", "exited 3"),
        (
            """
            import shutil, sys
            shutil.copyfile(sys.argv[1], sys.argv[2])
            sys.stderr.write('boom')
            sys.exit(1)
            """,
            "boom",
        ),
        ("import sys", "no output"),
        (
            """
            import sys
            with open(sys.argv[2], 'wb') as f:
                f.write(b'P5\\n4 4\\n255\\n' + bytes(16))
            """,
            "shape",
        ),
    ],
)
def test_external_backend_failures(dataset, tmp_path, body, message):
    img = read_pgm(dataset["cases"][0].image_path)
    spec = BackendSpec(
        kind="external",
        command=_stub_backend(tmp_path, body),
        exchange_dir=tmp_path / "xch",
    )
    with pytest.raises(BackendError, match=message):
        translate(img, "l", spec)


def test_external_backend_timeout(dataset, tmp_path):
    img = read_pgm(dataset["cases"][0].image_path)
    spec = BackendSpec(
        kind="external",
        command=_stub_backend(tmp_path, "import time; time.sleep(30)"),
        exchange_dir=tmp_path / "xch",
        timeout=0.5,
    )
    with pytest.raises(BackendError, match="timed out"):
        translate(img, "l", spec)


def test_backend_spec_validation(tmp_path):
    with pytest.raises(InputError):
        BackendSpec(kind="nope").validate()
    with pytest.raises(InputError):
        BackendSpec(kind="template").validate()
    with pytest.raises(InputError):
        BackendSpec(kind="external", command="cp a b", exchange_dir=tmp_path).validate()
    with pytest.raises(InputError):
        BackendSpec(kind="external", command="cp {in} {out}").validate()


def test_run_test_identity_preserves_outside(dataset, tmp_path):
    case = dataset["cases"][0]
    fixed = split_mask(dataset["fixed_mask"])
    run_test(case, fixed, BackendSpec(kind="identity"), [20.0], tmp_path)
    img = read_pgm(case.image_path)
    merged = read_pgm(tmp_path / case.case_id / "merged.pgm")
    sides = split_mask(read_mask(case.mask_path))
    outside = (sides.left | sides.right) == 0
    assert np.array_equal(merged[outside], img[outside])
    lungs = ~outside
    v = np.abs(img.astype(int) - merged.astype(int))
    assert v[lungs].mean() <= 3.0
    for side in ("l", "r"):
        for name in ("moving", "fixed", "translated", "deregistered"):
            assert (tmp_path / case.case_id / side / f"{name}.pgm").is_file()
    assert (tmp_path / case.case_id / "anomaly_tau20.pgm").is_file()


def test_run_test_sides_are_independent(dataset, tmp_path):
    case = next(c for c in dataset["cases"] if not c.abnormal)
    fixed = split_mask(dataset["fixed_mask"])
    sides = split_mask(read_mask(case.mask_path))
    img = read_pgm(case.image_path)

    corrupted = img.copy()
    corrupted[sides.right > 0] = 255
    alt_img = tmp_path / "corrupted.pgm"
    write_pgm(corrupted, alt_img)
    alt_case = CaseManifest(case.case_id, alt_img, case.mask_path, case.label)

    run_test(case, fixed, BackendSpec(kind="identity"), [20.0], tmp_path / "a")
    run_test(alt_case, fixed, BackendSpec(kind="identity"), [20.0], tmp_path / "b")
    for name in ("moving", "fixed", "translated", "deregistered"):
        a = (tmp_path / "a" / case.case_id / "l" / f"{name}.pgm").read_bytes()
        b = (tmp_path / "b" / case.case_id / "l" / f"{name}.pgm").read_bytes()
        assert a == b


def test_run_test_rejects_mismatched_image(dataset, tmp_path):
    case = dataset["cases"][0]
    write_pgm(np.zeros((64, 64), dtype=np.uint8), tmp_path / "small.pgm")
    bad = CaseManifest(case.case_id, tmp_path / "small.pgm", case.mask_path, case.label)
    fixed = split_mask(dataset["fixed_mask"])
    with pytest.raises(ShapeError):
        run_test(bad, fixed, BackendSpec(kind="identity"), [20.0])


def test_eval_dataset_requires_both_classes(dataset, tmp_path):
    normals = [c for c in dataset["cases"] if not c.abnormal]
    with pytest.raises(InputError):
        eval_dataset(normals, dataset["fixed_mask"], BackendSpec(kind="identity"), [20.0], tmp_path)


def test_eval_dataset_template_discriminates(dataset, tmp_path):
    spec = BackendSpec(
        kind="template", template_left=dataset["template"], template_right=dataset["template"]
    )
    result = eval_dataset(dataset["cases"], dataset["fixed_mask"], spec, [20.0, 30.0], tmp_path, jobs=2)
    assert result["report"].is_file()
    summary = result["summary"]
    assert set(summary) == {20.0, 30.0}
    assert summary[20.0]["auc"] >= 0.9
    # per-case monotone patient scores across taus
    by_case = {}
    for row in result["rows"]:
        by_case.setdefault(row.case_id, {})[row.tau] = row.patient_score
    for scores in by_case.values():
        assert scores[30.0] <= scores[20.0] + 1e-9
