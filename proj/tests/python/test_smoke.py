import numpy as np
import pytest

import icp


def test_record_round_trip():
    arr = np.arange(12, dtype=np.uint8).reshape(3, 4)
    img = icp.PImage("cat.pgm", icp.PixelMatrix(arr))
    rec = icp.encode_record(img)
    assert rec[:4] == b"PIMG"
    assert len(rec) == 16 + len("cat.pgm") + 12
    back = icp.decode_record(rec)
    assert back == img
    assert np.array_equal(back.matrix.to_numpy(), arr)


def test_structured_errors():
    with pytest.raises(icp.IcpError) as info:
        icp.decode_record(b"JUNKJUNKJUNKJUNKJUNK")
    assert info.value.code == "BadMagic"
    with pytest.raises(icp.IcpError) as info:
        icp.decode_pnm(b"P2\n1 1\n255\n0", "x")
    assert info.value.code == "UnsupportedFormat"


def test_pnm_and_grey():
    rgb = np.array([[[255, 0, 0], [0, 0, 255]]], dtype=np.uint8)
    img = icp.decode_pnm(icp.encode_pnm(icp.PixelMatrix(rgb)), "c.ppm")
    assert img.matrix.mode == icp.ColorMode.RGB
    grey = icp.to_grey(img)
    assert grey.matrix.to_numpy().tolist() == [[76, 29]]
    assert icp.grey_value(255, 255, 255) == 255


def test_store_partition_and_job(tmp_path):
    store = icp.BigImage()
    for i in range(12):
        store.append(icp.PImage(f"img_{i:02d}.pgm", icp.value_noise(48, 48, i)))
    assert len(store) == 12
    assert icp.filename_id("a") == 0xAF63DC4C8601EC8C
    store.save(tmp_path / "s")
    loaded = icp.BigImage.load(tmp_path / "s.bigidx")
    assert loaded.filenames == store.filenames
    assert "img_03.pgm" in loaded

    record = 16 + len("img_00.pgm") + 48 * 48
    num_map_task, groups = icp.partition(loaded, 3 * record)
    assert num_map_task == loaded.data_size // (3 * record) + 1
    assert [len(g) for g in groups] == [3, 3, 3, 3]

    csv1, desc1, stats1 = icp.run_job(loaded, 3 * record, "sift", "all", 1)
    csv4, desc4, stats4 = icp.run_job(loaded, 3 * record, "sift", "all", 4)
    assert csv1 == csv4 and desc1 == desc4
    assert stats1["digest"] == stats4["digest"]
    assert csv1.startswith("filename,keypoint_index,x,y,scale,orientation,response\n")
    assert len(desc1) == stats1["keypoints"] * 128 * 4

    csv2, _, _ = icp.run_job(loaded, 3 * record, "harris", "single:2", 2)
    names = {line.split(",")[0] for line in csv2.splitlines()[1:]}
    assert names <= set(groups[1])


def test_features():
    corners = icp.harris(icp.white_square(64, 64, 20, 20, 24))
    assert len(corners) == 4
    kps, desc = icp.sift(icp.value_noise(96, 96, 3))
    assert desc.shape == (len(kps), 128)
    assert np.allclose(np.linalg.norm(desc, axis=1), 1.0, atol=1e-6)


def test_match_params():
    cfg = "cat pgm harris\n* pgm sift\n"
    assert icp.match_params("cat", "pgm", cfg) == "harris"
    assert icp.match_params("dog", "PGM", cfg) == "sift"
    assert icp.match_params("cat", "gif", cfg) is None
    with pytest.raises(icp.IcpError) as info:
        icp.match_params("a", "b", "bad line\n")
    assert info.value.code == "BadConfig"


def test_pack_directory(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    for i in range(4):
        (src / f"f{i}.pgm").write_bytes(icp.encode_pnm(icp.value_noise(8, 8, i)))
    (src / "broken.pgm").write_bytes(b"P5\n")
    result = icp.pack_directory(src, tmp_path, "packed")
    assert sum(s["entries"] for s in result["stores"]) == 4
    assert [e[0] for e in result["errors"]] == ["broken.pgm"]
