import numpy as np
import pytest
from PIL import Image as PILImage

from despeckle_core import Image, ImageStack, InvalidInputError, read_pgm, read_stack_dir, write_pgm
from despeckle_core.imageio import list_frames, write_stack_dir


class TestPgm:
    def test_sixteen_bit_round_trip(self, tmp_path, phantom):
        path = write_pgm(phantom, tmp_path / "nested" / "phantom.pgm")

        assert path.is_file()
        assert np.abs(read_pgm(path).pixels - phantom.pixels).max() <= 0.5 / 65535 + 1e-12

    def test_eight_bit_input(self, tmp_path):
        values = np.array([[0, 128], [255, 64]], dtype=np.uint8)
        PILImage.fromarray(values).save(tmp_path / "small.pgm")

        np.testing.assert_allclose(read_pgm(tmp_path / "small.pgm").pixels, values / 255.0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_pgm(tmp_path / "missing.pgm")

    def test_not_an_image(self, tmp_path):
        path = tmp_path / "bogus.pgm"
        path.write_text("not a pgm", encoding="utf-8")
        with pytest.raises(InvalidInputError):
            read_pgm(path)

    def test_colour_image_rejected(self, tmp_path):
        path = tmp_path / "colour.ppm"
        PILImage.new("RGB", (4, 4)).save(path)
        with pytest.raises(InvalidInputError):
            read_pgm(path)


class TestStackDirectory:
    def test_round_trip_in_acquisition_order(self, tmp_path, phantom):
        stack = ImageStack.from_images([Image(pixels=np.full(phantom.shape, v)) for v in (0.1, 0.5, 0.9)])
        paths = write_stack_dir(stack, tmp_path)
        (tmp_path / "notes.txt").write_text("ignored", encoding="utf-8")

        assert [p.name for p in paths] == ["frame_000.pgm", "frame_001.pgm", "frame_002.pgm"]
        assert list_frames(tmp_path) == paths
        loaded = read_stack_dir(tmp_path)
        np.testing.assert_allclose(loaded.frames[:, 0, 0], [0.1, 0.5, 0.9], atol=1e-5)

    def test_mismatched_dimensions(self, tmp_path, texture, phantom):
        write_pgm(phantom, tmp_path / "a.pgm")
        write_pgm(Image(pixels=texture.pixels[:64]), tmp_path / "b.pgm")
        with pytest.raises(InvalidInputError):
            read_stack_dir(tmp_path)

    def test_empty_directory(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_stack_dir(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_stack_dir(tmp_path / "missing")
