"""Reads an nvrc render with Pillow and checks size, mode and a few pixels."""
import os
import subprocess
import sys
import tempfile

from PIL import Image


def main(nvrc):
    with tempfile.TemporaryDirectory() as tmp:
        vol = os.path.join(tmp, "v.raw")
        ppm = os.path.join(tmp, "r.ppm")
        subprocess.run([nvrc, "synth", "-o", vol, "--dims", "24,24,24", "--seed", "1"], check=True,
                       stdout=subprocess.DEVNULL)
        tf = os.path.join(tmp, "tf.txt")
        with open(tf, "w") as f:
            f.write("0 0 0 0 0\n0.3 1 0.5 0 0.1\n1 1 1 1 0.9\n")
        subprocess.run([nvrc, "render", vol, "-o", ppm, "--width", "33", "--height", "17", "--tf", tf,
                        "--eye", "0.5,0.5,3", "--shading"], check=True, stdout=subprocess.DEVNULL)
        img = Image.open(ppm)
        img.load()
        assert img.format == "PPM", img.format
        assert img.mode == "RGB", img.mode
        assert img.size == (33, 17), img.size
        with open(ppm, "rb") as f:
            raw = f.read()
        header = b"P6\n33 17\n255\n"
        assert raw.startswith(header)
        body = raw[len(header):]
        assert len(body) == 33 * 17 * 3
        for y in (0, 8, 16):
            for x in (0, 16, 32):
                i = 3 * (y * 33 + x)
                assert img.getpixel((x, y)) == tuple(body[i:i + 3]), (x, y)
        assert img.getpixel((0, 0)) == (0, 0, 0)
        assert max(img.getpixel((16, 8))) > 0
    print("ppm ok")


if __name__ == "__main__":
    main(sys.argv[1])
