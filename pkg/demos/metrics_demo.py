"""Reference metrics on a few controlled distortions of one image."""

from __future__ import annotations

import numpy as np

from gea.metrics import pair_score
from gea.synthetic import textured_image


def main() -> None:
    gt = textured_image((96, 96), seed=9)
    rng = np.random.default_rng(1)
    cases = {
        "identical": gt,
        "brighter +0.1": np.clip(gt + 0.1, 0, 1),
        "gaussian noise 0.02": gt + rng.normal(0, 0.02, gt.shape),
        "half exposure": 0.5 * gt,
        "red cast": gt * np.array([1.15, 1.0, 0.9]),
    }
    print(f"{'case':<22}{'PSNR dB':>9}{'SSIM':>8}{'L_rec':>9}{'L_color':>9}")
    for name, img in cases.items():
        s = pair_score(img, gt)
        print(f"{name:<22}{s.psnr_db:>9.2f}{s.ssim:>8.4f}{s.l_rec:>9.4f}{s.l_color:>9.4f}")


if __name__ == "__main__":
    main()
