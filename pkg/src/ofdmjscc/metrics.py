"""Image-quality metrics (PSNR, SSIM) and the metrics CSV schema shared by
train/eval/sweep drivers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

__all__ = ["psnr", "ssim", "MetricsRow", "METRICS_HEADER", "TRAIN_HEADER",
           "write_metrics_csv", "read_csv_rows", "cpp_rate"]

PSNR_CAP_DB = 100.0


def psnr(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Peak SNR in dB for unit dynamic range, capped for identical images."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"psnr: shapes differ, {x.shape} vs {x_hat.shape}")
    mse = np.mean((x - x_hat) ** 2)
    if mse <= 0.0:
        return PSNR_CAP_DB
    return float(min(PSNR_CAP_DB, 10.0 * np.log10(1.0 / mse)))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def ssim(x: np.ndarray, x_hat: np.ndarray, window: int = 11,
         sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03) -> float:
    """Structural similarity for [C,H,W] (or [H,W]) images in [0, 1].

    Uses a Gaussian window, shrunk to fit when the image is under 16 px.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"ssim: shapes differ, {x.shape} vs {x_hat.shape}")
    if x.ndim == 2:
        x, x_hat = x[None], x_hat[None]
    h, w = x.shape[-2:]
    if min(h, w) < 16:
        window = min(window, min(h, w))
        if window % 2 == 0:
            window -= 1
    kernel = _gaussian_kernel(window, sigma)
    c1 = (k1 * 1.0) ** 2
    c2 = (k2 * 1.0) ** 2

    def filt(img):
        return convolve2d(img, kernel, mode="valid")

    scores = []
    for a, b in zip(x, x_hat):
        mu_a, mu_b = filt(a), filt(b)
        var_a = filt(a * a) - mu_a ** 2
        var_b = filt(b * b) - mu_b ** 2
        cov = filt(a * b) - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
        den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def cpp_rate(n_pilot: int, n_data: int, n_fft: int, n_cp: int,
             height: int, width: int, image_channels: int) -> float:
    """Channel uses per pixel: (N_p+N_s)(L_fft+L_cp) / (H*W*C)."""
    return (n_pilot + n_data) * (n_fft + n_cp) / (height * width * image_channels)


METRICS_HEADER = "experiment,snr_db,n_s,n_p,rho,psnr_db,ssim,ce_mse,mean_papr_db,cpp"
TRAIN_HEADER = "epoch,l_rec,l_cha,psnr_db,ce_mse,mean_papr_db"


@dataclass
class MetricsRow:
    experiment: str
    snr_db: float
    n_data: int
    n_pilot: int
    clip_ratio: float | None
    psnr_db: float
    ssim: float
    ce_mse: float
    mean_papr_db: float
    cpp: float

    def to_csv(self) -> str:
        rho = "inf" if self.clip_ratio is None else repr(float(self.clip_ratio))
        return ",".join([
            self.experiment,
            repr(float(self.snr_db)),
            str(self.n_data),
            str(self.n_pilot),
            rho,
            repr(float(self.psnr_db)),
            repr(float(self.ssim)),
            repr(float(self.ce_mse)),
            repr(float(self.mean_papr_db)),
            repr(float(self.cpp)),
        ])


def write_metrics_csv(path, rows: list[MetricsRow]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [METRICS_HEADER] + [row.to_csv() for row in rows]
    path.write_text("\n".join(lines) + "\n")


def read_csv_rows(path) -> list[dict]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]
