"""Differentiable OFDM link simulator and joint source-channel coding toolkit."""

from .autodiff import Grid, gradient_check, no_grad
from .channel import (ChannelProfile, ChannelRealization, apply_channel,
                      exponential_profile, receiver_snr, sample_channel,
                      snr_to_noise_var)
from .config import ExperimentConfig, load_config, parse_config, save_config
from .metrics import MetricsRow, psnr, ssim
from .models import MODES, ModelSpec, init_model, link_forward
from .ofdm import (OfdmConfig, clip, demodulate, map_symbols, modulate, papr,
                   power_normalize)
from .precoding import average_snr, precode, waterfill
from .receiver import losses, mmse_channel_estimate, mmse_equalize
from .training import Adam, evaluate, train

__version__ = "0.1.0"
