"""Published constants for the classical comparison metrics."""

# SSIM (single scale, Gaussian window)
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 255.0

# UCIQE: chroma std, luminance contrast, mean saturation
UCIQE_WEIGHTS = (0.4680, 0.2745, 0.2576)
UCIQE_TAIL = 0.01

# UIQM: colourfulness, sharpness, contrast
UIQM_WEIGHTS = (0.0282, 0.2953, 3.5753)
UICM_ALPHA = (0.1, 0.1)
UICM_MEAN_WEIGHT = -0.0268
UICM_SPREAD_WEIGHT = 0.1586
UIQM_BLOCK = 8
UIQM_MIN_SIZE = 32
PLIP_GAMMA = 1026.0
LUMA_CHANNEL_WEIGHTS = (0.299, 0.587, 0.114)
