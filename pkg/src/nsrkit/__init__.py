"""Joint denoising and super-resolution toolkit."""
