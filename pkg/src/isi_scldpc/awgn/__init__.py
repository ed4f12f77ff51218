"""ISI channels with additive white Gaussian noise."""
