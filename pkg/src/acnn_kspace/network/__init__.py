"""ACNN-k-Space network, baselines, training and reconstruction."""
