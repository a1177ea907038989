"""Generalised LAVA estimation and GCM edge testing under latent confounding."""
