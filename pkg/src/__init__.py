"""hunet - attention-gated U-Net lung-infection segmentation with the Bi-category Hybrid loss."""
