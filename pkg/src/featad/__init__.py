"""Feature-space industrial anomaly detection.

Training compacts normal feature maps around an aligned center feature,
synthesizes anomalies along center-to-feature rays with a self-adaptive
length, and refines the decision boundary with a small discriminator.
Inference scores images by the maximum discriminator confidence and
localizes anomalies with an upsampled, smoothed confidence map.
"""

__version__ = "0.1.0"
