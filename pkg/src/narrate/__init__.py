"""Open-vocabulary activity description from wearable IMU streams via spectral tokens."""

__version__ = "0.1.0"
