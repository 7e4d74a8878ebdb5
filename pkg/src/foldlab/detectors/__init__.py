from .base import Detector, ModelHandle, TrainRequest, TrainStep
from .external import ExternalDetector
from .mock import MockDetector, MockScript
from .template_pool import TemplatePoolDetector

__all__ = [
    "Detector",
    "ModelHandle",
    "TrainRequest",
    "TrainStep",
    "ExternalDetector",
    "MockDetector",
    "MockScript",
    "TemplatePoolDetector",
]
