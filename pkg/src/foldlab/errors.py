"""Exception hierarchy shared across foldlab modules."""


class FoldlabError(Exception):
    """Base class for all foldlab errors."""


class InvalidArgument(FoldlabError):
    pass


class SamplingExhausted(FoldlabError):
    """Rejection sampling failed to find a valid configuration."""


class EmptyProjection(FoldlabError):
    """The projected object covers no pixels."""


class EmptyMask(FoldlabError):
    pass


class PlacementImpossible(FoldlabError):
    pass


class AssetMissing(FoldlabError):
    pass


class ParseError(FoldlabError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyEvaluation(FoldlabError):
    pass


class UndefinedClass(FoldlabError):
    """AP requested for a class with no ground truth."""


class DetectorUnavailable(FoldlabError):
    pass


class ModelCorrupt(FoldlabError):
    pass


class AdapterProtocolError(FoldlabError):
    pass
