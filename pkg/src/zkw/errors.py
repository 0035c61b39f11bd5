"""Exception types shared across the workbench."""


class ZKWError(Exception):
    pass


class LatticeMismatch(ZKWError):
    pass


class TruncationExceeded(ZKWError):
    pass


class ScaleMismatch(ZKWError):
    pass


class HypothesisViolated(ZKWError):
    pass


class DegenerateTransversality(ZKWError):
    pass


class GridTooCoarse(ZKWError):
    pass


class StepTooLarge(ZKWError):
    pass


class NotRealData(ZKWError):
    pass


class ConfigInvalid(ZKWError):
    pass


class ManifestMismatch(ZKWError):
    pass
