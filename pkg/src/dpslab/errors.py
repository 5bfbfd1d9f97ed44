"""Exception hierarchy shared by every module of the toolkit."""


class LabError(Exception):
    """Base class for all toolkit errors."""


class NoRoots(LabError):
    pass


class Diverged(LabError):
    """Root iteration did not converge; ``best`` holds the last iterate."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


class DegenerateLoop(LabError):
    pass


class PoleHit(LabError):
    def __init__(self, pole):
        super().__init__(f"evaluation point {pole!r} is a pole")
        self.pole = pole


class UnstableNorm(LabError):
    pass


class Improper(LabError):
    pass


class BadGains(LabError):
    pass


class PlacementFailed(LabError):
    pass


class BadPartition(LabError):
    pass


class IllPosedLFT(LabError):
    pass


class BadHorizon(LabError):
    pass


class IllPosedLoop(LabError):
    pass


class NoGrowth(LabError):
    pass


class NotUnstable(LabError):
    pass


class NotConverged(LabError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


class DegenerateController(LabError):
    pass


class BadStart(LabError):
    pass


class SearchFailed(LabError):
    pass


class ConfigError(LabError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, msg, field=None, line=None):
        super().__init__(msg)
        self.field = field
        self.line = line


class MissingArtifact(LabError):
    pass
