"""Exception hierarchy shared by every stage of the pipeline."""


class HitchinError(Exception):
    """Base class; ``stage`` is filled in by the orchestrator."""

    stage = None


class PunctureMismatch(HitchinError):
    pass


class NotAUnit(HitchinError):
    pass


class NotASquare(HitchinError):
    pass


class WindowTooSmall(HitchinError):
    """A coefficient outside the certified window was requested."""


class NotSquarefree(HitchinError):
    pass


class BadDegree(HitchinError):
    pass


class LeadingNotSquare(HitchinError):
    pass


class GenusTooSmall(HitchinError):
    pass


class BothForms(HitchinError):
    pass


class NotTransversal(HitchinError):
    pass


class DualityFailure(HitchinError):
    pass


class SearchExhausted(HitchinError):
    pass


class SingularSystem(HitchinError):
    pass


class PoleBoundTooSmall(HitchinError):
    pass


class DepthExceeded(HitchinError):
    pass


class NotInnerOuter(HitchinError):
    pass


class JetOrderTooLow(HitchinError):
    pass


class SchemaMismatch(HitchinError):
    pass


class ParseError(HitchinError):
    pass


class ConfigError(HitchinError):
    pass
