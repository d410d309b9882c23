"""Exception types shared across the package."""


class HinError(Exception):
    """Base class for all data and validation errors raised by hinfraud."""


class SchemaMismatch(HinError):
    pass


class UnknownNodeId(HinError):
    def __init__(self, link: str, node_id: str):
        super().__init__(f"link {link!r} references unknown node id {node_id!r}")
        self.link = link
        self.node_id = node_id


class CardinalityViolation(HinError):
    def __init__(self, link: str, row: int):
        super().__init__(f"link {link!r} declared to-one but row {row} has several targets")
        self.link = link
        self.row = row


class UnknownLink(HinError, KeyError):
    pass


class EndTypeMismatch(HinError):
    pass


class OracleCapExceeded(HinError):
    pass


class SingleClassTrainingSet(HinError):
    pass


class NonFiniteFeature(HinError):
    pass


class ShapeMismatch(HinError):
    pass


class LengthMismatch(HinError):
    pass


class BaselineZero(HinError):
    pass


class DegenerateGroup(HinError):
    pass


class InsufficientSpan(HinError):
    pass


class ConfigInvalid(HinError):
    pass


class EmptyTestSet(HinError):
    pass


class NonConvergenceWarning(UserWarning):
    pass
