"""Exception hierarchy.

Every error raised on bad input derives from :class:`InputError` so the CLI can
map it to exit code 2 without enumerating cases.
"""

from __future__ import annotations


class SpineEvalError(Exception):
    """Base class for all harness errors."""


class InputError(SpineEvalError, ValueError):
    """Input data violates a contract. ``line`` is the 1-based file line, if known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownLabel(InputError):
    def __init__(self, raw: str, line: int | None = None):
        self.raw = raw
        super().__init__(f"unknown label {raw!r}", line)


class NoFindingNotMappable(InputError):
    def __init__(self):
        super().__init__("'No finding' has no box-level detection class")


class InvalidBox(InputError):
    """One or more boxes of a record are invalid.

    ``problems`` holds every ``(box_index, reason)`` pair found, not just the first.
    """

    def __init__(self, problems: list[tuple[int, str]], line: int | None = None,
                 image_id: str | None = None):
        self.problems = list(problems)
        self.image_id = image_id
        detail = "; ".join(f"box {i}: {reason}" for i, reason in self.problems)
        prefix = f"image {image_id!r}: " if image_id is not None else ""
        super().__init__(f"{prefix}invalid box(es): {detail}", line)


class InvalidRecord(InputError):
    pass


class DuplicateImageId(InputError):
    def __init__(self, image_id: str, line: int | None = None):
        self.image_id = image_id
        super().__init__(f"duplicate image_id {image_id!r}", line)


class MalformedJson(InputError):
    pass


class ScoreOutOfRange(InputError):
    pass


class ConfidenceOutOfRange(InputError):
    pass


class UnknownImage(InputError):
    pass


class MissingPrediction(InputError):
    def __init__(self, image_id: str):
        self.image_id = image_id
        super().__init__(f"no prediction for annotated image {image_id!r}")


class MissingClassifierScore(InputError):
    def __init__(self, image_id: str):
        self.image_id = image_id
        super().__init__(f"no classifier score for image {image_id!r}")


class MismatchedImageSets(InputError):
    pass


class EmptyEnsemble(InputError):
    pass


class EmptyDataset(InputError):
    pass


class EmptyData(InputError):
    pass


class InvalidFraction(InputError):
    pass


class DegenerateBox(InputError):
    pass


class MixedClasses(InputError):
    pass


class MixedImages(InputError):
    pass


class UndefinedMetric(InputError):
    """A metric has no value on the given data."""


class SingleClassOnly(UndefinedMetric):
    def __init__(self, message: str = "both classes must be present"):
        super().__init__(message)


class NoGroundTruth(UndefinedMetric):
    def __init__(self, message: str = "average precision is undefined without ground-truth boxes"):
        super().__init__(message)


class AllResamplesDegenerate(UndefinedMetric):
    pass
