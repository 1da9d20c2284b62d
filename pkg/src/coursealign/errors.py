"""Exception types shared across the package.

Every domain failure raised by this package derives from CourseAlignError and
carries a stable ``code`` string suitable for machine-readable CLI/HTTP error
payloads.
"""
from __future__ import annotations

__all__ = [
    "CourseAlignError",
    "DuplicateIdError",
    "UnknownInstitutionError",
    "MalformedRowError",
    "UnknownCourseError",
    "SelfPairError",
    "EmptyInputError",
    "TooFewPairsError",
    "DimensionMismatchError",
    "DuplicateCourseError",
    "EmptyCorpusError",
    "DisjointKeysError",
    "ZeroVectorError",
    "NotNormalizedError",
    "MissingEmbeddingError",
    "NoPairsError",
    "RankDeficientError",
    "EmptyPoolError",
    "InsufficientPopulationError",
    "EmptyScoresError",
    "EmptyGroupError",
    "MixedDimensionsError",
    "CoverageMismatchError",
    "ModelFormatError",
    "DecisionExistsError",
    "ChoiceNotInScenarioError",
    "UnknownScenarioError",
    "IoError",
]


class CourseAlignError(Exception):
    """Base class for all domain errors raised by this package."""

    code = "Error"

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DuplicateIdError(CourseAlignError):
    code = "DuplicateId"


class UnknownInstitutionError(CourseAlignError):
    code = "UnknownInstitution"


class MalformedRowError(CourseAlignError):
    code = "MalformedRow"

    def __init__(self, detail: str, line: int | None = None):
        if line is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail)
        self.line = line


class UnknownCourseError(CourseAlignError):
    code = "UnknownCourse"


class SelfPairError(CourseAlignError):
    code = "SelfPair"


class EmptyInputError(CourseAlignError):
    code = "EmptyInput"


class TooFewPairsError(CourseAlignError):
    code = "TooFewPairs"


class DimensionMismatchError(CourseAlignError):
    code = "DimensionMismatch"


class DuplicateCourseError(CourseAlignError):
    code = "DuplicateCourse"


class EmptyCorpusError(CourseAlignError):
    code = "EmptyCorpus"


class DisjointKeysError(CourseAlignError):
    code = "DisjointKeys"


class ZeroVectorError(CourseAlignError):
    code = "ZeroVector"


class NotNormalizedError(CourseAlignError):
    code = "NotNormalized"


class MissingEmbeddingError(CourseAlignError):
    code = "MissingEmbedding"


class NoPairsError(CourseAlignError):
    code = "NoPairs"


class RankDeficientError(CourseAlignError):
    code = "RankDeficient"


class EmptyPoolError(CourseAlignError):
    code = "EmptyPool"


class InsufficientPopulationError(CourseAlignError):
    code = "InsufficientPopulation"


class EmptyScoresError(CourseAlignError):
    code = "EmptyScores"


class EmptyGroupError(CourseAlignError):
    code = "EmptyGroup"


class MixedDimensionsError(CourseAlignError):
    code = "MixedDimensions"


class CoverageMismatchError(CourseAlignError):
    code = "CoverageMismatch"


class ModelFormatError(CourseAlignError):
    code = "ModelFormat"


class DecisionExistsError(CourseAlignError):
    code = "DecisionExists"


class ChoiceNotInScenarioError(CourseAlignError):
    code = "ChoiceNotInScenario"


class UnknownScenarioError(CourseAlignError):
    code = "UnknownScenario"


class IoError(CourseAlignError):
    code = "Io"
