from enum import Enum
from typing import NamedTuple, Optional


class GenderLabel(str, Enum):
    MALE = "Male"
    FEMALE = "Female"
    NEUTRAL = "Neutral"
    DISCARDED = "Discarded"
    OTHER = "Other"

    def __str__(self):
        return self.value

    @property
    def short(self):
        return self.value[0]


class DiscardReason(str, Enum):
    MIXED = "mixed"
    NO_PERSON = "no-person"

    def __str__(self):
        return self.value


class Verdict(NamedTuple):
    """A label plus the reason when the label is ``Discarded``."""

    label: GenderLabel
    reason: Optional[DiscardReason] = None

    def __str__(self):
        if self.reason is None:
            return self.label.value
        return f"{self.label.value}({self.reason.value})"


GROUPS = (GenderLabel.MALE, GenderLabel.FEMALE, GenderLabel.NEUTRAL)
GROUP_NAMES = tuple(g.value for g in GROUPS)
GROUP_INDEX = {g: i for i, g in enumerate(GROUPS)}


def parse_label(value):
    """Accept ``GenderLabel``, full names (any case) or the M/F/N/O/D initials."""
    if isinstance(value, GenderLabel):
        return value
    s = str(value).strip()
    for label in GenderLabel:
        if s.lower() == label.value.lower() or s.upper() == label.short:
            return label
    raise ValueError(f"unknown gender label {value!r}")
