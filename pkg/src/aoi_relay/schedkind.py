from __future__ import annotations

import enum


class SchedulerKind(str, enum.Enum):
    ALOHA = "aloha"
    ORACLE = "oracle"
    MAM = "mam"
    IMAS = "imas"
    B_IMAS = "b-imas"
    ABDR = "abdr"
    B_ABDR = "b-abdr"

    @classmethod
    def parse(cls, value: "SchedulerKind | str") -> "SchedulerKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"alohaforward": "aloha", "aloha-forward": "aloha", "bound": "oracle",
                   "bimas": "b-imas", "babdr": "b-abdr"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown scheduler kind {value!r}; expected one of "
                             f"{', '.join(k.value for k in cls)}") from None

    @property
    def buffered(self) -> bool:
        return self in (SchedulerKind.B_IMAS, SchedulerKind.B_ABDR)

    @property
    def uses_timers(self) -> bool:
        return self in (SchedulerKind.ABDR, SchedulerKind.B_ABDR)

    def __str__(self) -> str:
        return self.value
