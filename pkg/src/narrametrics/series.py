"""Date-indexed daily series, the exchange type between analysis stages."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from typing import Iterator


@dataclass
class DailySeries:
    """Numeric values keyed by UTC calendar day.

    ``counts`` records how many underlying observations produced each day's
    value (message counts for aggregates, 1 for externally loaded series).
    Days carry no implicit zeros: absence of a key means absence of data.
    """

    values: dict[date, float] = field(default_factory=dict)
    counts: dict[date, int] = field(default_factory=dict)

    def days(self) -> list[date]:
        return sorted(self.values)

    def items(self) -> Iterator[tuple[date, float]]:
        for d in self.days():
            yield d, self.values[d]

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, d: date) -> bool:
        return d in self.values

    def span(self) -> tuple[date, date]:
        """First and last day with data. Raises DataError when empty."""
        from narrametrics.errors import DataError

        if not self.values:
            raise DataError("empty series has no span")
        days = self.days()
        return days[0], days[-1]
