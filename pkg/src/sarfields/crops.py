"""Crop season calendar: per-crop extraction windows with cross-year offsets.

The reference year is the harvest/season year: a start offset of -1 means
the window opens in the preceding calendar year (winter crops), an end
offset of +1 that it closes in the following one.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass


class UnknownCropError(ValueError):
    pass


@dataclass(frozen=True)
class CropSeason:
    lpis_name: str  # Danish LPIS entry; empty for the catch-all row
    english_name: str
    start_month_day: tuple[int, int]
    start_year_offset: int
    end_month_day: tuple[int, int]
    end_year_offset: int

    def window(self, year: int) -> tuple[dt.date, dt.date]:
        start = dt.date(year + self.start_year_offset, *self.start_month_day)
        end = dt.date(year + self.end_year_offset, *self.end_month_day)
        return start, end


CROP_SEASONS: tuple[CropSeason, ...] = (
    CropSeason("", "All", (1, 1), 0, (12, 31), 0),
    CropSeason("Majs", "Corn", (3, 15), 0, (11, 15), 0),
    CropSeason("Vårbyg", "Spring barley", (3, 1), 0, (9, 1), 0),
    CropSeason("Sukkerroer", "Sugar beat", (4, 1), 0, (2, 1), 1),
    CropSeason("Våraps", "Spring rape", (3, 1), 0, (10, 1), 0),
    CropSeason("Vinterraps", "Winter rapeseed", (7, 1), -1, (8, 1), 0),
    CropSeason("Vinterhvede", "Winter wheat", (8, 15), -1, (10, 1), 0),
)

_BY_NAME = {}
for _season in CROP_SEASONS:
    _BY_NAME[_season.english_name.casefold()] = _season
    if _season.lpis_name:
        _BY_NAME[_season.lpis_name.casefold()] = _season


def list_crops() -> list[CropSeason]:
    return list(CROP_SEASONS)


def find_crop(name: str) -> CropSeason:
    """Case-insensitive lookup by English or Danish name."""
    season = _BY_NAME.get(name.casefold())
    if season is None:
        known = ", ".join(s.english_name for s in CROP_SEASONS)
        raise UnknownCropError(f"unknown crop {name!r}; known crops: {known}")
    return season


def season_window(crop: str, year: int) -> tuple[dt.date, dt.date]:
    """Resolved (start, end) dates of the crop's extraction window."""
    if not 1970 <= year <= 2100:
        raise ValueError(f"reference year {year} outside supported range 1970..2100")
    return find_crop(crop).window(year)
