"""Country registry and goods-category table.

The registry fixes the index space every matrix and vector in the package
lives in: N slots, the last of which is a dummy that absorbs trade whose
destination is undeclared.  The category table fixes the C goods categories
(six-digit HS codes) that carry phosphate and their aggregation into five
parent groups.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .errors import MissingFileError, UnknownCategoryError, UnknownCountryError

DUMMY_CODE = "XUN"
DUMMY_NAME = "Undeclared destinations"

PARENT_GROUPS = (
    "phosphate rock",
    "phosphoric acid",
    "phosphates",
    "phosphatic fertilizers",
    "mixed fertilizers",
)

# (hs6, parent group, label); ascending HS6 order.
CANONICAL_CATEGORIES = (
    ("251010", "phosphate rock", "Natural calcium phosphates, unground"),
    ("251020", "phosphate rock", "Natural calcium phosphates, ground"),
    ("280910", "phosphoric acid", "Diphosphorus pentaoxide"),
    ("280920", "phosphoric acid", "Phosphoric acid and polyphosphoric acids"),
    ("283510", "phosphates", "Phosphinates and phosphonates"),
    ("283521", "phosphates", "Phosphates of triammonium"),
    ("283522", "phosphates", "Phosphates of mono- or disodium"),
    ("283523", "phosphates", "Phosphates of trisodium"),
    ("283524", "phosphates", "Phosphates of potassium"),
    ("283525", "phosphates", "Calcium hydrogenorthophosphate"),
    ("283526", "phosphates", "Other phosphates of calcium"),
    ("283529", "phosphates", "Other phosphates"),
    ("283531", "phosphates", "Sodium triphosphate"),
    ("283539", "phosphates", "Other polyphosphates"),
    ("310310", "phosphatic fertilizers", "Superphosphates"),
    ("310320", "phosphatic fertilizers", "Basic slag"),
    ("310390", "phosphatic fertilizers", "Other phosphatic mineral fertilizers"),
    ("310510", "mixed fertilizers", "Fertilizers in tablets or small packages"),
    ("310520", "mixed fertilizers", "Mineral fertilizers containing N, P and K"),
    ("310530", "mixed fertilizers", "Diammonium hydrogenorthophosphate (DAP)"),
    ("310540", "mixed fertilizers", "Ammonium dihydrogenorthophosphate (MAP)"),
    ("310551", "mixed fertilizers", "Fertilizers with nitrates and phosphates"),
    ("310559", "mixed fertilizers", "Other fertilizers containing N and P"),
    ("310560", "mixed fertilizers", "Fertilizers containing P and K"),
    ("310590", "mixed fertilizers", "Other mixed fertilizers"),
)

# ISO-3166 alpha-3 codes of the 27 EU members, used for diagram groupings.
EU27 = (
    "AUT", "BEL", "BGR", "HRV", "CYP", "CZE", "DNK", "EST", "FIN",
    "FRA", "DEU", "GRC", "HUN", "IRL", "ITA", "LVA", "LTU", "LUX",
    "MLT", "NLD", "POL", "PRT", "ROU", "SVK", "SVN", "ESP", "SWE",
)


@dataclass(frozen=True)
class CountryEntry:
    slot: int
    code: str
    name: str
    is_dummy: bool = False


class CountryRegistry:
    """Ordered set of country slots; exactly one slot is the dummy."""

    def __init__(self, entries: list[CountryEntry]):
        if not entries:
            raise ValueError("registry needs at least one country")
        codes = [e.code for e in entries]
        if len(set(codes)) != len(codes):
            raise ValueError("country codes must be unique")
        if [e.slot for e in entries] != list(range(len(entries))):
            raise ValueError("slot indices must be contiguous from 0")
        dummies = [e for e in entries if e.is_dummy]
        if len(dummies) != 1:
            raise ValueError("registry must contain exactly one dummy slot")
        self.entries = tuple(entries)
        self._by_code = {e.code: e.slot for e in entries}
        self.dummy_slot = dummies[0].slot

    @classmethod
    def from_codes(
        cls,
        codes: list[str],
        names: dict[str, str] | None = None,
        dummy_code: str = DUMMY_CODE,
        dummy_name: str = DUMMY_NAME,
    ) -> "CountryRegistry":
        """Build a registry from real-country codes; the dummy is appended."""
        names = names or {}
        entries = [
            CountryEntry(i, c.strip().upper(), names.get(c, c.strip().upper()))
            for i, c in enumerate(codes)
        ]
        entries.append(CountryEntry(len(entries), dummy_code, dummy_name, is_dummy=True))
        return cls(entries)

    @classmethod
    def from_csv(cls, path) -> "CountryRegistry":
        """Read countries.csv with columns ``code,name`` (header required)."""
        try:
            fh = open(path, newline="", encoding="utf-8")
        except FileNotFoundError:
            raise MissingFileError(f"country file not found: {path}") from None
        with fh:
            reader = csv.DictReader(fh)
            codes, names = [], {}
            for row in reader:
                code = (row.get("code") or "").strip().upper()
                if not code:
                    continue
                codes.append(code)
                names[code] = (row.get("name") or code).strip()
        return cls.from_codes(codes, names)

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def codes(self) -> list[str]:
        return [e.code for e in self.entries]

    def slot_of(self, code: str) -> int:
        try:
            return self._by_code[code.strip().upper()]
        except KeyError:
            raise UnknownCountryError(f"unknown country code: {code!r}") from None

    def __contains__(self, code: str) -> bool:
        return code.strip().upper() in self._by_code

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class GoodsCategory:
    hs6: str
    group: str
    label: str


@dataclass(frozen=True)
class GoodsCategoryTable:
    """Ordered goods categories; axis 0 of every trade tensor follows it."""

    categories: tuple[GoodsCategory, ...]
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        codes = [c.hs6 for c in self.categories]
        if len(set(codes)) != len(codes):
            raise ValueError("duplicate HS6 code in category table")
        if codes != sorted(codes):
            raise ValueError("categories must be in ascending HS6 order")
        for c in self.categories:
            if c.group not in PARENT_GROUPS:
                raise ValueError(f"unknown parent group: {c.group!r}")
        object.__setattr__(self, "_index", {c.hs6: i for i, c in enumerate(self.categories)})

    @classmethod
    def default(cls) -> "GoodsCategoryTable":
        """The canonical 25-category table."""
        return cls(tuple(GoodsCategory(*row) for row in CANONICAL_CATEGORIES))

    @property
    def n(self) -> int:
        return len(self.categories)

    @property
    def codes(self) -> list[str]:
        return [c.hs6 for c in self.categories]

    def index_of(self, hs6: str) -> int:
        try:
            return self._index[hs6.strip()]
        except KeyError:
            raise UnknownCategoryError(f"unknown HS6 code: {hs6!r}") from None

    def subset(self, count: int) -> "GoodsCategoryTable":
        """First ``count`` categories; used by synthetic worlds."""
        if not 1 <= count <= self.n:
            raise ValueError(f"subset size {count} out of range")
        return GoodsCategoryTable(self.categories[:count])

    def groups_of(self, group: str) -> list[str]:
        return [c.hs6 for c in self.categories if c.group == group]

    def __contains__(self, hs6: str) -> bool:
        return hs6.strip() in self._index

    def __len__(self) -> int:
        return self.n
