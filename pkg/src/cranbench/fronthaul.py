"""Fronthaul bit rates per intra-PHY functional split and link time budgets.

All rates are returned in Mbps as unrounded floats; rounding to 0.1 Mbps is a
presentation concern (see :func:`format_mbps`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence


class ConfigError(ValueError):
    """Raised for cell or link parameters that violate their invariants."""


class FunctionalSplit(enum.IntEnum):
    FS1 = 1  # RF / PHY: time-domain I/Q (CPRI)
    FS2 = 2  # cyclic prefix removed
    FS3 = 3  # FFT at the DU, frequency-domain I/Q
    FS4 = 4  # RE de-mapping at the DU, only used RBs
    FS5 = 5  # equalization at the DU, antenna streams combined
    FS6 = 6  # demodulation at the DU, soft/hard bits
    FS7 = 7  # channel coding at the DU, information bits only

    @classmethod
    def parse(cls, text: str | int) -> "FunctionalSplit":
        if isinstance(text, int):
            return cls(text)
        t = str(text).strip().upper().replace("-", "").replace("_", "")
        roman = {"I": 1, "II": 2, "III": 3, "IV": 4, "V": 5, "VI": 6, "VII": 7}
        if t.startswith("FS"):
            t = t[2:]
        if t in roman:
            return cls(roman[t])
        try:
            return cls(int(t))
        except ValueError:
            raise ConfigError(f"unknown functional split {text!r}") from None

    @property
    def label(self) -> str:
        return "FS-" + ("I", "II", "III", "IV", "V", "VI", "VII")[self.value - 1]


ALL_SPLITS = tuple(FunctionalSplit)

LTE_BANDWIDTHS_MHZ = (1.4, 3.0, 5.0, 10.0, 15.0, 20.0)

SC_PER_RB = 12
SYMBOLS_PER_SLOT = 7
SLOT_DURATION_US = 500.0

# bandwidth (MHz) -> (N_FFT, N_RB)
_STANDARD_LTE_GRID = {
    1.4: (128, 6),
    3.0: (256, 15),
    5.0: (512, 25),
    10.0: (1024, 50),
    15.0: (1536, 75),
    20.0: (2048, 100),
}

# The published fronthaul table scales the 3 MHz column from 1.4 MHz (12 RB,
# 144 subcarriers) instead of the 15 RB of a standard LTE carrier.
_PUBLISHED_GRID = dict(_STANDARD_LTE_GRID)
_PUBLISHED_GRID[3.0] = (256, 12)

# Nominal chip rate and oversampling factor are listed with the other radio
# symbols but enter no rate formula; kept for reference output only.
NOMINAL_CHIP_RATE_MHZ = 3.84
OVERSAMPLING_FACTOR_TYPICAL = 1.7


@dataclass(frozen=True)
class CellConfig:
    """Radio parameters of one cell/sector.

    ``n_sc`` and ``f_s`` are derived from ``n_rb``, ``n_fft`` and ``bw_sc``
    when left as ``None``.
    """

    bw_cell: float = 20.0
    n_fft: int = 2048
    n_rb: int = 100
    n_sc: int | None = None
    bw_sc_khz: float = 15.0
    m_bits: int = 15
    f_coding: float = 10 / 8
    f_control: float = 16 / 15
    n_ant: int = 2
    rho: float = 0.7
    o_m: int = 6
    code_rate_k: float = 11 / 12
    n_sy_psf: int = 14
    f_s_mhz: float | None = None

    def __post_init__(self) -> None:
        if self.n_sc is None:
            object.__setattr__(self, "n_sc", SC_PER_RB * self.n_rb)
        if self.f_s_mhz is None:
            object.__setattr__(self, "f_s_mhz", self.n_fft * self.bw_sc_khz / 1000.0)
        self.validate()

    def validate(self) -> None:
        if self.bw_cell not in _STANDARD_LTE_GRID:
            raise ConfigError(
                f"unsupported cell bandwidth {self.bw_cell} MHz; "
                f"expected one of {LTE_BANDWIDTHS_MHZ}"
            )
        if self.n_rb < 1 or self.n_fft < 1:
            raise ConfigError("n_rb and n_fft must be positive")
        if self.n_sc != SC_PER_RB * self.n_rb:
            raise ConfigError(f"n_sc={self.n_sc} must equal 12 * n_rb={SC_PER_RB * self.n_rb}")
        if self.n_sc > self.n_fft:
            raise ConfigError(f"n_sc={self.n_sc} exceeds FFT size {self.n_fft}")
        if not math.isclose(self.f_s_mhz, self.n_fft * self.bw_sc_khz / 1000.0, rel_tol=1e-9):
            raise ConfigError(
                f"f_s={self.f_s_mhz} MHz inconsistent with n_fft * bw_sc = "
                f"{self.n_fft * self.bw_sc_khz / 1000.0} MHz"
            )
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError(f"rho={self.rho} outside [0, 1]")
        if self.n_ant < 1:
            raise ConfigError(f"n_ant={self.n_ant} must be >= 1")
        if self.o_m not in (2, 4, 6, 8):
            raise ConfigError(f"modulation order {self.o_m} not in (2, 4, 6, 8)")
        if not 0.0 < self.code_rate_k <= 1.0:
            raise ConfigError(f"code rate {self.code_rate_k} outside (0, 1]")
        for name in ("bw_sc_khz", "m_bits", "n_sy_psf"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("f_coding", "f_control"):
            if getattr(self, name) < 1.0:
                raise ConfigError(f"{name}={getattr(self, name)} is an overhead factor and must be >= 1")

    @property
    def symbol_duration_us(self) -> float:
        """Useful OFDM symbol duration T_s = 1 / BW_sc."""
        return 1000.0 / self.bw_sc_khz

    @property
    def cp_duration_us(self) -> float:
        """Average cyclic-prefix duration over a 7-symbol slot."""
        return (SLOT_DURATION_US - SYMBOLS_PER_SLOT * self.symbol_duration_us) / SYMBOLS_PER_SLOT

    @property
    def useful_slot_duration_us(self) -> float:
        return self.symbol_duration_us * SYMBOLS_PER_SLOT

    def with_(self, **changes) -> "CellConfig":
        """Copy with fields replaced; derived fields are recomputed when the
        fields they depend on change and they were not given explicitly."""
        if ("n_rb" in changes) and "n_sc" not in changes:
            changes["n_sc"] = None
        if ({"n_fft", "bw_sc_khz"} & changes.keys()) and "f_s_mhz" not in changes:
            changes["f_s_mhz"] = None
        return replace(self, **changes)


def _normalize_bw(bw: float | str) -> float:
    try:
        value = float(bw)
    except (TypeError, ValueError):
        raise ConfigError(f"bad bandwidth {bw!r}") from None
    for known in LTE_BANDWIDTHS_MHZ:
        if math.isclose(value, known):
            return known
    raise ConfigError(f"unsupported cell bandwidth {bw} MHz; expected one of {LTE_BANDWIDTHS_MHZ}")


def cell_profile(bw_cell: float | str, *, grid: str = "published", **overrides) -> CellConfig:
    """Default cell parameters for one of the six LTE bandwidths.

    ``grid="published"`` reproduces the published capacity table (12 RB at 3 MHz);
    ``grid="lte"`` uses the standard 15 RB carrier at 3 MHz.
    """
    bw = _normalize_bw(bw_cell)
    if grid == "published":
        table = _PUBLISHED_GRID
    elif grid == "lte":
        table = _STANDARD_LTE_GRID
    else:
        raise ConfigError(f"unknown grid {grid!r}; expected 'published' or 'lte'")
    n_fft, n_rb = table[bw]
    params = dict(bw_cell=bw, n_fft=n_fft, n_rb=n_rb)
    params.update(overrides)
    return CellConfig(**params)


def capacity(split: FunctionalSplit | str | int, cfg: CellConfig) -> float:
    """Required fronthaul bit rate in Mbps for ``split``."""
    if not isinstance(split, FunctionalSplit):
        split = FunctionalSplit.parse(split)
    cfg.validate()
    iq = 2 * cfg.m_bits * cfg.f_coding * cfg.f_control  # bits per complex sample incl. overheads
    if split is FunctionalSplit.FS1:
        return iq * cfg.f_s_mhz * cfg.n_ant
    if split is FunctionalSplit.FS2:
        # N_FFT samples per (T_s + T_CP) microseconds -> Msamples/s
        rate = cfg.n_fft / (cfg.symbol_duration_us + cfg.cp_duration_us)
        return iq * rate * cfg.n_ant
    r3 = iq * cfg.n_sc * cfg.bw_sc_khz / 1000.0 * cfg.n_ant
    if split is FunctionalSplit.FS3:
        return r3
    if split is FunctionalSplit.FS4:
        return r3 * cfg.rho
    if split is FunctionalSplit.FS5:
        return r3 * cfg.rho / cfg.n_ant
    # bits per 1 ms subframe -> kbit/ms = Mbps / 1000
    r6 = cfg.n_sc * cfg.n_sy_psf * cfg.o_m / 1000.0
    if split is FunctionalSplit.FS6:
        return r6
    return r6 * cfg.code_rate_k


def capacity_table(
    cfgs: Sequence[CellConfig], splits: Sequence[FunctionalSplit | str | int]
) -> list[list[float]]:
    """``table[i][j] = capacity(splits[j], cfgs[i])``."""
    if not cfgs:
        raise ConfigError("no cell configurations given")
    if not splits:
        raise ConfigError("no functional splits given")
    parsed = [s if isinstance(s, FunctionalSplit) else FunctionalSplit.parse(s) for s in splits]
    rows = []
    for i, cfg in enumerate(cfgs):
        try:
            rows.append([capacity(s, cfg) for s in parsed])
        except ConfigError as exc:
            raise ConfigError(f"cell #{i}: {exc}") from exc
    return rows


def format_mbps(value: float) -> str:
    return f"{value:.1f}"


# Published fronthaul table in Mbps, rows FS-I..FS-VII, columns 1.4..20 MHz.
# The FS-III / 20 MHz cell is printed as 1140.0; the rate formula (and the
# FS-IV row, which is 0.7 x FS-III) give 1440.0.
PUBLISHED_CAPACITY_TABLE: dict[FunctionalSplit, tuple[float, ...]] = {
    FunctionalSplit.FS1: (153.6, 307.2, 614.4, 1228.8, 1843.2, 2457.6),
    FunctionalSplit.FS2: (143.4, 286.7, 573.4, 1146.9, 1720.3, 2293.8),
    FunctionalSplit.FS3: (86.4, 172.8, 360.0, 720.0, 1080.0, 1140.0),
    FunctionalSplit.FS4: (60.5, 121.0, 252.0, 504.0, 756.0, 1008.0),
    FunctionalSplit.FS5: (30.2, 60.5, 126.0, 252.0, 378.0, 504.0),
    FunctionalSplit.FS6: (6.0, 12.1, 25.2, 50.4, 75.6, 100.8),
    FunctionalSplit.FS7: (5.5, 11.1, 23.1, 46.2, 69.3, 92.4),
}
KNOWN_TABLE_DISCREPANCIES = {(FunctionalSplit.FS3, 20.0): 1440.0}
TABLE_TOLERANCE_MBPS = 0.1


@dataclass(frozen=True)
class TableCheck:
    split: FunctionalSplit
    bw_cell: float
    computed: float
    published: float
    known_discrepancy: bool

    @property
    def delta(self) -> float:
        return self.computed - self.published

    @property
    def matches(self) -> bool:
        return abs(self.delta) <= TABLE_TOLERANCE_MBPS + 1e-9


def check_published_table(
    splits: Sequence[FunctionalSplit] = ALL_SPLITS,
    bandwidths: Sequence[float] = LTE_BANDWIDTHS_MHZ,
) -> list[TableCheck]:
    """Compare computed rates with the published table (pure comparison)."""
    out = []
    for bw in bandwidths:
        bw = _normalize_bw(bw)
        cfg = cell_profile(bw, grid="published")
        col = LTE_BANDWIDTHS_MHZ.index(bw)
        for split in splits:
            out.append(
                TableCheck(
                    split=split,
                    bw_cell=bw,
                    computed=capacity(split, cfg),
                    published=PUBLISHED_CAPACITY_TABLE[split][col],
                    known_discrepancy=(split, bw) in KNOWN_TABLE_DISCREPANCIES,
                )
            )
    return out


# Fibre propagation at the 7 us/km figure reproduces the published 40 km
# example (280 us); 2.1e8 m/s corresponds to ~4.76 us/km.
DEFAULT_US_PER_KM = 7.0
FIBRE_SPEED_US_PER_KM = 1e3 / 2.1e8 * 1e6  # 1 km at 2.1e8 m/s, in us
DEFAULT_US_PER_HOP = 50.0
DL_DEADLINE_US = 1000.0
UL_DEADLINE_US = 2000.0


@dataclass(frozen=True)
class LinkBudget:
    distance_km: float = 0.0
    hops: int = 0
    per_hop_latency_us: float = DEFAULT_US_PER_HOP
    per_km_latency_us: float = DEFAULT_US_PER_KM
    ran_deadline_us: float = DL_DEADLINE_US

    def __post_init__(self) -> None:
        for name in ("distance_km", "hops", "per_hop_latency_us", "per_km_latency_us"):
            value = getattr(self, name)
            if value < 0 or not math.isfinite(value):
                raise ConfigError(f"{name}={value} must be a finite non-negative number")
        if not self.ran_deadline_us > 0:
            raise ConfigError(f"ran_deadline_us={self.ran_deadline_us} must be positive")


@dataclass(frozen=True)
class ProcessingBudget:
    transmission_us: float
    remaining_us: float
    deadline_us: float
    feasible: bool = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "feasible", self.remaining_us >= 0)


def transmission_time(budget: LinkBudget) -> float:
    """One-way fronthaul transmission time in microseconds."""
    return budget.distance_km * budget.per_km_latency_us + budget.hops * budget.per_hop_latency_us


def remaining_processing_budget(budget: LinkBudget) -> ProcessingBudget:
    """Time left for BBU processing; negative ``remaining_us`` means infeasible."""
    tx = transmission_time(budget)
    return ProcessingBudget(
        transmission_us=tx,
        remaining_us=budget.ran_deadline_us - tx,
        deadline_us=budget.ran_deadline_us,
    )


def exact_capacity(split: FunctionalSplit, cfg: CellConfig) -> Fraction:
    """Rational evaluation of the rate formulas (independent of :func:`capacity`).

    Used as a cross-check; inputs are converted with ``Fraction.limit_denominator``.
    """
    F = lambda x: Fraction(x).limit_denominator(10**6)  # noqa: E731
    iq = 2 * F(cfg.m_bits) * F(cfg.f_coding) * F(cfg.f_control)
    t_s = 1000 / F(cfg.bw_sc_khz)
    t_cp = (F(SLOT_DURATION_US) - SYMBOLS_PER_SLOT * t_s) / SYMBOLS_PER_SLOT
    values = {
        FunctionalSplit.FS1: iq * cfg.n_fft * F(cfg.bw_sc_khz) / 1000 * cfg.n_ant,
        FunctionalSplit.FS2: iq * cfg.n_fft / (t_s + t_cp) * cfg.n_ant,
        FunctionalSplit.FS3: iq * cfg.n_sc * F(cfg.bw_sc_khz) / 1000 * cfg.n_ant,
    }
    values[FunctionalSplit.FS4] = values[FunctionalSplit.FS3] * F(cfg.rho)
    values[FunctionalSplit.FS5] = values[FunctionalSplit.FS4] / cfg.n_ant
    values[FunctionalSplit.FS6] = Fraction(cfg.n_sc * cfg.n_sy_psf * cfg.o_m, 1000)
    values[FunctionalSplit.FS7] = values[FunctionalSplit.FS6] * F(cfg.code_rate_k)
    return values[split]
