import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from conventions import linear_to_db


class Policy(Enum):
    """Politiques de sélection de relais."""
    BARS = "bars"
    CSI = "csi"
    BENCHMARK = "benchmark"
    RANDOM = "random"

    @classmethod
    def parse(cls, text: str) -> "Policy":
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise ValueError(f"Politique inconnue '{text}' (attendu: {names})") from None


class Action(Enum):
    FORWARD = "forward"
    HARVEST = "harvest"


class Mode(Enum):
    """Mode de calcul d'une expérience."""
    SIM = "sim"
    DTMC_PRODUCT = "dtmc-product"
    DTMC_MC = "dtmc-mc"
    DTMC_MARGINAL = "dtmc-marginal"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"Mode inconnu '{text}' (attendu: {names})") from None

    @property
    def is_analytic(self) -> bool:
        return self is not Mode.SIM


@dataclass(frozen=True)
class SystemParams:
    """
    Constantes d'un scénario (N relais, L niveaux de batterie, ...).
    Durée d'un slot normalisée à 1: énergie et puissance sont interchangeables.
    """
    n_relays: int
    levels: int
    rate: float
    source_power: float
    noise_power: float
    kappa: float
    alpha: float
    mean_g: tuple[float, ...]
    mean_h: tuple[float, ...]

    def __post_init__(self):
        if self.n_relays < 1:
            raise ValueError(f"n_relays doit être >= 1 (reçu {self.n_relays})")
        if self.levels < 1:
            raise ValueError(f"levels doit être >= 1 (reçu {self.levels})")
        for name in ("rate", "source_power", "noise_power", "kappa", "alpha"):
            value = getattr(self, name)
            if not math.isfinite(value):
                key = "noise" if name == "noise_power" else name
                raise ValueError(f"{key} doit être fini (reçu {value})")
        if self.rate < 0:
            raise ValueError(f"rate doit être >= 0 (reçu {self.rate})")
        if self.source_power <= 0:
            raise ValueError(f"source_power doit être > 0 (reçu {self.source_power})")
        if self.noise_power <= 0:
            raise ValueError(f"noise doit être > 0 (reçu {self.noise_power})")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa doit être dans [0, 1] (reçu {self.kappa})")
        if self.alpha <= 0:
            raise ValueError(f"alpha doit être > 0 (reçu {self.alpha})")
        # tuples pour rester hashable (cache des bornes de niveaux)
        object.__setattr__(self, "mean_g", tuple(float(x) for x in self.mean_g))
        object.__setattr__(self, "mean_h", tuple(float(x) for x in self.mean_h))
        for name in ("mean_g", "mean_h"):
            means = getattr(self, name)
            if len(means) != self.n_relays:
                raise ValueError(f"{name} doit avoir {self.n_relays} valeurs (reçu {len(means)})")
            if any(not math.isfinite(m) for m in means):
                raise ValueError(f"{name}: toutes les moyennes doivent être finies")
            if any(not m > 0 for m in means):
                raise ValueError(f"{name}: toutes les moyennes doivent être > 0")

    @property
    def threshold(self) -> float:
        """Seuil de décodage T = 2^(2R) - 1."""
        return 2.0 ** (2.0 * self.rate) - 1.0

    @property
    def capacity(self) -> float:
        """Capacité batterie B = alpha * P."""
        return self.alpha * self.source_power

    @property
    def decode_gain(self) -> float:
        """Gain minimal g pour décoder: T * N0 / P."""
        return self.threshold * self.noise_power / self.source_power

    @property
    def snr_db(self) -> float:
        return linear_to_db(self.source_power / self.noise_power)

    @property
    def n_states(self) -> int:
        return (self.levels + 2) ** self.n_relays


@dataclass(frozen=True)
class ChannelDraw:
    """Gains de puissance d'un slot: g (source→relais), h (relais→destination)."""
    g: Sequence[float]
    h: Sequence[float]


@dataclass(frozen=True)
class SlotOutcome:
    selected: Optional[int]
    outage: bool
    actions: tuple[Action, ...]

    @property
    def forwarder(self) -> Optional[int]:
        if self.outage:
            return None
        return self.selected

    @property
    def n_harvesting(self) -> int:
        return sum(1 for a in self.actions if a is Action.HARVEST)


@dataclass(frozen=True)
class SimConfig:
    params: SystemParams
    policy: Policy = Policy.BARS
    slots: int = 1_000_000
    warmup_slots: int = 0
    seed: int = 1
    initial_level: Optional[int] = None  # None => batterie pleine (L+1)
    continuous_battery: bool = False

    def __post_init__(self):
        if self.slots < 1:
            raise ValueError(f"slots doit être >= 1 (reçu {self.slots})")
        if self.warmup_slots < 0:
            raise ValueError(f"warmup_slots doit être >= 0 (reçu {self.warmup_slots})")
        if self.warmup_slots >= self.slots:
            raise ValueError(
                f"warmup_slots ({self.warmup_slots}) doit être < slots ({self.slots})"
            )
        if not 0 <= self.start_level <= self.params.levels + 1:
            raise ValueError(
                f"initial_level doit être dans [0, {self.params.levels + 1}] (reçu {self.initial_level})"
            )

    @property
    def start_level(self) -> int:
        if self.initial_level is None:
            return self.params.levels + 1
        return self.initial_level

    @property
    def counted_slots(self) -> int:
        return self.slots - self.warmup_slots


@dataclass(frozen=True)
class OutageEstimate:
    p_out: float
    std_err: float
    ci_low: float
    ci_high: float
    counted_slots: int
    seed: int
    outages: int = 0
    occupancy: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class JointState:
    levels: tuple[int, ...]
    flat_index: int


@dataclass(frozen=True)
class TransitionMatrix:
    """Matrice de transition stochastique (par lignes)."""
    entries: np.ndarray
    mode: str  # "per-relay" | "product-form" | "mc-joint"

    def __post_init__(self):
        p = np.asarray(self.entries, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"Matrice carrée attendue (reçu shape {p.shape})")
        if np.any(p < 0) or np.any(p > 1.0 + 1e-12):
            raise ValueError("Entrées hors de [0, 1]")
        if not np.allclose(p.sum(axis=1), 1.0, rtol=0.0, atol=1e-9):
            raise ValueError("Lignes non stochastiques (somme != 1)")
        object.__setattr__(self, "entries", p)

    @property
    def order(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SteadyState:
    pi: np.ndarray
    residual: float


@dataclass(frozen=True)
class ExperimentConfig:
    sim: SimConfig
    mode: Mode = Mode.SIM
    sweep_axis: Optional[str] = None
    sweep_values: tuple = ()
    out: Optional[str] = None
    mc_samples_per_state: int = 100_000
    workers: Optional[int] = None
    state_cap: int = 65_536
    dump_matrix: Optional[str] = None
    printed_matrix: Optional[str] = None
    replicas: int = 1

    @property
    def params(self) -> SystemParams:
        return self.sim.params

    @property
    def policy(self) -> Policy:
        return self.sim.policy
