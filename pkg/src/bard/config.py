"""Design, timing and run configuration, plus the YAML/JSON config-file
schema shared by the CLI and the simulation engine."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .blrm import BlrmParams
from .boin import BoinParams
from .obd import GatingParams, UtilityTable
from .scenarios import PRESETS, ScenarioTruth
from .stats import BlrmPrior

MODE_BARD = "bard"
MODE_SR = "sr"            # stage-1 data discarded, fresh 1:1 blocks of 2
MODE_PS_FULL = "ps-full"  # stage-1 data discarded, fresh unconditioned minimization
MODES = (MODE_BARD, MODE_SR, MODE_PS_FULL)


class ConfigError(ValueError):
    """Raised for an inconsistent or unparseable configuration; the message
    names the offending field."""


@dataclass(frozen=True)
class TimingModel:
    accrual_rate: float = 3.0      # patients per month
    dlt_window: float = 1.0        # months
    response_window: float = 1.0   # months
    cohort_size: int = 3
    deterministic_accrual: bool = False

    def __post_init__(self):
        if min(self.accrual_rate, self.dlt_window, self.response_window) <= 0:
            raise ConfigError("timing parameters must be positive")
        if self.cohort_size < 1:
            raise ConfigError("cohort_size must be at least 1")


@dataclass(frozen=True)
class DesignConfig:
    engine: str = "boin"  # "boin" | "blrm"
    n_doses: int = 5
    boin: Optional[BoinParams] = field(default_factory=BoinParams)
    blrm: Optional[BlrmParams] = None
    n_cap: int = 12
    n2: int = 40
    r: float = 0.95
    gating: GatingParams = field(default_factory=GatingParams)
    utility: UtilityTable = field(default_factory=UtilityTable)
    dirichlet_prior: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    balance_factors: tuple[int, ...] = (0, 1)  # covariate indices balanced in stage 2
    mode: str = MODE_BARD
    start_dose: int = 0
    queue_when_closed: bool = False  # suspend-accrual alternative to turning patients away

    def __post_init__(self):
        if self.engine not in ("boin", "blrm"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; one of {MODES}")
        if self.engine == "boin" and self.boin is None:
            raise ConfigError("engine 'boin' requires boin parameters")
        if self.engine == "blrm":
            if self.blrm is None:
                raise ConfigError("engine 'blrm' requires blrm parameters")
            if self.blrm.n_doses != self.n_doses:
                raise ConfigError("blrm dosages must match n_doses")
        if not 0 <= self.start_dose < self.n_doses:
            raise ConfigError("start_dose out of range")
        if self.n_cap < 1 or self.n2 < 0:
            raise ConfigError("n_cap must be >= 1 and n2 >= 0")
        if not 0.5 < self.r <= 1.0:
            raise ConfigError("r must lie in (0.5, 1]")

    @property
    def max_n1(self) -> int:
        return self.boin.max_n1 if self.engine == "boin" else self.blrm.max_n1

    @property
    def label(self) -> str:
        if self.mode == MODE_BARD:
            return f"bard-{self.engine}"
        if self.mode == MODE_SR:
            return f"{self.engine}-sr"
        return f"{self.engine}-ps-full"


def default_boin_design(n_doses: int = 5, **overrides) -> DesignConfig:
    boin = overrides.pop("boin", BoinParams())
    return DesignConfig(engine="boin", n_doses=n_doses, boin=boin, **overrides)


def default_blrm_design(**overrides) -> DesignConfig:
    blrm = overrides.pop("blrm", BlrmParams())
    return DesignConfig(engine="blrm", n_doses=blrm.n_doses, blrm=blrm, boin=None, **overrides)


@dataclass(frozen=True)
class RunConfig:
    reps: int = 1000
    seed: int = 0
    parallelism: int = 1
    comparator: str = MODE_BARD

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")
        if self.comparator not in MODES:
            raise ConfigError(f"unknown comparator {self.comparator!r}")


# ---------------------------------------------------------------------------
# Config-file parsing


def _require(mapping: dict, key: str, where: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"missing field {key!r} in {where} block")
    return mapping[key]


def _design_from_dict(d: dict) -> DesignConfig:
    engine = _require(d, "engine", "design")
    common = dict(
        n_cap=d.get("n_cap", 12),
        n2=d.get("n2", 40),
        r=d.get("r", 0.95),
        mode=d.get("mode", MODE_BARD),
        start_dose=d.get("start_dose", 1) - 1,
        queue_when_closed=d.get("queue_when_closed", False),
    )
    if "utility" in d:
        u = d["utility"]
        common["utility"] = UtilityTable(*u)
    if "gating" in d:
        g = d["gating"]
        common["gating"] = GatingParams(
            phi_t=g.get("phi_t", 0.3),
            phi_e=g.get("phi_e", 0.2),
            c_t=g.get("c_t", 0.9),
            c_e=g.get("c_e", 0.95),
            delta=g.get("delta", d.get("delta", 0.05)),
            noninferiority_margin=g.get("noninferiority_margin", True),
        )
    elif "delta" in d:
        common["gating"] = GatingParams(delta=d["delta"])
    if "dirichlet_prior" in d:
        common["dirichlet_prior"] = tuple(d["dirichlet_prior"])
    if "balance_factors" in d:
        common["balance_factors"] = tuple(i - 1 for i in d["balance_factors"])

    if engine == "boin":
        boin = BoinParams(
            phi=d.get("phi", 0.25),
            elimination_cutoff=d.get("elimination_cutoff", 0.95),
            n_stop=d.get("n_stop", 9),
            max_n1=d.get("max_n1", 30),
        )
        return DesignConfig(
            engine="boin", n_doses=d.get("doses", 5), boin=boin, **common
        )
    if engine == "blrm":
        prior = d.get("prior", {})
        blrm = BlrmParams(
            dosages=tuple(_require(d, "dosages", "design")),
            ref_dosage=_require(d, "ref_dosage", "design"),
            gamma1=d.get("gamma1", 0.16),
            gamma2=d.get("gamma2", 0.33),
            eta=d.get("eta", 0.30),
            prior=BlrmPrior(
                mu_alpha=prior.get("mu_alpha", -1.1),
                mu_beta=prior.get("mu_beta", 0.0),
                sigma_alpha=prior.get("sigma_alpha", 2.0),
                sigma_beta=prior.get("sigma_beta", 1.0),
            ),
            max_n1=d.get("max_n1", 30),
            min_mtd_n=d.get("min_mtd_n", 6),
            log_dose=d.get("log_dose", True),
        )
        return DesignConfig(
            engine="blrm", n_doses=len(blrm.dosages), boin=None, blrm=blrm, **common
        )
    raise ConfigError(f"unknown engine {engine!r} in design block")


def _scenario_from_entry(entry) -> ScenarioTruth:
    if isinstance(entry, str):
        if entry not in PRESETS:
            raise ConfigError(f"unknown scenario preset {entry!r}")
        return PRESETS[entry]
    if not isinstance(entry, dict):
        raise ConfigError("scenario must be a preset name or a mapping")
    try:
        return ScenarioTruth(
            name=entry.get("name", "custom"),
            dlt_rates=tuple(_require(entry, "dlt_rates", "scenario")),
            beta0=tuple(_require(entry, "beta0", "scenario")),
            cov_betas=tuple(entry.get("cov_betas", (1.7, -1.5, 0.4))),
            cov_prevalence=tuple(entry.get("cov_prevalence", (0.5, 0.5, 0.5))),
            true_obd=(entry["true_obd"] - 1) if "true_obd" in entry else None,
            true_mtd=(entry["true_mtd"] - 1) if "true_mtd" in entry else None,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario block: {exc}") from exc


def _timing_from_dict(d: dict) -> TimingModel:
    return TimingModel(
        accrual_rate=d.get("accrual_rate", 3.0),
        dlt_window=d.get("dlt_window", 1.0),
        response_window=d.get("response_window", 1.0),
        cohort_size=d.get("cohort_size", 3),
        deterministic_accrual=d.get("deterministic_accrual", False),
    )


@dataclass(frozen=True)
class SimConfig:
    design: DesignConfig
    scenario: ScenarioTruth
    timing: TimingModel
    run: RunConfig


def load_sim_config(path: str | Path) -> SimConfig:
    """Parse a simulation config file (YAML, of which JSON is a subset)."""
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return sim_config_from_dict(raw)


def sim_config_from_dict(raw: dict) -> SimConfig:
    design = _design_from_dict(_require(raw, "design", "top-level"))
    scenario = _scenario_from_entry(_require(raw, "scenario", "top-level"))
    if scenario.n_doses != design.n_doses:
        raise ConfigError(
            f"scenario has {scenario.n_doses} doses but the design has {design.n_doses}"
        )
    timing = _timing_from_dict(raw.get("timing", {}))
    run_block = raw.get("run", {})
    run = RunConfig(
        reps=run_block.get("reps", 1000),
        seed=run_block.get("seed", 0),
        parallelism=run_block.get("parallelism", 1),
        comparator=run_block.get("comparator", MODE_BARD),
    )
    return SimConfig(design=design, scenario=scenario, timing=timing, run=run)


def comparator_designs(design: DesignConfig, mode: str) -> DesignConfig:
    """The same stage-1 engine run under a different stage-2 regime."""
    if mode not in MODES:
        raise ConfigError(f"unknown comparator mode {mode!r}")
    return dataclasses.replace(design, mode=mode)


def design_to_dict(design: DesignConfig) -> dict:
    """Round-trippable design description (the config-file schema)."""
    d: dict = {
        "engine": design.engine,
        "n_cap": design.n_cap,
        "n2": design.n2,
        "r": design.r,
        "mode": design.mode,
        "start_dose": design.start_dose + 1,
        "queue_when_closed": design.queue_when_closed,
        "utility": list(design.utility.as_tuple()),
        "gating": {
            "phi_t": design.gating.phi_t,
            "phi_e": design.gating.phi_e,
            "c_t": design.gating.c_t,
            "c_e": design.gating.c_e,
            "delta": design.gating.delta,
            "noninferiority_margin": design.gating.noninferiority_margin,
        },
        "dirichlet_prior": list(design.dirichlet_prior),
        "balance_factors": [k + 1 for k in design.balance_factors],
    }
    if design.engine == "boin":
        b = design.boin
        d.update(
            doses=design.n_doses,
            phi=b.phi,
            elimination_cutoff=b.elimination_cutoff,
            n_stop=b.n_stop,
            max_n1=b.max_n1,
        )
    else:
        l = design.blrm
        d.update(
            dosages=list(l.dosages),
            ref_dosage=l.ref_dosage,
            gamma1=l.gamma1,
            gamma2=l.gamma2,
            eta=l.eta,
            prior={
                "mu_alpha": l.prior.mu_alpha,
                "mu_beta": l.prior.mu_beta,
                "sigma_alpha": l.prior.sigma_alpha,
                "sigma_beta": l.prior.sigma_beta,
            },
            max_n1=l.max_n1,
            min_mtd_n=l.min_mtd_n,
            log_dose=l.log_dose,
        )
    return d


def design_from_dict(d: dict) -> DesignConfig:
    return _design_from_dict(d)
