"""Experiment configuration read from TOML.

A configuration file has the tables ``[experiment]``, ``[scenario]``,
``[target]`` and optionally ``[prior]`` and ``[certificate]``::

    [experiment]
    scenario_id = "bernoulli-schwartz"
    master_seed = 20240601
    replications = 50
    n_schedule = [25, 50, 100, 200, 300, 400, 500]

    [scenario]
    kind = "bernoulli"
    mesh = 0.01
    theta0 = 0.3

    [target]
    kind = "hellinger_complement"
    radius = 0.2

The raw bytes are kept so that outputs can carry an exact copy.
"""

from dataclasses import dataclass, field
from pathlib import Path

import tomli

from ..exceptions import ConfigurationError

__all__ = ["ExperimentConfig", "load_config", "config_from_dict", "SCENARIO_KINDS",
           "TARGET_KINDS"]

SCENARIO_KINDS = ("bernoulli", "fixed_width", "support_boundary", "normal_location",
                  "uniform_scale")
TARGET_KINDS = ("hellinger_complement", "theta_complement", "atoms")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment configuration.

    Attributes
    ----------
    scenario_id : str
    scenario : dict
        Scenario table; ``kind`` selects the model family.
    prior : dict
    target : dict
        Target-set predicate, e.g. ``{"kind": "hellinger_complement",
        "radius": 0.2}``.
    certificate : dict
        ``enabled`` (default true) plus theorem parameters.
    n_schedule : tuple of int
        Strictly increasing sample sizes.
    replications : int
    master_seed : int
    workers : int
    raw : bytes
        The file exactly as read (empty when built from a dict).
    """

    scenario_id: str
    scenario: dict
    prior: dict
    target: dict
    certificate: dict
    n_schedule: tuple
    replications: int
    master_seed: int
    workers: int = 1
    raw: bytes = field(default=b"", repr=False)

    @property
    def certificate_enabled(self):
        return bool(self.certificate.get("enabled", True))

    def replace(self, **changes):
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data.update(changes)
        return ExperimentConfig(**data)


def _int(value, name, lo):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{name} must be an integer")
    if value < lo:
        raise ConfigurationError(f"{name} must be at least {lo}")
    return value


def config_from_dict(data, raw=b""):
    """Validate a configuration mapping.

    Raises
    ------
    ConfigurationError
        On a missing table, an unknown kind or an invalid schedule.
    """
    try:
        exp = dict(data["experiment"])
        scen = dict(data["scenario"])
        target = dict(data["target"])
    except KeyError as e:
        raise ConfigurationError(f"missing table [{e.args[0]}]") from None
    except (TypeError, ValueError):
        raise ConfigurationError("experiment, scenario and target must be tables") from None
    if scen.get("kind") not in SCENARIO_KINDS:
        raise ConfigurationError(f"scenario kind must be one of {SCENARIO_KINDS}")
    if target.get("kind") not in TARGET_KINDS:
        raise ConfigurationError(f"target kind must be one of {TARGET_KINDS}")
    sched = exp.get("n_schedule")
    if not isinstance(sched, list) or not sched:
        raise ConfigurationError("n_schedule must be a nonempty list")
    sched = tuple(_int(n, "n_schedule entries", 1) for n in sched)
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ConfigurationError("n_schedule must be strictly increasing")
    sid = exp.get("scenario_id", scen["kind"])
    if not isinstance(sid, str) or not sid:
        raise ConfigurationError("scenario_id must be a nonempty string")
    cert = data.get("certificate", {})
    prior = data.get("prior", {})
    if not isinstance(cert, dict) or not isinstance(prior, dict):
        raise ConfigurationError("prior and certificate must be tables")
    return ExperimentConfig(
        scenario_id=sid,
        scenario=scen,
        prior=dict(prior),
        target=target,
        certificate=dict(cert),
        n_schedule=sched,
        replications=_int(exp.get("replications", 1), "replications", 1),
        master_seed=_int(exp.get("master_seed", 0), "master_seed", 0),
        workers=_int(exp.get("workers", 1), "workers", 1),
        raw=bytes(raw),
    )


def load_config(path):
    """Read and validate a TOML configuration file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigurationError(f"cannot read {path}: {e.strerror}") from None
    try:
        data = tomli.loads(raw.decode("utf-8"))
    except (tomli.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"{path}: {e}") from None
    return config_from_dict(data, raw)
