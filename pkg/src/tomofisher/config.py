# coding=utf-8
"""
config contains the RunConfig class, which holds everything needed to reproduce
a run, and the ConfigFile class, which reads flat key/value configuration files.
"""

import datetime
import logging
import os
import re
from pathlib import Path

from . import options
from .options import ConfigError

OUTPUT_DIR_VARIABLE = "TOMOFISHER_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "tomofisher-output"

logger = logging.getLogger("tomofisher")

_SEPARATOR = re.compile(r"\s*=\s*|\s+")


def default_output_dir():
    return os.environ.get(OUTPUT_DIR_VARIABLE) or DEFAULT_OUTPUT_DIR


def current_timestamp():
    return datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class ConfigFile:
    """
    ConfigFile is a read-only mapping from parameter names to their text values,
    read from one "key value" or "key = value" pair per line.  Keys are normalised
    to underscores.  Text after # is a comment.
    """

    def __init__(self, path):
        """
        Create a new ConfigFile

        :param path: Path to an existing configuration file
        """
        self._path = Path(path)

    def __getitem__(self, name):
        """ Get self[name] """
        return self._read()[options.normalize_name(name)]

    def __iter__(self):
        """ Implement iter(self). """
        yield from self._read().items()

    def __len__(self):
        return len(self._read())

    def __contains__(self, name):
        return options.normalize_name(name) in self._read()

    def parameters(self):
        """
        Returns the entries converted to their parameter types.

        Raises:
            ConfigError: If an entry names an unknown parameter or does not parse.
        """
        return {name: options.parse_value(name, text) for name, text in self}

    def _read(self):
        if not self._path.is_file():
            raise ConfigError("Config file not found: {}".format(self._path))
        with open(str(self._path), encoding="utf-8") as config_file:
            entries = dict()
            for line in config_file:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = _SEPARATOR.split(line, maxsplit=1)
                if len(parts) != 2 or not parts[1]:
                    logger.warning('Ignoring malformed config line: "%s"', line)
                    continue
                entries[options.normalize_name(parts[0])] = parts[1].strip()
            return entries


class RunConfig:
    """
    Everything needed to reproduce one run.

    Attributes:
        subcommand:     Name of the subcommand.
        parameters:     Dictionary of the subcommand's parameters (parsed values).
        seed:           Master seed.
        output_dir:     Directory the run writes to.
        workers:        Number of worker processes.
        timestamp:      Timestamp stamped into every record of the run.
    """

    FIELDS = ["subcommand", "parameters", "seed", "output_dir", "workers", "timestamp"]

    def __init__(
        self, subcommand, parameters, seed=0, output_dir=None, workers=1, timestamp=None
    ):
        self.subcommand = subcommand
        self.parameters = dict(parameters)
        self.seed = int(seed)
        self.output_dir = str(output_dir if output_dir is not None else default_output_dir())
        self.workers = int(workers)
        self.timestamp = timestamp or current_timestamp()

    def to_dict(self):
        return {field: getattr(self, field) for field in self.FIELDS}

    @classmethod
    def from_dict(cls, data):
        """
        Rebuilds a RunConfig from to_dict() output, e.g. the "config" entry of a manifest.

        Raises:
            ConfigError: If a field is missing.
        """
        try:
            return cls(**{field: data[field] for field in cls.FIELDS})
        except KeyError as e:
            raise ConfigError("Run configuration is missing {}".format(e))

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return "RunConfig({})".format(self.to_dict())


def resolve(subcommand, flags, config_path=None):
    """
    Builds the RunConfig of a subcommand from defaults, a config file and flags.

    Precedence: defaults < config file < flags.  Config entries that are valid
    parameters of other subcommands are ignored with a warning.

    Args:
        subcommand:     Name of the subcommand.
        flags:          Dictionary of explicitly given flag values (parsed).
        config_path:    Path to a key/value config file - Optional.

    Raises:
        ConfigError: If a value is unknown, malformed or inconsistent.
    """
    accepted = set(options.SUBCOMMAND_PARAMETERS[subcommand]) | set(options.GLOBAL_PARAMETERS)
    merged = {name: options.DEFAULTS.get(name) for name in accepted}
    merged["output"] = default_output_dir()

    if config_path is not None:
        for name, value in ConfigFile(config_path).parameters().items():
            if name not in accepted:
                logger.warning("Ignoring %s: not a parameter of %s", name, subcommand)
                continue
            merged[name] = value

    for name, value in flags.items():
        merged[options.normalize_name(name)] = value

    parameters = {name: merged[name] for name in options.SUBCOMMAND_PARAMETERS[subcommand]}
    parameters = options.validate(subcommand, parameters)
    if merged["workers"] < 1:
        raise ConfigError("workers must be positive")
    if merged["seed"] < 0:
        raise ConfigError("seed must be non-negative")
    return RunConfig(
        subcommand,
        parameters,
        seed=merged["seed"],
        output_dir=merged["output"],
        workers=merged["workers"],
    )
