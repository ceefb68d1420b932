""" all run parameters, the data types of their values and the subcommands that accept them """

import logging

from .designs import PAULI_LETTERS

logger = logging.getLogger("tomofisher")


class ConfigError(ValueError):
    pass


# "int_grid" accepts "1..5", "10..81:10" and "1,2,3" (parts may be mixed)
PARAMETERS = {
    "seed": int,
    "workers": int,
    "output": str,
    "n": int,
    "d": int,
    "r": int,
    "ranks": "int_grid",
    "k": "int_grid",
    "n_grid": "int_grid",
    "N": int,
    "m": int,
    "states": int,
    "designs": int,
    "reps": int,
    "replacement": bool,
    "rotate": bool,
    "stretch": bool,
    "compare_fine": bool,
    "max_iters": int,
    "conv_tol": float,
    "dilution": float,
    "state_seed": int,
    "state_diag": "float_list",
    "settings": "label_list",
    "setting": str,
    "print_mse": bool,
}

GLOBAL_PARAMETERS = ["seed", "workers", "output"]

SUBCOMMAND_PARAMETERS = {
    "sweep": ["n", "ranks", "k", "N", "states", "designs", "replacement"],
    "mle-compare": ["n", "r", "k", "N", "designs", "reps", "max_iters", "conv_tol", "dilution"],
    "haar-concentration": ["d", "ranks", "k", "designs"],
    "pauli-re": ["n", "r", "k", "designs"],
    "min-eig": ["n_grid", "ranks", "states", "rotate", "stretch"],
    "coarse-compare": ["n", "ranks", "k", "N", "states", "designs", "compare_fine"],
    "fisher": ["n", "r", "state_seed", "state_diag", "settings", "N", "print_mse"],
    "counts": ["n", "r", "state_seed", "state_diag", "setting", "m"],
}

SUBCOMMANDS = list(SUBCOMMAND_PARAMETERS)

# desk-scale defaults; a k of None means every design size the experiment allows
DEFAULTS = {
    "seed": 0,
    "workers": 1,
    "n": 2,
    "d": 4,
    "r": 1,
    "ranks": [1, 2],
    "k": None,
    "n_grid": [2, 3, 4],
    "N": 900,
    "m": 100,
    "states": 3,
    "designs": 3,
    "reps": 30,
    "replacement": False,
    "rotate": True,
    "stretch": False,
    "compare_fine": False,
    "max_iters": 5000,
    "conv_tol": 1e-10,
    "dilution": 1.0,
    "state_seed": None,
    "state_diag": None,
    "settings": None,
    "setting": None,
    "print_mse": False,
}

# min-eig beyond this number of qubits needs the stretch flag
MAX_DESK_QUBITS = 6

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def normalize_name(name):
    """ Maps a flag or config key (dashes or underscores) to its parameter name. """
    return name.strip().lstrip("-").replace("-", "_")


def parse_int_grid(text):
    """
    Parses an integer grid.

    Args:
        text:   Comma separated parts, each an integer "a", a range "a..b" or a strided range "a..b:step".

    Raises:
        ConfigError: If a part is malformed or a range is empty.

    Returns:
        List of integers in the order given.
    """
    values = []
    for part in str(text).split(","):
        part = part.strip()
        try:
            if ".." in part:
                start, _, rest = part.partition("..")
                stop, _, step = rest.partition(":")
                start, stop, step = int(start), int(stop), int(step or 1)
                if step < 1 or stop < start:
                    raise ValueError(part)
                values.extend(range(start, stop + 1, step))
            else:
                values.append(int(part))
        except ValueError:
            raise ConfigError("Malformed integer grid: '{}'".format(text))
    return values


def parse_value(name, text):
    """
    Converts the text of a flag or config entry to the type in PARAMETERS.

    Raises:
        ConfigError: If name is not a parameter or text does not parse.
    """
    name = normalize_name(name)
    if name not in PARAMETERS:
        raise ConfigError("Unknown parameter: '{}'".format(name))
    kind = PARAMETERS[name]
    if not isinstance(text, str):
        return text
    text = text.strip()
    try:
        if kind == "int_grid":
            return parse_int_grid(text)
        if kind == "float_list":
            return [float(value) for value in text.split(",")]
        if kind == "label_list":
            return [value.strip() for value in text.split(",") if value.strip()]
        if kind is bool:
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigError("Invalid value for {}: '{}'".format(name, text))


def defaults_for(subcommand):
    """ Returns the default value of every parameter a subcommand accepts. """
    if subcommand not in SUBCOMMAND_PARAMETERS:
        raise ConfigError("Unknown subcommand: '{}'".format(subcommand))
    return {name: DEFAULTS[name] for name in SUBCOMMAND_PARAMETERS[subcommand]}


def _require(condition, message):
    if not condition:
        raise ConfigError(message)


def _check_grid(name, values, low, high):
    _require(values, "{} must not be empty".format(name))
    for value in values:
        _require(
            low <= value <= high,
            "{} values must lie in [{}, {}], got {}".format(name, low, high, value),
        )


def validate(subcommand, parameters):
    """
    Checks that the parameters of a subcommand are consistent.

    Raises:
        ConfigError: On the first inconsistency found.
    """
    p = dict(defaults_for(subcommand), **parameters)

    for name in ("states", "designs", "N", "m", "max_iters"):
        if name in p and p[name] is not None:
            _require(p[name] >= 1, "{} must be positive".format(name))
    if "reps" in p:
        _require(p["reps"] >= 2, "reps must be at least 2")
    if "dilution" in p:
        _require(0 < p["dilution"] <= 1, "dilution must lie in (0, 1]")
    if "conv_tol" in p:
        _require(p["conv_tol"] > 0, "conv_tol must be positive")

    if subcommand == "haar-concentration":
        _check_grid("ranks", p["ranks"], 1, p["d"] - 1)
    elif subcommand == "min-eig":
        _check_grid("n_grid", p["n_grid"], 1, 64)
        if not p["stretch"]:
            _require(
                max(p["n_grid"]) <= MAX_DESK_QUBITS,
                "n > {} needs --stretch".format(MAX_DESK_QUBITS),
            )
        _check_grid("ranks", p["ranks"], 1, 2 ** min(p["n_grid"]))
    else:
        _require(p["n"] >= 1, "n must be positive")
        d = 2 ** p["n"]
        if "ranks" in p:
            _check_grid("ranks", p["ranks"], 1, d)
        if "r" in p:
            _require(1 <= p["r"] <= d, "r must lie in [1, {}]".format(d))

    if p.get("k") is not None:
        if subcommand == "sweep":
            high = 3 ** p["n"] if not p["replacement"] else p["N"]
        elif subcommand in ("mle-compare", "pauli-re"):
            high = 3 ** p["n"]
        elif subcommand == "coarse-compare":
            high = 4 ** p["n"] - 1
        else:
            high = p.get("N") or 10 ** 9
        _check_grid("k", p["k"], 1, high)
        if "N" in p:
            _require(p["N"] >= max(p["k"]), "N must be at least the largest k")

    if subcommand in ("fisher", "counts"):
        diag = p["state_diag"]
        if diag is not None:
            _require(len(diag) == 2 ** p["n"], "state_diag needs 2^n entries")
            _require(min(diag) >= 0, "state_diag entries must be non-negative")
            _require(abs(sum(diag) - 1) <= 1e-12, "state_diag entries must sum to one")
        if subcommand == "fisher":
            _require(p["settings"], "fisher needs --settings")
            for label in p["settings"]:
                _check_setting_label(label, p["n"])
        else:
            _require(p["setting"], "counts needs --setting")
            _check_setting_label(p["setting"], p["n"])
    return p


def _check_setting_label(label, n):
    _require(len(label) == n, "setting '{}' needs n letters".format(label))
    _require(
        all(letter in PAULI_LETTERS for letter in label),
        "setting '{}' may only use the letters '{}'".format(label, PAULI_LETTERS),
    )
