"""Model-based tree surrogates: scenarios, tree fitting and simulation studies."""

import json

from . import _core
from ._core import ConfigError, DataError, NumericalError, fidelity, rand_index, scenario_names

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "Tree",
    "bias_study",
    "fidelity",
    "fidelity_study",
    "fit",
    "generate",
    "rand_index",
    "scenario_names",
]


class Tree:
    """A fitted tree; `document` is its JSON form."""

    def __init__(self, document):
        self.document = document if isinstance(document, dict) else json.loads(document)
        self._text = json.dumps(self.document)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.document, f, indent=2)

    @property
    def n_leaves(self):
        return sum(1 for n in self.document["nodes"] if n.get("left", -1) < 0)

    def predict(self, csv):
        return _core.predict(self._text, csv)

    def leaves(self, csv):
        return _core.leaves(self._text, csv)

    def render(self, top=3):
        return _core.render(self._text, top)


def generate(name, n, seed=0, noise_scale=None):
    """Returns (csv_text, noiseless_signal, formula) for a named scenario."""
    return _core.generate(name, n, seed, noise_scale)


def fit(csv, target="y", **config):
    """Grows a tree on CSV text; keyword arguments are tree config keys."""
    return Tree(_core.fit(csv, target, json.dumps(config)))


def _settings(settings):
    return json.dumps([{"label": label, "config": cfg} for label, cfg in settings.items()])


def fidelity_study(scenario, settings, n=1500, runs=30, seed=1, source="lm",
                   noise_scale=None, jobs=1):
    """Runs a fidelity study; `settings` maps labels to tree config dicts."""
    return json.loads(_core.fidelity_study(scenario, n, noise_scale, source,
                                           _settings(settings), runs, seed, jobs))


def bias_study(scenario, settings, n=1000, runs=1000, seed=1, jobs=1):
    """Counts first-split features under forced splitting."""
    return json.loads(_core.bias_study(scenario, n, _settings(settings), runs, seed, jobs))
