"""
Coupling distributions and sampled coupling fields for random-bond models.

A coupling file is JSON of the form
{"lattice": {"L0", "Lx", "Ly"}, "edges": [{"from", "to", "J"}], "spec", "seed"}
with every J written as its exact repr string, so a reload is bit-identical.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from peierls_lab.errors import DistributionError
from peierls_lab.lattice.torus import TorusLattice

logger = logging.getLogger(__name__)

KINDS = ('uniform', 'two_point', 'table')

# stream tag mixed into every coupling seed
COUPLING_STREAM = 0xC0B1


def philox_rng(*entropy: int) -> np.random.Generator:
    """Counter-based generator keyed by a tuple of integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(e) for e in entropy])))


@dataclass
class DistributionSpec:
    kind: str
    params: Dict[str, Any]
    J1: Optional[float] = None
    J2: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        self.validate()
        lo, hi = self.support()
        if self.J1 is None:
            self.J1 = max(0.0, -lo)
        if self.J2 is None:
            self.J2 = hi
        self.validate()

    # ---- constructors ----

    @classmethod
    def uniform(cls, low: float, high: float, **kwargs) -> 'DistributionSpec':
        return cls('uniform', {'low': float(low), 'high': float(high)}, **kwargs)

    @classmethod
    def two_point(cls, J_good: float, J_bad: float, p: float, **kwargs) -> 'DistributionSpec':
        """J_bad with probability p, J_good otherwise."""
        return cls('two_point', {'J_good': float(J_good), 'J_bad': float(J_bad), 'p': float(p)}, **kwargs)

    @classmethod
    def table(cls, values, weights, **kwargs) -> 'DistributionSpec':
        return cls('table', {'values': [float(v) for v in values], 'weights': [float(w) for w in weights]}, **kwargs)

    @classmethod
    def constant(cls, J: float, **kwargs) -> 'DistributionSpec':
        return cls.table([J], [1.0], **kwargs)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DistributionSpec':
        if 'kind' not in data:
            raise DistributionError("distribution spec needs a 'kind'")
        return cls(kind=data['kind'], params=dict(data.get('params', {})),
                   J1=data.get('J1'), J2=data.get('J2'), seed=int(data.get('seed', 0)))

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'params': dict(self.params), 'J1': self.J1, 'J2': self.J2, 'seed': self.seed}

    # ---- validation and exact properties ----

    def validate(self):
        errors = []
        p = self.params
        if self.kind not in KINDS:
            raise DistributionError(f"unknown distribution kind {self.kind!r}; choose one of {', '.join(KINDS)}")
        if self.kind == 'uniform':
            if not {'low', 'high'} <= set(p):
                errors.append("uniform needs 'low' and 'high'")
            elif p['low'] > p['high']:
                errors.append(f"uniform low {p['low']} > high {p['high']}")
        elif self.kind == 'two_point':
            if not {'J_good', 'J_bad', 'p'} <= set(p):
                errors.append("two_point needs 'J_good', 'J_bad' and 'p'")
            elif not 0.0 <= p['p'] <= 1.0:
                errors.append(f"two_point probability {p['p']} outside [0, 1]")
        else:
            values, weights = p.get('values', []), p.get('weights', [])
            if not values or len(values) != len(weights):
                errors.append("table needs equally long non-empty 'values' and 'weights'")
            elif min(weights) < 0 or sum(weights) <= 0:
                errors.append("table weights must be non-negative with a positive sum")
        if errors:
            raise DistributionError("; ".join(errors))

        if self.J1 is not None and self.J2 is not None:
            lo, hi = self.support()
            if self.J1 < 0:
                raise DistributionError(f"J1 must be >= 0, got {self.J1}")
            if lo < -self.J1 or hi > self.J2:
                raise DistributionError(
                    f"support [{lo}, {hi}] is not inside the declared bounds [{-self.J1}, {self.J2}]"
                )

    def atoms(self) -> Tuple[np.ndarray, np.ndarray]:
        """Values and probabilities of a discrete distribution."""
        p = self.params
        if self.kind == 'two_point':
            values = np.array([p['J_good'], p['J_bad']], dtype=np.float64)
            probs = np.array([1.0 - p['p'], p['p']])
        elif self.kind == 'table':
            values = np.array(p['values'], dtype=np.float64)
            probs = np.array(p['weights'], dtype=np.float64)
            probs = probs / probs.sum()
        else:
            raise DistributionError("a uniform distribution has no atoms")
        keep = probs > 0
        return values[keep], probs[keep]

    def support(self) -> Tuple[float, float]:
        if self.kind == 'uniform':
            return float(self.params['low']), float(self.params['high'])
        values, _ = self.atoms()
        return float(values.min()), float(values.max())

    def mass_at_most(self, threshold: float) -> float:
        """Exact P[J <= threshold]."""
        if self.kind == 'uniform':
            lo, hi = self.support()
            if hi == lo:
                return 1.0 if threshold >= lo else 0.0
            return float(np.clip((threshold - lo) / (hi - lo), 0.0, 1.0))
        values, probs = self.atoms()
        return float(probs[values <= threshold].sum())

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == 'uniform':
            lo, hi = self.support()
            return rng.uniform(lo, hi, size=n)
        values, probs = self.atoms()
        return values[rng.choice(len(values), size=n, p=probs)]

    @property
    def is_degenerate(self) -> bool:
        lo, hi = self.support()
        return lo == hi


@dataclass
class CouplingField:
    lattice: TorusLattice
    J: np.ndarray
    spec: Optional[DistributionSpec] = None
    seed: Optional[int] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=np.float64)
        if self.J.shape != (self.lattice.n_edges,):
            raise DistributionError(f"expected {self.lattice.n_edges} couplings, got shape {self.J.shape}")
        if self.spec is not None:
            lo, hi = -float(self.spec.J1), float(self.spec.J2)
            if self.J.size and (self.J.min() < lo or self.J.max() > hi):
                raise DistributionError(f"couplings leave the declared support [{lo}, {hi}]")

    @property
    def bounds(self) -> Tuple[float, float]:
        if self.spec is None:
            return max(0.0, -float(self.J.min())), float(self.J.max())
        return float(self.spec.J1), float(self.spec.J2)

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.J == self.J[0]))

    def p_hat(self, threshold: float) -> float:
        """Empirical fraction of edges with J <= threshold."""
        return float(np.mean(self.J <= threshold))

    def stats(self, threshold: Optional[float] = None) -> Dict[str, Any]:
        out = {'n_edges': int(self.J.size), 'J_min': float(self.J.min()), 'J_max': float(self.J.max()),
               'J_mean': float(self.J.mean())}
        if threshold is not None:
            out['threshold'] = float(threshold)
            out['p_hat'] = self.p_hat(threshold)
        return out

    # ---- persistence ----

    def to_dict(self) -> Dict[str, Any]:
        lat = self.lattice
        edges = [{'from': int(i), 'to': int(j), 'J': repr(float(Je))}
                 for (i, j), Je in zip(lat.edge_sites, self.J)]
        return {
            'lattice': {'L0': lat.Lx if lat.is_square else None, 'Lx': lat.Lx, 'Ly': lat.Ly},
            'edges': edges,
            'spec': self.spec.to_dict() if self.spec else None,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CouplingField':
        geo = data['lattice']
        Lx = geo.get('Lx') or geo['L0']
        Ly = geo.get('Ly') or geo['L0']
        lat = TorusLattice(int(Lx), int(Ly))
        edges = data['edges']
        if len(edges) != lat.n_edges:
            raise DistributionError(f"coupling file lists {len(edges)} edges, lattice has {lat.n_edges}")
        for e, (edge, (i, j)) in enumerate(zip(edges, lat.edge_sites)):
            if (int(edge['from']), int(edge['to'])) != (int(i), int(j)):
                raise DistributionError(f"edge {e} joins {edge['from']}-{edge['to']}, expected {i}-{j}")
        J = np.array([float(edge['J']) for edge in edges], dtype=np.float64)
        spec = DistributionSpec.from_dict(data['spec']) if data.get('spec') else None
        return cls(lattice=lat, J=J, spec=spec, seed=data.get('seed'))

    def save(self, path: str):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2)
        logger.info(f"Saved {self.J.size} couplings to {path}")

    @classmethod
    def load(cls, path: str) -> 'CouplingField':
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_dict(json.load(f))


def sample_couplings(spec: DistributionSpec, lat: TorusLattice, seed: Optional[int] = None) -> CouplingField:
    """One iid coupling per edge, reproducible from (spec, seed)."""
    spec.validate()
    seed = spec.seed if seed is None else int(seed)
    rng = philox_rng(seed, COUPLING_STREAM)
    J = spec.sample(lat.n_edges, rng)
    cf = CouplingField(lattice=lat, J=J, spec=spec, seed=seed)
    logger.debug(f"Sampled {spec.kind} couplings on {lat.describe()}: {cf.stats()}")
    return cf


def uniform_couplings(lat: TorusLattice, J: float = 1.0) -> CouplingField:
    return CouplingField(lattice=lat, J=np.full(lat.n_edges, float(J)), spec=DistributionSpec.constant(J), seed=None)
