"""Model and state factories shared by the tests."""
from __future__ import annotations

import numpy as np

from qcurrents.model import (
    BathMode,
    DephasingChannel,
    EnvironmentSpec,
    Markovian,
    NonMarkovian,
    RelaxationChannel,
    SiteNetwork,
    build_generators,
)


def random_density(rng, n, rank=None):
    rank = rank or n
    X = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, n, scale=1.0):
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (X + X.conj().T) / 2


def random_network(rng, n, density=0.6, energy_scale=1.0, coupling_scale=0.5):
    couplings = []
    for l in range(n):
        for m in range(l + 1, n):
            if m == l + 1 or rng.random() < density:
                couplings.append((l, m, float(rng.normal(scale=coupling_scale))))
    energies = tuple(float(x) for x in rng.normal(scale=energy_scale, size=n))
    return SiteNetwork(energies, tuple(couplings))


def random_modes(rng, count=2):
    return NonMarkovian(tuple(
        BathMode(float(rng.uniform(0.1, 1.0)), float(rng.uniform(0.5, 2.0)),
                 float(rng.normal(scale=0.5)))
        for _ in range(count)))


def mixed_environment(rng, n, dephasing="mixed", relaxation="mixed", n_relax=None):
    """Random channels; ``dephasing``/``relaxation`` in {"markov", "modes", "mixed", "none"}."""

    def kind(style):
        if style == "markov" or (style == "mixed" and rng.random() < 0.5):
            return Markovian(float(rng.uniform(0.05, 0.5)))
        return random_modes(rng, int(rng.integers(1, 3)))

    deph = ()
    if dephasing != "none":
        deph = tuple(DephasingChannel(s, kind(dephasing)) for s in range(n))
    relax = []
    if relaxation != "none" and n > 1:
        pairs = [(s, t) for s in range(n) for t in range(n) if s != t]
        count = n_relax if n_relax is not None else max(1, n // 2)
        for i in rng.choice(len(pairs), size=min(count, len(pairs)), replace=False):
            s, t = pairs[i]
            relax.append(RelaxationChannel(s, t, kind(relaxation)))
    return EnvironmentSpec(deph, tuple(relax))


def random_generators(rng, n, dephasing="mixed", relaxation="mixed", **kw):
    net = random_network(rng, n)
    return build_generators(net, mixed_environment(rng, n, dephasing, relaxation, **kw))


def dimer(V=1.0, e1=0.0, e2=0.0, env=EnvironmentSpec()):
    net = SiteNetwork((e1, e2), ((0, 1, V),) if V else ())
    return build_generators(net, env)


def random_aux(rng, gen, scale=0.5):
    return scale * (rng.normal(size=(gen.n_modes, gen.n_sites, gen.n_sites))
                    + 1j * rng.normal(size=(gen.n_modes, gen.n_sites, gen.n_sites)))
