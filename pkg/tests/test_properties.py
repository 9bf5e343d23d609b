"""Property-based checks of the current algebra, bounds and serialization."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from builders import random_aux, random_density, random_generators, random_hermitian
from qcurrents.currents import (
    dephasing_population_rate,
    total_currents,
    unitary_bound_check,
)
from qcurrents.model import parse_config, serialize
from qcurrents.pathways import build_pathway_graph, export_graph, integrate_series, parse_graph
from qcurrents.propagator import AuxiliaryOperatorSet, Trajectory

STYLES = st.sampled_from(["markov", "modes", "mixed", "none"])
SETTINGS = settings(max_examples=60, deadline=None)


def sample(seed, n, deph, relax, hermitian_only):
    rng = np.random.default_rng(seed)
    gen = random_generators(rng, n, deph, relax, n_relax=int(rng.integers(0, n * (n - 1) + 1)))
    rho = random_hermitian(rng, n) if hermitian_only else random_density(rng, n)
    return gen, rho, random_aux(rng, gen)


def currents_of(gen, rho, aux):
    return total_currents(Trajectory([0.0], rho[None]), gen, aux[None])


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), STYLES, STYLES, st.booleans())
def test_components_antisymmetric(seed, n, deph, relax, herm):
    gen, rho, aux = sample(seed, n, deph, relax, herm)
    cur = currents_of(gen, rho, aux)
    for name in cur.COMPONENTS:
        j = cur.component(name)[0]
        assert np.max(np.abs(j + j.T)) <= 1e-12


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), STYLES, STYLES, st.booleans())
def test_decomposition_closes(seed, n, deph, relax, herm):
    gen, rho, aux = sample(seed, n, deph, relax, herm)
    cur = currents_of(gen, rho, aux)
    mech = cur.j_unitary + cur.j_dephas_check + cur.j_relax
    assert np.max(np.abs(cur.j_total - mech)) <= 1e-12
    assert np.max(np.abs(cur.j_total - cur.j_pop - cur.j_coher)) <= 1e-10


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), STYLES, st.booleans())
def test_dephasing_never_moves_population(seed, n, deph, herm):
    gen, rho, aux = sample(seed, n, deph if deph != "none" else "mixed", "none", herm)
    dmap = AuxiliaryOperatorSet(gen, aux).dephasing_map()
    assert np.max(np.abs(dephasing_population_rate(rho, dmap))) <= 1e-12
    assert np.max(np.abs(currents_of(gen, rho, aux).j_dephas_check)) <= 1e-12


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(1, 6))
def test_unitary_bound_psd(seed, n, rank):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, n, rank=min(rank, n))
    H = random_hermitian(rng, n).real
    for l in range(n):
        for m in range(l + 1, n):
            c = unitary_bound_check(rho, H, l, m)
            assert not c.clamped or c.bound == 0.0
            assert c.current <= c.bound + 1e-10


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), STYLES, STYLES)
def test_config_round_trip(seed, n, deph, relax):
    rng = np.random.default_rng(seed)
    gen = random_generators(rng, n, deph, relax)
    labels = [f"s{i}" for i in range(n)]
    doc = {
        "sites": [{"label": lab, "energy": float(e)} for lab, e in zip(labels, np.diag(gen.H))],
        "couplings": [{"from": labels[l], "to": labels[m], "value": float(gen.H[l, m])}
                      for l in range(n) for m in range(l + 1, n) if gen.H[l, m] != 0],
        "dephasing": [], "relaxation": [],
        "initial": {"matrix": [[[z.real, z.imag] for z in row]
                               for row in random_density(rng, n)]},
    }
    for ch in gen.channels:
        kind = ({"rate": ch.rate} if ch.markovian else
                {"modes": [{"g": m.g, "gamma": m.gamma, "omega": m.omega} for m in ch.modes]})
        if ch.kind == "dephasing":
            doc["dephasing"].append({"site": labels[ch.source], **kind})
        else:
            doc["relaxation"].append({"from": labels[ch.source], "to": labels[ch.target], **kind})
    model = parse_config(doc)
    assert parse_config(serialize(model)) == model
    assert parse_config(serialize(model)).model_hash() == model.model_hash()


finite = st.floats(-10, 10, allow_nan=False)


@SETTINGS
@given(arrays(float, (4, 4), elements=finite), st.floats(0, 5), st.floats(0.0, 1.0))
def test_graph_round_trip(upper, threshold, t0):
    dP = np.triu(upper, 1)
    dP = dP - dP.T
    g = build_pathway_graph(dP, list("abcd"), threshold, (t0, 1.0))
    assert parse_graph(export_graph(g, "json")) == g
    assert all(e.weight > threshold for e in g.edges)
    pairs = [frozenset((e.source, e.target)) for e in g.edges]
    assert len(pairs) == len(set(pairs))
    weights = [e.weight for e in g.edges]
    assert weights == sorted(weights, reverse=True)


@SETTINGS
@given(arrays(float, 40, elements=finite), st.floats(0, 1.9), st.floats(0, 1), st.floats(0, 1))
def test_window_additivity(values, t0, fa, fb):
    times = np.linspace(0, 3.9, 40)
    room = 3.9 - t0
    a = fa * room
    b = fb * (room - a)
    whole = integrate_series(times, values, t0, a + b)
    parts = integrate_series(times, values, t0, a) + integrate_series(times, values, t0 + a, b)
    assert abs(whole - parts) <= 1e-10 * max(1.0, np.abs(values).max())
