"""NEAT-style evolution of CPPN genomes: innovation tracking, mutation,
crossover, compatibility-distance speciation, elitism and stagnation.

Reproduction RNG is derived per offspring from (master_seed, generation,
child_index), so results do not depend on evaluation order or thread timing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .cppn import (ACTIVATIONS, ConnectionGene, CppnGenome, NodeGene,
                   minimal_genome, would_create_cycle)
from .errors import EmptyPopulation
from .fitness import FitnessScore

_ACTIVATION_CHOICES = sorted(ACTIVATIONS.keys())


@dataclass(frozen=True)
class NeatParams:
    c1: float = 1.0                      # excess coefficient
    c2: float = 1.0                      # disjoint coefficient
    c3: float = 0.4                      # matching-weight coefficient
    compatibility_threshold: float = 3.0
    weight_mutate_rate: float = 0.8
    weight_perturb_sigma: float = 0.5
    add_connection_rate: float = 0.1
    add_node_rate: float = 0.03
    crossover_rate: float = 0.75
    elitism_per_species: int = 1
    stagnation_limit: int = 15
    parent_fraction: float = 0.5         # top share of a species allowed to breed

    def __post_init__(self):
        for r in (self.weight_mutate_rate, self.add_connection_rate,
                  self.add_node_rate, self.crossover_rate, self.parent_fraction):
            if not (0.0 <= r <= 1.0):
                raise ValueError("rates must lie in [0, 1]")
        if self.weight_perturb_sigma <= 0 or self.compatibility_threshold <= 0:
            raise ValueError("sigma and threshold must be positive")


@dataclass
class Species:
    representative: CppnGenome
    members: list  # list of [CppnGenome, FitnessScore | None]
    stagnation_counter: int = 0
    best_ever: float = float("-inf")


@dataclass
class Population:
    species: list[Species]
    generation: int
    innovation_counter: int
    node_counter: int
    master_seed: int

    def genomes(self) -> list[CppnGenome]:
        return [g for sp in self.species for g, _ in sp.members]

    def assign_scores(self, scores: list[FitnessScore]) -> None:
        """Attach scores in genomes() order."""
        flat = [m for sp in self.species for m in sp.members]
        if len(scores) != len(flat):
            raise ValueError(f"expected {len(flat)} scores, got {len(scores)}")
        for member, s in zip(flat, scores):
            member[1] = s

    def scored_members(self):
        out = []
        for sp in self.species:
            for g, s in sp.members:
                if s is None:
                    raise ValueError("population has unscored members")
                out.append((g, s))
        return out


def genome_key(g: CppnGenome) -> str:
    """Stable hash of the canonical serialization; used for ties and convergence."""
    return hashlib.sha256(g.to_json().encode()).hexdigest()


def compatibility_distance(a: CppnGenome, b: CppnGenome, p: NeatParams = NeatParams()) -> float:
    """c1*E/N + c2*D/N + c3*mean(|weight diff|) over connection genes."""
    ga = {c.innovation_id: c for c in a.connections}
    gb = {c.innovation_id: c for c in b.connections}
    if not ga and not gb:
        return 0.0
    max_a = max(ga, default=-1)
    max_b = max(gb, default=-1)
    cutoff = min(max_a, max_b)
    matching = ga.keys() & gb.keys()
    excess = disjoint = 0
    for inno in ga.keys() ^ gb.keys():
        if inno > cutoff:
            excess += 1
        else:
            disjoint += 1
    n = max(len(ga), len(gb), 1)
    wbar = (sum(abs(ga[i].weight - gb[i].weight) for i in matching) / len(matching)
            if matching else 0.0)
    return p.c1 * excess / n + p.c2 * disjoint / n + p.c3 * wbar


class InnovationTracker:
    """Hands out structural ids; identical additions within one generation
    reuse the same ids so matching genes stay matched across the population.
    """

    def __init__(self, innovation_counter: int, node_counter: int):
        self.innovation_counter = innovation_counter
        self.node_counter = node_counter
        self._conn_cache: dict[tuple[int, int], int] = {}
        self._split_cache: dict[int, tuple[int, int, int]] = {}

    def connection_id(self, from_node: int, to_node: int) -> int:
        key = (from_node, to_node)
        if key not in self._conn_cache:
            self._conn_cache[key] = self.innovation_counter
            self.innovation_counter += 1
        return self._conn_cache[key]

    def split_ids(self, conn_innovation: int) -> tuple[int, int, int]:
        """(new_node_id, in_innovation, out_innovation) for splitting a connection."""
        if conn_innovation not in self._split_cache:
            node_id = self.node_counter
            self.node_counter += 1
            in_id = self.innovation_counter
            out_id = self.innovation_counter + 1
            self.innovation_counter += 2
            self._split_cache[conn_innovation] = (node_id, in_id, out_id)
        return self._split_cache[conn_innovation]


def mutate(g: CppnGenome, p: NeatParams, rng: np.random.Generator,
           tracker: InnovationTracker) -> CppnGenome:
    """Weight/bias perturbation, then possibly add-connection, then add-node."""
    nodes = list(g.nodes)
    conns = sorted(g.connections, key=lambda c: c.innovation_id)

    conns = [replace(c, weight=c.weight + float(rng.normal(0.0, p.weight_perturb_sigma)))
             if rng.random() < p.weight_mutate_rate else c
             for c in conns]
    nodes = [replace(n, bias=n.bias + float(rng.normal(0.0, p.weight_perturb_sigma)))
             if n.kind != "input" and rng.random() < p.weight_mutate_rate else n
             for n in nodes]
    g = CppnGenome(tuple(nodes), tuple(conns))

    if rng.random() < p.add_connection_rate:
        g = _add_connection(g, rng, tracker)
    if rng.random() < p.add_node_rate:
        g = _add_node(g, rng, tracker)
    return g


def _add_connection(g: CppnGenome, rng, tracker: InnovationTracker) -> CppnGenome:
    existing = {(c.from_node, c.to_node) for c in g.connections}
    sources = sorted(n.node_id for n in g.nodes if n.kind != "output")
    targets = sorted(n.node_id for n in g.nodes if n.kind != "input")
    candidates = [(a, b) for a in sources for b in targets
                  if (a, b) not in existing and not would_create_cycle(g, a, b)]
    if not candidates:
        return g
    a, b = candidates[int(rng.integers(len(candidates)))]
    gene = ConnectionGene(tracker.connection_id(a, b), a, b,
                          float(rng.normal(0.0, 1.0)), True)
    return CppnGenome(g.nodes, g.connections + (gene,))


def _add_node(g: CppnGenome, rng, tracker: InnovationTracker) -> CppnGenome:
    enabled = sorted((c for c in g.connections if c.enabled),
                     key=lambda c: c.innovation_id)
    if not enabled:
        return g
    target = enabled[int(rng.integers(len(enabled)))]
    node_id, in_id, out_id = tracker.split_ids(target.innovation_id)
    if any(n.node_id == node_id for n in g.nodes):
        return g  # this genome already has the split from an earlier mutation
    activation = _ACTIVATION_CHOICES[int(rng.integers(len(_ACTIVATION_CHOICES)))]
    new_node = NodeGene(node_id, "hidden", activation, 0.0)
    conns = tuple(replace(c, enabled=False) if c.innovation_id == target.innovation_id
                  else c for c in g.connections)
    conns += (ConnectionGene(in_id, target.from_node, node_id, 1.0, True),
              ConnectionGene(out_id, node_id, target.to_node, target.weight, True))
    return CppnGenome(g.nodes + (new_node,), conns)


def crossover(fit_parent: CppnGenome, other: CppnGenome,
              rng: np.random.Generator) -> CppnGenome:
    """Matching connection genes picked uniformly; structure (nodes, disjoint
    and excess genes) comes from the fitter parent, so the child stays acyclic.
    """
    other_genes = {c.innovation_id: c for c in other.connections}
    child_conns = []
    for c in sorted(fit_parent.connections, key=lambda c: c.innovation_id):
        m = other_genes.get(c.innovation_id)
        if m is not None and rng.random() < 0.5:
            c = replace(c, weight=m.weight, enabled=m.enabled)
        child_conns.append(c)
    return CppnGenome(fit_parent.nodes, tuple(child_conns))


def initial_population(seed: int, channels: int, species_count: int = 5,
                       species_size: int = 10,
                       p: NeatParams = NeatParams(),
                       initial_weight_sigma: float = 0.05) -> Population:
    """Minimal fully-connected genomes, speciated by compatibility distance.

    Small initial weights start the run from near-flat images so fitness is
    earned by evolution rather than by the ring scaffold alone.
    """
    total = species_count * species_size
    genomes = [minimal_genome(channels, np.random.default_rng([seed, 0, i]),
                              initial_weight_sigma)
               for i in range(total)]
    node_counter = max(n.node_id for n in genomes[0].nodes) + 1
    innovation_counter = max(c.innovation_id for c in genomes[0].connections) + 1
    pop = Population([], 0, innovation_counter, node_counter, seed)
    _speciate(pop, genomes, [], p)
    return pop


def _speciate(pop: Population, genomes: list[CppnGenome],
              seed_species: list[Species], p: NeatParams) -> None:
    """Assign genomes to the first seed species within threshold, else new ones."""
    species = [Species(sp.representative, [], sp.stagnation_counter, sp.best_ever)
               for sp in seed_species]
    for g in genomes:
        for sp in species:
            if compatibility_distance(g, sp.representative, p) < p.compatibility_threshold:
                sp.members.append([g, None])
                break
        else:
            species.append(Species(g, [[g, None]]))
    pop.species = [sp for sp in species if sp.members]


def best(pop: Population) -> tuple[CppnGenome, FitnessScore]:
    """Highest-scoring genome; ties resolved by lower serialization order."""
    members = pop.scored_members()
    if not members:
        raise EmptyPopulation("no genomes to pick from")
    return min(members, key=lambda m: (-m[1].total, m[0].to_json()))


def next_generation(pop: Population, p: NeatParams = NeatParams(),
                    species_count: int = 5, species_size: int = 10) -> Population:
    """Selection + reproduction: per-species elitism, crossover of the top
    parent fraction, mutation; stagnant species yield their slots to the best.
    """
    if not pop.species or not any(sp.members for sp in pop.species):
        raise EmptyPopulation("cannot breed an empty population")
    pop.scored_members()  # raises if anything is unscored

    def member_order(m):
        return (-m[1].total, m[0].to_json())

    # stagnation bookkeeping on the scored species
    for sp in pop.species:
        top = max(m[1].total for m in sp.members)
        if top > sp.best_ever:
            sp.best_ever = top
            sp.stagnation_counter = 0
        else:
            sp.stagnation_counter += 1

    ranked = sorted(pop.species,
                    key=lambda sp: min(member_order(m) for m in sp.members))
    survivors = [sp for sp in ranked if sp.stagnation_counter <= p.stagnation_limit]
    if not survivors:
        survivors = [ranked[0]]  # never lose the best species to stagnation
    survivors = survivors[:species_count]

    total = species_count * species_size
    slots = {id(sp): species_size for sp in survivors}
    slots[id(survivors[0])] += total - species_size * len(survivors)

    tracker = InnovationTracker(pop.innovation_counter, pop.node_counter)
    next_gen = pop.generation + 1
    offspring: list[CppnGenome] = []
    child_index = 0
    for sp in survivors:
        members = sorted(sp.members, key=member_order)
        n_slots = slots[id(sp)]
        elites = [m[0] for m in members[:min(p.elitism_per_species, n_slots)]]
        offspring.extend(elites)
        n_parents = max(1, int(np.ceil(len(members) * p.parent_fraction)))
        parents = members[:n_parents]
        for _ in range(n_slots - len(elites)):
            rng = np.random.default_rng([pop.master_seed, next_gen, child_index])
            child_index += 1
            if len(parents) >= 2 and rng.random() < p.crossover_rate:
                i, j = rng.choice(len(parents), size=2, replace=False)
                a, b = parents[int(i)], parents[int(j)]
                if member_order(b) < member_order(a):
                    a, b = b, a
                child = crossover(a[0], b[0], rng)
            else:
                child = parents[int(rng.integers(len(parents)))][0]
            offspring.append(mutate(child, p, rng, tracker))

    new_pop = Population([], next_gen, tracker.innovation_counter,
                         tracker.node_counter, pop.master_seed)
    reps = [Species(min(sp.members, key=member_order)[0], [],
                    sp.stagnation_counter, sp.best_ever)
            for sp in survivors]
    _speciate(new_pop, offspring, reps, p)
    return new_pop


def _genome_doc(g: CppnGenome) -> dict:
    return json.loads(g.to_json())


def _score_doc(s: FitnessScore | None):
    if s is None:
        return None
    return {"total": s.total, "n_valid": s.n_valid, "magnitude": s.magnitude_term,
            "align": s.align_term, "oppose": s.oppose_term}


def population_to_json(pop: Population) -> str:
    """Checkpoint document; from_json(to_json(pop)) resumes the run exactly."""
    doc = {
        "generation": pop.generation,
        "innovation_counter": pop.innovation_counter,
        "node_counter": pop.node_counter,
        "master_seed": pop.master_seed,
        "species": [
            {
                "representative": _genome_doc(sp.representative),
                "stagnation_counter": sp.stagnation_counter,
                "best_ever": sp.best_ever,
                "members": [{"genome": _genome_doc(g), "score": _score_doc(s)}
                            for g, s in sp.members],
            }
            for sp in pop.species
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def population_from_json(text: str) -> Population:
    doc = json.loads(text)

    def genome(d):
        return CppnGenome.from_json(json.dumps(d))

    def scr(d):
        if d is None:
            return None
        return FitnessScore(d["total"], d["n_valid"], d["magnitude"],
                            d["align"], d["oppose"])

    species = [
        Species(genome(sp["representative"]),
                [[genome(m["genome"]), scr(m["score"])] for m in sp["members"]],
                sp["stagnation_counter"],
                sp["best_ever"] if sp["best_ever"] is not None else float("-inf"))
        for sp in doc["species"]
    ]
    return Population(species, doc["generation"], doc["innovation_counter"],
                      doc["node_counter"], doc["master_seed"])
