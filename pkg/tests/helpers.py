"""Shared generators for tests: random taxonomies and embedding tables."""

import numpy as np

from ballwsd.embeddings import EmbeddingTable
from ballwsd.inventory import SenseId, Taxonomy


def random_taxonomy(rng: np.random.Generator, n_nodes: int,
                    forest_prob: float = 0.2) -> Taxonomy:
    """Uniform random recursive tree (occasionally a forest) over n_nodes.

    Lemmas are drawn from a pool smaller than the node count so some
    words carry several senses.
    """
    n_lemmas = max(3, n_nodes // 4)
    counts: dict[str, int] = {}
    nodes: list[SenseId] = []
    for _ in range(n_nodes):
        lemma = f"w{int(rng.integers(0, n_lemmas))}"
        counts[lemma] = counts.get(lemma, 0) + 1
        nodes.append(SenseId(lemma, "n", counts[lemma]))
    n_roots = 1
    if n_nodes >= 3 and rng.random() < forest_prob:
        n_roots = int(rng.integers(2, min(4, n_nodes)))
    parent: dict[SenseId, SenseId | None] = {}
    for i, node in enumerate(nodes):
        if i < n_roots:
            parent[node] = None
        else:
            parent[node] = nodes[int(rng.integers(0, i))]
    return Taxonomy(parent)


def random_table(rng: np.random.Generator, taxonomy: Taxonomy, dim: int,
                 zero_prob: float = 0.05) -> EmbeddingTable:
    """Embeddings for every lemma; a few are zero to hit the hash fallback."""
    vectors = {}
    for node in taxonomy.nodes():
        if node.lemma in vectors:
            continue
        if rng.random() < zero_prob:
            vectors[node.lemma] = np.zeros(dim)
        else:
            vectors[node.lemma] = rng.standard_normal(dim)
    return EmbeddingTable(vectors)


def ancestor_or_self(taxonomy: Taxonomy, a: SenseId, b: SenseId) -> bool:
    """True when b is a (or an ancestor of a)."""
    node: SenseId | None = a
    while node is not None:
        if node == b:
            return True
        node = taxonomy.parent_of(node)
    return False


def gradient_check(params, T, C, Y, h: float, n_coords: int,
                   rng: np.random.Generator, atol: float = 1e-8):
    """Compare analytic gradients with central differences.

    Perturbing a parameter can flip relu units on or off between the two
    probe points, in which case the difference quotient measures a
    different piecewise-linear branch than the analytic gradient.  Such
    coordinates are detected by comparing relu sign patterns at both
    probes and skipped; the caller gets (checked, skipped, worst_rel).

    Differences below `atol` count as exact agreement: a dead-path
    coordinate has an analytic gradient of exactly zero while its
    difference quotient is pure rounding noise of order eps/h.  The
    returned worst_rel covers only coordinates above that floor;
    worst_abs is the largest difference seen anywhere.
    """
    from ballwsd.encoder import activation_signs, batch_loss_and_grads

    _, grads = batch_loss_and_grads(params, T, C, Y)
    names = sorted(grads)
    checked = skipped = 0
    worst_rel = worst_abs = 0.0
    attempts = 0
    while checked < n_coords and attempts < 50 * n_coords:
        attempts += 1
        name = names[int(rng.integers(0, len(names)))]
        idx = int(rng.integers(0, params.arrays[name].size))
        probes = []
        for delta in (h, -h):
            p = params.copy()
            p.arrays[name].flat[idx] += delta
            probes.append(p)
        signs = [activation_signs(p, T, C) for p in probes]
        if not np.array_equal(signs[0], signs[1]):
            skipped += 1
            continue
        values = [batch_loss_and_grads(p, T, C, Y)[0] for p in probes]
        fd = (values[0] - values[1]) / (2.0 * h)
        analytic = float(grads[name].flat[idx])
        diff = abs(analytic - fd)
        worst_abs = max(worst_abs, diff)
        if diff > atol:
            worst_rel = max(worst_rel, diff / max(abs(analytic) + abs(fd), 1e-8))
        checked += 1
    return checked, skipped, worst_rel, worst_abs
