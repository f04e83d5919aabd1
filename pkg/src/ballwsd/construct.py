"""Deterministic construction of nested sense balls from a taxonomy.

Center vectors have two blocks.  The prefix block holds a positive
multiple of the node's static word embedding and is fixed the moment a
ball is created; nothing later touches it, so embedding preservation is
exact by construction.  The extension block is a one-hot-style path
code: each (depth, child-index) pair used by the taxonomy owns a slot
(axis), and a node's extension coordinates are the translations it
accumulated along its ancestors' slot axes during packing.

Packing runs bottom-up.  For every parent:

  1. re-center each child subtree so the child ball sits at the origin
     of the extension block,
  2. translate each child subtree along its own slot axis, far enough
     out that all sibling balls are pairwise disconnected with slack
     (closed form; siblings forced onto a shared axis by slot overflow
     are packed along it in descending-radius order),
  3. wrap the children in a parent ball centered at their extension
     centroid on the parent's own prefix ray.

Subtrees only ever move rigidly (extension-block translations), so
nesting and disconnection survive every later step exactly.  A final
homothety about the origin scales everything into the unit ball.
"""

from __future__ import annotations

import math

import numpy as np

from .embeddings import EmbeddingTable, hash_unit_vector
from .geometry import Ball, BallConfiguration, GeometryConfig, verify_configuration
from .inventory import SenseId, Taxonomy

# relative slack added to every separation distance so float noise can
# never flip a verifier comparison
_REL_SLACK = 1e-7


class ConstructionError(RuntimeError):
    pass


def _slot_map(taxonomy: Taxonomy, width: int) -> dict[tuple[int, int], int]:
    """Assign each used (depth, child-index) pair an extension axis.

    Pairs get distinct axes while they fit; overflow wraps around, which
    only costs packing density, never correctness.
    """
    used: set[tuple[int, int]] = set()

    def walk(node: SenseId, depth: int):
        for idx, kid in enumerate(taxonomy.children_of(node), start=1):
            used.add((depth + 1, idx))
            walk(kid, depth + 1)

    for root in taxonomy.roots():
        walk(root, 0)
    return {pair: pos % width for pos, pair in enumerate(sorted(used))}


def _unit_prefix(table: EmbeddingTable, lemma: str) -> np.ndarray:
    base = table.vector(lemma)
    norm = float(np.linalg.norm(base))
    if norm == 0.0:
        base = hash_unit_vector(lemma, table.dim)
        norm = 1.0
    return base / norm


def _pack_offsets(radii: list[float], axes: list[int], width: int) -> list[tuple[int, float]]:
    """1-d offsets (axis, distance) separating sibling balls.

    Each ball i goes to distance t_i along its axis.  With distinct axes,
    t_i = (r_i + r_max)/sqrt(2) makes every cross pair disconnected;
    same-axis groups are chained in descending-radius order so the
    first (largest) member alone satisfies the cross-axis bound.
    """
    r_max = max(radii)
    order: dict[int, list[int]] = {}
    for i, axis in enumerate(axes):
        order.setdefault(axis, []).append(i)
    out: list[tuple[int, float] | None] = [None] * len(radii)
    for axis, members in order.items():
        members.sort(key=lambda i: (-radii[i], i))
        pos = 0.0
        prev_r = None
        for i in members:
            if prev_r is None:
                pos = (1.0 + _REL_SLACK) * (radii[i] + r_max) / math.sqrt(2.0)
            else:
                pos += (1.0 + _REL_SLACK) * (prev_r + radii[i])
            out[i] = (axis, pos)
            prev_r = radii[i]
    return out  # type: ignore[return-value]


class _Builder:
    def __init__(self, taxonomy: Taxonomy, table: EmbeddingTable, cfg: GeometryConfig,
                 prefix_weight: float):
        self.tax = taxonomy
        self.table = table
        self.cfg = cfg
        self.pw = prefix_weight
        self.pdim = table.dim
        self.width = cfg.extension_code_width
        self.dim = table.dim + cfg.extension_code_width
        self.slots = _slot_map(taxonomy, cfg.extension_code_width)

    def build(self, node: SenseId, depth: int) -> dict[SenseId, list]:
        prefix = self.pw * _unit_prefix(self.table, node.lemma)
        kids = self.tax.children_of(node)
        if not kids:
            center = np.concatenate([prefix, np.zeros(self.width)])
            return {node: [center, self.cfg.initial_leaf_radius]}

        subtrees = [(kid, self.build(kid, depth + 1)) for kid in kids]
        radii = [balls[kid][1] for kid, balls in subtrees]
        axes = [self.slots[(depth + 1, idx)] for idx in range(1, len(kids) + 1)]
        offsets = _pack_offsets(radii, axes, self.width)

        merged: dict[SenseId, list] = {}
        tops: list[tuple[np.ndarray, float]] = []
        for (kid, balls), (axis, dist) in zip(subtrees, offsets):
            shift = -balls[kid][0][self.pdim:].copy()
            shift[axis] += dist
            for entry in balls.values():
                entry[0][self.pdim:] += shift
            merged.update(balls)
            tops.append((balls[kid][0], balls[kid][1]))

        ext_centroid = np.mean([c[self.pdim:] for c, _ in tops], axis=0)
        center = np.concatenate([prefix, ext_centroid])
        reach = max(float(np.linalg.norm(c - center)) + r for c, r in tops)
        merged[node] = [center, self.cfg.margin * reach]
        return merged


def construct_balls(taxonomy: Taxonomy, table: EmbeddingTable,
                    cfg: GeometryConfig | None = None, *,
                    prefix_weight: float = 1.0) -> BallConfiguration:
    """Build one ball per taxonomy node and verify the result.

    Deterministic: identical inputs give bit-identical output.  Raises
    ConstructionError if the finished configuration fails verification.
    """
    cfg = cfg or GeometryConfig()
    if prefix_weight <= 0.0:
        raise ValueError("prefix_weight must be positive")
    roots = taxonomy.roots()
    if not roots:
        raise ConstructionError("taxonomy has no roots")

    builder = _Builder(taxonomy, table, cfg, prefix_weight)
    forests = [(r, builder.build(r, 0)) for r in roots]

    merged: dict[SenseId, list] = {}
    if len(forests) == 1:
        merged.update(forests[0][1])
    else:
        # co-roots have no covering parent but still must be disjoint
        radii = [balls[r][1] for r, balls in forests]
        axes = [i % builder.width for i in range(len(forests))]
        offsets = _pack_offsets(radii, axes, builder.width)
        for (root, balls), (axis, dist) in zip(forests, offsets):
            shift = -balls[root][0][builder.pdim:].copy()
            shift[axis] += dist
            for entry in balls.values():
                entry[0][builder.pdim:] += shift
            merged.update(balls)

    # final homothety into the unit ball
    outer = max(float(np.linalg.norm(c)) + r for c, r in merged.values())
    scale = 1.0 / outer
    balls = {
        str(node): Ball(str(node), c * scale, r * scale)
        for node, (c, r) in merged.items()
    }
    config = BallConfiguration(dim=builder.dim, embedding_prefix_dim=builder.pdim, balls=balls)
    report = verify_configuration(config, taxonomy, cfg)
    if not report.ok:
        raise ConstructionError("constructed configuration fails verification:\n" + report.render())
    return config
