"""Pair features on a five-node graph: a triangle 1-2-3, a pendant 3-4 and
an isolated node 0.  Every number printed here can be checked by hand."""
import numpy as np

from topolink import COLUMN_NAMES, SnapshotWindow, TemporalEdgeList, extract_window, snapshot
from topolink import features as F

# edges appear at t=1 (triangle) and t=2 (pendant)
edges = TemporalEdgeList.from_records([[1, 2, 1], [1, 3, 1], [2, 3, 1], [3, 4, 2]])
g = snapshot(edges, 2)
print("degrees:", g.degree.tolist())

for u, v in [(1, 2), (1, 4), (2, 4)]:
    print(f"pair ({u},{v}): CN={F.common_neighbors(g, u, v)} JC={F.jaccard(g, u, v):.3f} "
          f"AA={F.adamic_adar(g, u, v):.3f} RA={F.resource_allocation(g, u, v):.3f} "
          f"PA={F.preferential_attachment(g, u, v)}")

for node in (1, 3, 4):
    print(f"node {node}: clustering={F.clustering_coefficient(g, node):.3f} "
          f"avg neighbor degree={F.avg_neighbor_degree(g, node):.3f}")

# A window stacks three snapshots; the pendant edge is missing from the oldest.
w = SnapshotWindow.from_edges(edges, [2, 1, 0], label_cutoff=3)
m = extract_window(w, [(1, 4), (2, 4)])
row = dict(zip(COLUMN_NAMES, m.rows[0]))
print("DC of node 4 across the window:", [float(row[f"DC[v2,{y}]"]) for y in ("y1", "y2", "y3")])
print("matrix shape:", m.rows.shape, "finite:", bool(np.isfinite(m.rows).all()))
