"""Walk one Java method through the front end: AST, semantic flow graph, attention mask."""
from sfgloc.frontend import parse_method, resolve_types
from sfgloc.pipeline import method_input
from sfgloc.sequence import build_attention_mask, expected_zero_count
from sfgloc.sfg import EdgeKind, build_sfg, to_dot

SOURCE = """/** Returns the larger of two values. */
int max(int a, int b) {
    int m = a;
    if (b > a) { m = b; }
    return m;
}
"""

graph = build_sfg(resolve_types(parse_method(SOURCE)), "max").check()
print(f"{len(graph.nodes)} nodes, {len(graph.edges)} edges")
for kind in EdgeKind:
    print(f"  {kind.name:<12} {len(graph.edges_of(kind))}")
print(to_dot(graph)[:400], "...")

inp = method_input(SOURCE)
mask = build_attention_mask(inp)
allowed = int((mask == 0).sum())
print(f"sequence length {len(inp)}, allowed pairs {allowed} (closed form {expected_zero_count(inp)})")
