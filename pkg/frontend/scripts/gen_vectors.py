#!/usr/bin/env python3
"""Regenerate the cross-implementation transform vectors.

Runs the server-side engine over its oracle domain and freezes, for each
op pair, the state after both application orders. The web client's twin
apply/transform must reproduce every outcome exactly. Run from the repo
root (needs the storypad package importable):

    python3 frontend/scripts/gen_vectors.py
"""
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from storypad.engine import apply, transform  # noqa: E402
from storypad.sim import _domain_ops, _oracle_states  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "tests" / "vectors" / "transform_vectors.json"


def main() -> int:
    vectors = []
    for state_name, engine in _oracle_states(max_len=4, max_sections=3):
        base = engine.story
        ops = [engine.materialize(op) for op in _domain_ops(engine, 4)]
        # keep the vector file tractable: stride over the full pair grid
        for i, a in enumerate(ops):
            for j in range(i + 1, len(ops), 7):
                b = ops[j]
                one = apply(apply(base, a), transform(b, a))
                two = apply(apply(base, b), transform(a, b))
                assert one == two
                vectors.append(
                    {
                        "state_name": state_name,
                        "state": base.to_dict(),
                        "op_a": a.to_dict(),
                        "op_b": b.to_dict(),
                        "expected": one.to_dict(),
                    }
                )
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(vectors, sort_keys=True, separators=(",", ":")) + "\n", "utf-8")
    print(f"wrote {len(vectors)} vectors to {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
