"""famplot: render figure panels from famsim scenario CSVs.

`famplot render SPEC --data DIR --out DIR` renders one spec file;
`famplot catalog --data DIR --out DIR` renders every bundled spec, which
reproduces the standard report figure set from the scenario catalog
outputs (p1..p4, h1..h4 from `famsim run`, t1/t2 pairs from
`famsim compare`).
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .figspec import SpecError
from .render import DataError, render_file


def bundled_specs() -> list[Path]:
    root = resources.files("famplot") / "specs"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".yaml"))


def cmd_render(args) -> int:
    return _render_many([Path(args.spec)], args.data, args.out)


def cmd_catalog(args) -> int:
    return _render_many(bundled_specs(), args.data, args.out)


def _render_many(spec_paths, data_dir, out_dir) -> int:
    status = 0
    for spec_path in spec_paths:
        try:
            for path, n_panels in render_file(spec_path, data_dir, out_dir):
                print(f"{spec_path.name}: {path} ({n_panels} panels)")
        except (SpecError, DataError) as err:
            print(f"{spec_path.name}: ERROR: {err}", file=sys.stderr)
            status = 1
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="famplot",
                                     description="Render famsim CSV logs to figures")
    sub = parser.add_subparsers(dest="command", required=True)

    p_render = sub.add_parser("render", help="render one figure spec file")
    p_render.add_argument("spec")
    p_render.add_argument("--data", default="out", help="directory holding the CSVs")
    p_render.add_argument("--out", default="figures", help="output image directory")
    p_render.set_defaults(func=cmd_render)

    p_cat = sub.add_parser("catalog", help="render all bundled figure specs")
    p_cat.add_argument("--data", default="out")
    p_cat.add_argument("--out", default="figures")
    p_cat.set_defaults(func=cmd_catalog)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
