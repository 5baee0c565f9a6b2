import argparse
import sys

from .render import FigureSpec, main_render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render the two-panel sample-path / mean-square figure from CSV outputs",
    )
    parser.add_argument("--paths", required=True, help="sample-path CSV (t,rep,particle,value)")
    parser.add_argument("--meansq", required=True, help="mean-square CSV (t,mean_sq,std_err,n_reps)")
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument("--rate", type=float, default=None, help="decay-rate reference overlay")
    parser.add_argument("--title", default="", help="figure title")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        paths_csv=args.paths,
        meansq_csv=args.meansq,
        out_image=args.out,
        title=args.title,
        reference_rate=args.rate,
    )
    return main_render(spec)


if __name__ == "__main__":
    sys.exit(main())
