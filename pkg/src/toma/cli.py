"""Command-line interface: ``toma {ph,mst,loss,compare,train,viz,datagen}``.

Exit codes: 0 success, 1 I/O or parse failure, 2 validation failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .alignment import VARIANTS, AlignConfig
from .datagen import STRUCTURES, GapSpec, SynthSpec, generate
from .errors import ParseError, TomaError
from .filtration import PhOptions, compute_mst, compute_ph, diagram_to_json
from .geometry import (
    PairingMap,
    pairing_from_id_pairs,
    normalize,
    pairwise_distances,
    read_cloud_csv,
    read_pairing_csv,
    write_cloud_csv,
    write_pairing_csv,
)
from .trainer import (
    TrainConfig,
    benchmark_config,
    benchmark_spec,
    combined_objective,
    matched_coefficient,
    mst_overlap,
    train,
)
from .viz import build_scene

GLOBAL_DEFAULTS = {
    "seed": 0,
    "metric": "euclidean",
    "h1_cap": None,
    "max_scale": None,
    "output": None,
    "format": "json",
}
COMPARE_VARIANTS = ("none", "toma", "dist", "pd", "pi")


def _global_flags(parser):
    s = argparse.SUPPRESS
    parser.add_argument("--seed", type=int, default=s, help="random seed (the only entropy source)")
    parser.add_argument("--metric", choices=("euclidean", "cosine"), default=s)
    parser.add_argument("--h1-cap", type=int, default=s, help="keep at most N H1-birth edges")
    parser.add_argument("--max-scale", type=float, default=s, help="drop edges longer than X")
    parser.add_argument("--output", "-o", default=s, help="output path (stdout if omitted)")
    parser.add_argument("--format", choices=("json", "tsv"), default=s)


def build_parser():
    parser = argparse.ArgumentParser(prog="toma", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ph", help="persistence pairs and edge decomposition of one cloud")
    p.add_argument("input")
    _global_flags(p)

    p = sub.add_parser("mst", help="minimum spanning tree of one cloud")
    p.add_argument("input")
    _global_flags(p)

    p = sub.add_parser("loss", help="contrastive + topology loss for two paired clouds")
    p.add_argument("input_i")
    p.add_argument("input_j")
    p.add_argument("--pairing", help="CSV with header id_i,id_j (default: match ids)")
    _loss_flags(p)
    p.add_argument("--normalize", action="store_true", help="L2-normalise rows first")
    _global_flags(p)

    p = sub.add_parser("compare", help="train every variant over a seed sweep; TSV summary")
    p.add_argument("--spec", help="SynthSpec JSON (default: the built-in benchmark)")
    p.add_argument("--seeds", type=int, default=10, help="number of seeds, starting at --seed")
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--variants", default=",".join(COMPARE_VARIANTS))
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument(
        "--no-calibrate",
        dest="calibrate",
        action="store_false",
        help="use --c as is for pd/pi instead of matching the ToMA gradient norm",
    )
    _global_flags(p)

    p = sub.add_parser("train", help="train on a synthetic spec or on two CSV clouds")
    p.add_argument("--spec", help="SynthSpec JSON (default: the built-in benchmark)")
    p.add_argument("--input", nargs=2, metavar=("CSV_I", "CSV_J"))
    p.add_argument("--pairing")
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--labeled-fraction", type=float, default=1.0)
    p.add_argument("--optimize", choices=("free-points", "linear-map"), default="linear-map")
    p.add_argument("--export", help="write final clouds to PREFIX_i.csv / PREFIX_j.csv")
    _loss_flags(p)
    _global_flags(p)

    p = sub.add_parser("viz", help="SVG drawings of both clouds' MST and H1 edges")
    p.add_argument("input_i")
    p.add_argument("input_j")
    p.add_argument("--pairing")
    _global_flags(p)

    p = sub.add_parser("datagen", help="write a synthetic pair of clouds")
    p.add_argument("--structure", choices=STRUCTURES, default="two-clusters-plus-cycle")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--spread", type=float, default=0.1)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--gap-angle", type=float, default=0.0)
    p.add_argument("--gap-axes", type=int, nargs=2, default=(0, 1))
    p.add_argument("--gap-sigma", type=float, default=0.0)
    p.add_argument("--gap-translation", type=float, nargs="+", default=None)
    p.add_argument("--gap-sign-flip", action="store_true")
    _global_flags(p)
    return parser


def _loss_flags(p):
    p.add_argument("--variant", choices=VARIANTS, default="toma")
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--no-abs", action="store_true", help="use raw cosine instead of |cosine|")
    p.add_argument("--tau", type=float, default=1.0)


def _opts(args):
    return PhOptions(max_scale=args.max_scale, h1_cap=args.h1_cap)


def _align(args):
    return AlignConfig(
        c=args.c,
        c2=args.c2,
        use_abs=not args.no_abs,
        variant=args.variant,
        ph_opts=_opts(args),
        metric=args.metric,
    )


def _emit(args, text):
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _fmt(x):
    return repr(float(x))


def _load_pair(args):
    ci = read_cloud_csv(args.input_i)
    cj = read_cloud_csv(args.input_j)
    return ci, cj, _load_pairing(args.pairing, ci, cj)


def _load_pairing(path, ci, cj):
    if path:
        pairing = pairing_from_id_pairs(ci, cj, read_pairing_csv(path))
    else:
        pairing = pairing_from_id_pairs(ci, cj, [(int(x), int(x)) for x in ci.ids])
    if not pairing.is_complete():
        raise TomaError("pairing does not cover every point of both clouds")
    return pairing


def cmd_ph(args):
    cloud = read_cloud_csv(args.input)
    pairs, dec = compute_ph(pairwise_distances(cloud, args.metric), _opts(args))
    if args.format == "tsv":
        lines = ["dim\tbirth\tdeath\tsimplex"]
        for p in pairs:
            death = "inf" if math.isinf(p.death) else _fmt(p.death)
            simplex = p.death_simplex if p.dim == 0 and p.death_simplex else p.birth_simplex
            where = f"{simplex.a}-{simplex.b}" if hasattr(simplex, "a") else str(simplex)
            lines.append(f"{p.dim}\t{_fmt(p.birth)}\t{death}\t{where}")
        _emit(args, "\n".join(lines) + "\n")
    else:
        _emit(args, diagram_to_json(pairs, dec) + "\n")
    return 0


def cmd_mst(args):
    cloud = read_cloud_csv(args.input)
    tree = compute_mst(pairwise_distances(cloud, args.metric))
    if args.format == "tsv":
        lines = ["a\tb\tweight"] + [f"{e.a}\t{e.b}\t{_fmt(e.weight)}" for e in tree]
        _emit(args, "\n".join(lines) + "\n")
    else:
        _emit(args, json.dumps({"edges": [[e.a, e.b, e.weight] for e in tree]}) + "\n")
    return 0


def cmd_loss(args):
    ci, cj, pairing = _load_pair(args)
    if args.normalize:
        ci, cj = normalize(ci), normalize(cj)
    cfg = TrainConfig(steps=0, align=_align(args), tau=args.tau, seed=args.seed)
    report = combined_objective(ci, cj, pairing, cfg, grad=False)
    report.config = {"align": cfg.align.to_dict(), "tau": args.tau}
    _emit(args, report.to_json() + "\n")
    return 0


def _spec_from(args, seed):
    if args.spec:
        spec = SynthSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
        spec.seed = seed
        return spec
    return benchmark_spec(seed)


def _compare_arm(job):
    spec, variant, c, steps, lr, seed, calibrate = job
    data = generate(spec)
    kw = {} if lr is None else {"learning_rate": lr}
    if variant == "none":
        c = 0.0
    elif calibrate and variant in ("pd", "pi"):
        c = matched_coefficient(data, variant, c, seed=seed)
    cfg = benchmark_config(c=c, variant=variant, seed=seed, steps=steps, **kw)
    end = train(data, cfg).metrics["end"]
    return variant, seed, end["mst_overlap"], end["retrieval_r1"]


def compare_rows(args):
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in COMPARE_VARIANTS:
            raise TomaError(f"unknown variant {v!r}")
    seeds = list(range(args.seed, args.seed + args.seeds))
    jobs = [(_spec_from(args, s), v, args.c, args.steps, args.lr, s, args.calibrate) for v in variants for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_compare_arm, jobs))
    else:
        results = [_compare_arm(j) for j in jobs]
    # results arrive in (variant, seed) order either way
    rows = []
    for v in variants:
        mine = [r for r in results if r[0] == v]
        mst = np.array([r[2] for r in mine])
        r1 = np.array([r[3] for r in mine])
        rows.append((v, mst.mean(), mst.std(), r1.mean(), r1.std(), len(mine)))
    return rows


COMPARE_HEADER = "variant\tmst_overlap_mean\tmst_overlap_std\tretrieval_r1_mean\tretrieval_r1_std\tn_seeds"


def cmd_compare(args):
    rows = compare_rows(args)
    lines = [COMPARE_HEADER]
    for v, mm, ms, rm, rs, n in rows:
        lines.append(f"{v}\t{_fmt(mm)}\t{_fmt(ms)}\t{_fmt(rm)}\t{_fmt(rs)}\t{n}")
    _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_train(args):
    if args.input:
        ci, cj = read_cloud_csv(args.input[0]), read_cloud_csv(args.input[1])
        data = (ci, cj, _load_pairing(args.pairing, ci, cj))
    else:
        data = generate(_spec_from(args, args.seed))
    cfg = TrainConfig(
        steps=args.steps,
        learning_rate=args.lr,
        align=_align(args),
        tau=args.tau,
        labeled_fraction=args.labeled_fraction,
        seed=args.seed,
        optimize=args.optimize,
        momentum=args.momentum,
    )
    result = train(data, cfg)
    if args.export:
        write_cloud_csv(result.final_clouds[0], f"{args.export}_i.csv")
        write_cloud_csv(result.final_clouds[1], f"{args.export}_j.csv")
    out = result.to_dict()
    out["config"] = cfg.to_dict()
    _emit(args, json.dumps(out) + "\n")
    return 0


def cmd_viz(args):
    ci, cj, pairing = _load_pair(args)
    prefix = args.output or "mst"
    opts = _opts(args)
    decs = []
    for cloud in (ci, cj):
        _, dec = compute_ph(pairwise_distances(cloud, args.metric), opts)
        decs.append(dec)
    # MST edges of each side expressed in the other side's indices
    fw, bw = pairing.forward, pairing.backward
    tree_i = {frozenset((int(a), int(b))) for a, b in decs[0].h0}
    tree_j_in_i = {frozenset((int(bw[a]), int(bw[b]))) for a, b in decs[1].h0}
    shared_i = [tuple(e) for e in tree_i & tree_j_in_i]
    shared_j = [(int(fw[a]), int(fw[b])) for a, b in shared_i]
    overlap = mst_overlap(ci, cj, pairing, args.metric)
    paths = []
    for tag, cloud, dec, shared in (("i", ci, decs[0], shared_i), ("j", cj, decs[1], shared_j)):
        # the title carries no modality tag so identical inputs give identical files
        scene = build_scene(
            cloud.points,
            cloud.ids,
            [tuple(map(int, e)) for e in dec.h0],
            [tuple(map(int, e)) for e in dec.h1],
            shared=shared,
            title=f"MST overlap {overlap:.3f}",
        )
        path = f"{prefix}_{tag}.svg"
        Path(path).write_text(scene.render(), encoding="utf-8")
        paths.append(path)
    sys.stdout.write("\n".join(paths) + "\n")
    return 0


def cmd_datagen(args):
    spec = SynthSpec(
        n_points=args.n,
        dim=args.dim,
        structure=args.structure,
        k=args.k,
        spread=args.spread,
        radius=args.radius,
        noise=args.noise,
        gap=GapSpec(
            angle=args.gap_angle,
            axes=tuple(args.gap_axes),
            sigma=args.gap_sigma,
            translation=args.gap_translation,
            sign_flip=args.gap_sign_flip,
        ),
        seed=args.seed,
    )
    ci, cj, _ = generate(spec)
    prefix = args.output or "synth"
    write_cloud_csv(ci, f"{prefix}_i.csv")
    write_cloud_csv(cj, f"{prefix}_j.csv")
    write_pairing_csv([(int(a), int(a)) for a in ci.ids], f"{prefix}_pairing.csv")
    Path(f"{prefix}.json").write_text(spec.to_json() + "\n", encoding="utf-8")
    sys.stdout.write(f"{prefix}_i.csv\n{prefix}_j.csv\n{prefix}_pairing.csv\n{prefix}.json\n")
    return 0


COMMANDS = {
    "ph": cmd_ph,
    "mst": cmd_mst,
    "loss": cmd_loss,
    "compare": cmd_compare,
    "train": cmd_train,
    "viz": cmd_viz,
    "datagen": cmd_datagen,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ParseError, json.JSONDecodeError) as exc:
        print(f"toma: error: {exc}", file=sys.stderr)
        return 1
    except (TomaError, ValueError) as exc:
        print(f"toma: invalid input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
