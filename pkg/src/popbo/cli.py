"""Command-line entry points: benchmark runs, terminal sessions, service.

    popbo bench --instance gp-se --seeds 30 --horizon 100 --out-dir runs
    popbo interactive --domain 18:30,0:1.2 --labels "Temperature C,Air speed m/s"
    popbo serve --port 8777 --checkpoint-dir sessions/

The POPBO_SEED environment variable overrides the base seed everywhere.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .bench import INSTANCE_NAMES, run_benchmark
from .engine import PopBoConfig, SessionState
from .kernels import KernelSpec
from .service import serve_forever


def _parse_kernel(text: str | None, dim: int | None = None) -> KernelSpec | None:
    if text is None:
        return None
    obj = json.loads(text)
    if dim is not None:
        obj.setdefault("dim", dim)
    return KernelSpec.from_json(obj)


def _parse_domain(text: str) -> np.ndarray:
    try:
        rows = []
        for part in text.split(","):
            lo, hi = part.split(":")
            rows.append([float(lo), float(hi)])
        return np.asarray(rows)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"domain must look like 'lo:hi[,lo:hi...]': {exc}")


def _base_seed(args) -> int:
    env = os.environ.get("POPBO_SEED")
    if env is not None:
        return int(env)
    return args.seed


def cmd_bench(args) -> int:
    overrides = {
        "beta0": args.beta0,
        "lam": getattr(args, "lambda"),
        "jitter": args.jitter,
        "norm_bound": args.norm_bound,
        "outer_budget": args.budget,
    }
    kernel = _parse_kernel(args.kernel)
    if kernel is not None:
        overrides["kernel"] = kernel
    summary = run_benchmark(
        args.instance,
        seeds=args.seeds,
        horizon=args.horizon,
        out_dir=args.out_dir,
        base_seed=_base_seed(args),
        run_id=args.run_id,
        workers=args.workers,
        overrides=overrides,
        compute_max_mle=not args.no_max_mle,
    )
    print(
        f"{args.instance}: {summary['n_episodes']} episodes x T={summary['horizon']}  "
        f"final reported suboptimality {summary['final_t_star_subopt_mean']:.4f} "
        f"+/- {summary['final_t_star_subopt_std']:.4f} (t*), "
        f"{summary['final_max_mle_subopt_mean']:.4f} "
        f"+/- {summary['final_max_mle_subopt_std']:.4f} (max-MLE)"
    )
    if summary.get("mean_loglog_slope") is not None:
        print(f"mean cumulative-regret log-log slope (burn-in {summary['burn_in']}): "
              f"{summary['mean_loglog_slope']:.3f}")
    return 0


def _format_point(x, labels) -> str:
    if labels:
        return ", ".join(f"{lbl} {v:.4g}" for lbl, v in zip(labels, x))
    return "(" + ", ".join(f"{v:.6g}" for v in x) + ")"


def cmd_interactive(args) -> int:
    if args.resume:
        with open(args.resume) as fh:
            state = SessionState.from_checkpoint(json.load(fh))
        labels = state.config.labels
        print(f"resumed session at step {state.t + 1}")
    else:
        domain = args.domain
        if domain is None:
            print("error: --domain is required for a fresh session", file=sys.stderr)
            return 2
        labels = args.labels.split(",") if args.labels else None
        span = float(np.max(domain[:, 1] - domain[:, 0]))
        kernel = _parse_kernel(args.kernel, dim=domain.shape[0]) or KernelSpec(
            "se", domain.shape[0], variance=1.0, lengthscale=max(0.25 * span, 1e-6)
        )
        x0 = (
            np.asarray([float(v) for v in args.x0.split(",")])
            if args.x0
            else domain.mean(axis=1)
        )
        state = SessionState(
            config=PopBoConfig(
                kernel=kernel,
                domain=domain,
                x0=x0,
                norm_bound=args.norm_bound,
                beta0=args.beta0,
                lam=getattr(args, "lambda"),
                jitter=args.jitter,
                seed=_base_seed(args),
                outer_budget=args.budget,
                labels=labels,
            )
        )

    checkpoint_path = args.checkpoint or (
        os.path.join(args.checkpoint_dir, "interactive.json") if args.checkpoint_dir else None
    )
    if args.checkpoint_dir:
        os.makedirs(args.checkpoint_dir, exist_ok=True)

    def save():
        if checkpoint_path:
            with open(checkpoint_path, "w") as fh:
                fh.write(state.checkpoint_json())
            print(f"checkpoint written to {checkpoint_path}")

    steps_done = 0
    try:
        while args.horizon is None or steps_done < args.horizon:
            step = state.t + 1
            if state.pending is None:
                x, x_ref = state.next_query()
            else:
                x, x_ref = state.pending.x, state.pending.x_ref
            print(f"\nstep {step}")
            print(f"  option 1: {_format_point(x, labels)}")
            print(f"  option 2: {_format_point(x_ref, labels)}")
            while True:
                line = sys.stdin.readline()
                if line == "":
                    print("\nend of input")
                    save()
                    return 0
                choice = line.strip()
                if choice in ("1", "2"):
                    break
                print("  please answer 1 or 2")
            state.observe(1 if choice == "1" else 0)
            save()
            idx, best = state.report_t_star()
            print(
                f"  recorded. current report: step {idx}, point {_format_point(best, labels)}, "
                f"radius {state.radius_trace[idx - 1]:.4g}"
            )
            steps_done += 1
    except KeyboardInterrupt:
        print("\ninterrupted")
    save()
    return 0


def cmd_serve(args) -> int:
    serve_forever(
        port=args.port,
        checkpoint_dir=args.checkpoint_dir,
        static_dir=args.static_dir,
        host=args.host,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="popbo",
        description="Preference-only Bayesian optimization: benchmarks, "
        "terminal sessions, and the HTTP session service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--beta0", type=float, default=1.0, help="confidence schedule scale")
        p.add_argument("--lambda", type=float, default=1.0, help="uncertainty regularizer")
        p.add_argument("--jitter", type=float, default=1e-6, help="Gram matrix jitter")
        p.add_argument("--norm-bound", type=float, default=None, help="RKHS norm bound B")
        p.add_argument("--kernel", type=str, default=None, help="kernel spec as JSON")
        p.add_argument("--seed", type=int, default=0, help="base seed (POPBO_SEED overrides)")
        p.add_argument("--budget", type=int, default=None, help="outer search budget")

    b = sub.add_parser("bench", help="run a benchmark and write run artifacts")
    common(b)
    b.add_argument("--instance", required=True, choices=sorted(INSTANCE_NAMES))
    b.add_argument("--seeds", type=int, default=30)
    b.add_argument("--horizon", type=int, default=30)
    b.add_argument("--out-dir", default="runs")
    b.add_argument("--run-id", default=None)
    b.add_argument("--workers", type=int, default=None)
    b.add_argument("--no-max-mle", action="store_true", help="skip max-MLE reporting")
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("interactive", help="terminal preference session")
    common(i)
    i.add_argument("--domain", type=_parse_domain, default=None, help="box as lo:hi[,lo:hi...]")
    i.add_argument("--x0", type=str, default=None, help="start point as comma-separated values")
    i.add_argument("--labels", type=str, default=None, help="comma-separated dimension labels")
    i.add_argument("--horizon", type=int, default=None)
    i.add_argument("--checkpoint-dir", default=None)
    i.add_argument("--checkpoint", default=None, help="explicit checkpoint file path")
    i.add_argument("--resume", default=None, help="resume from a checkpoint file")
    i.set_defaults(func=cmd_interactive, norm_bound=6.0)

    s = sub.add_parser("serve", help="run the HTTP session service")
    s.add_argument("--port", type=int, default=8777)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--checkpoint-dir", default=None)
    s.add_argument("--static-dir", default=None, help="directory with the browser client build")
    s.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "norm_bound", None) is None and args.command == "interactive":
        args.norm_bound = 6.0
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
